use std::path::Path;
use std::process::{Command, Output};

use tic_core::rotmath::geodesic_deg;
use tic_core::synth::{gen_motion, read_dataset, write_motion};
use tic_core::{ImuFrame, MotionSpec, Rotation, SensorReading};

fn tic(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tic"))
        .args(args)
        .current_dir(dir)
        .env_remove("TIC_SEED")
        .output()
        .expect("run tic")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(o: Output) -> Output {
    assert!(o.status.success(), "exit {:?}\nstdout:\n{}\nstderr:\n{}", o.status.code(), stdout(&o), stderr(&o));
    o
}

/// (frame, sensor, ome) from a metrics CSV.
fn ome_rows(csv: &str) -> Vec<(u64, usize, f64)> {
    csv.lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect()
}

#[test]
fn help_and_usage_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = tic(&["--help"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("ramp:sensor=3,axis=y,rate=0.07"));
    assert_eq!(tic(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(tic(&["simulate", "--estimator", "bogus"], dir.path()).status.code(), Some(1));
    assert_eq!(tic(&["simulate", "--estimator", "tic"], dir.path()).status.code(), Some(1));
    assert_eq!(tic(&["simulate", "--schedule", "7.drift=const(1,2,3)"], dir.path()).status.code(), Some(1));
}

#[test]
fn synth_empty_dataset_is_valid() {
    let dir = tempfile::tempdir().unwrap();
    ok(tic(&["synth", "--out", "e.ticd", "--count", "0"], dir.path()));
    let ds = read_dataset(dir.path().join("e.ticd")).unwrap();
    assert_eq!((ds.len(), ds.sensors, ds.n), (0, 6, 256));
}

#[test]
fn synth_is_reproducible_from_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str| ["synth", "--out", out, "--count", "6", "--n", "64", "--seed", "7"];
    ok(tic(&args("a.ticd"), dir.path()));
    ok(tic(&args("b.ticd"), dir.path()));
    let o = Command::new(env!("CARGO_BIN_EXE_tic"))
        .args(["synth", "--out", "c.ticd", "--count", "6", "--n", "64"])
        .current_dir(dir.path())
        .env("TIC_SEED", "7")
        .output()
        .unwrap();
    ok(o);
    ok(tic(&["synth", "--out", "d.ticd", "--count", "6", "--n", "64", "--seed", "8"], dir.path()));
    let read = |n: &str| std::fs::read(dir.path().join(n)).unwrap();
    assert_eq!(read("a.ticd"), read("b.ticd"));
    assert_eq!(read("a.ticd"), read("c.ticd"));
    assert_ne!(read("a.ticd"), read("d.ticd"));
    assert_eq!(read_dataset(dir.path().join("a.ticd")).unwrap().len(), 6);
}

#[test]
fn synth_limb_diversity_median_clears_thirty() {
    let dir = tempfile::tempdir().unwrap();
    let o = ok(tic(&["synth", "--out", "s.ticd", "--count", "1000", "--motion", "gen:active"], dir.path()));
    let text = stdout(&o);
    for limb in ["left forearm", "right forearm", "left lower leg", "right lower leg"] {
        let line = text.lines().find(|l| l.trim_start().starts_with(limb)).unwrap();
        let median: f64 = line.split_whitespace().last().unwrap().parse().unwrap();
        assert!(median >= 30.0, "{limb}: {median}");
    }
}

#[test]
fn simulate_identity_with_oracle_has_no_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = ok(tic(&["simulate", "--frames", "400", "--n", "64", "--schedule", "identity"], dir.path()));
    let rows = ome_rows(&stdout(&o));
    assert_eq!(rows.len(), 400 * 6);
    assert!(rows.iter().all(|r| r.2 < 1e-9));
}

#[test]
fn simulate_step_drift_drops_after_a_pass() {
    let dir = tempfile::tempdir().unwrap();
    ok(tic(
        &["simulate", "--frames", "900", "--schedule", "step:sensor=nonroot,t=2,y=25", "--out", "m.csv"],
        dir.path(),
    ));
    let csv = std::fs::read_to_string(dir.path().join("m.csv")).unwrap();
    let rows = ome_rows(&csv);
    let updated: Vec<u64> = csv
        .lines()
        .skip(1)
        .filter(|l| l.split(',').nth(5) == Some("1"))
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    let first = *updated.first().expect("no update in the run");
    let before = rows.iter().filter(|r| r.1 == 0 && r.0 > 60 && r.0 <= first).map(|r| r.2).fold(f64::MAX, f64::min);
    let after = rows.iter().filter(|r| r.1 == 0 && r.0 > first).map(|r| r.2).fold(0.0, f64::max);
    assert!(before > 24.0 && after < 1e-6, "before {before}, after {after}");
}

#[test]
fn simulate_with_missing_weights_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = tic(&["simulate", "--estimator", "tic", "--weights", "missing.ticw", "--frames", "100"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("missing file"), "{}", stderr(&o));
}

#[test]
fn weights_init_inspect_and_simulate() {
    let dir = tempfile::tempdir().unwrap();
    ok(tic(&["weights-init", "--out", "w.ticw", "--d-model", "16", "--ffn", "32", "--post-norm"], dir.path()));
    let o = ok(tic(&["weights-inspect", "w.ticw"], dir.path()));
    let text = stdout(&o);
    assert!(text.contains("d_model      16") && text.contains("pre_norm     false") && text.contains("tensors      86"));
    ok(tic(
        &["simulate", "--estimator", "tic", "--weights", "w.ticw", "--frames", "300", "--n", "64", "--out", "t.csv"],
        dir.path(),
    ));
    assert_eq!(tic(&["weights-init", "--out", "x.ticw", "--d-model", "12"], dir.path()).status.code(), Some(1));
}

fn write_frames(path: &Path, frames: &[ImuFrame]) {
    write_motion(path, frames).unwrap();
}

#[test]
fn rd_of_a_held_pose_is_one_and_windows_floor() {
    let dir = tempfile::tempdir().unwrap();
    let m = gen_motion(&MotionSpec::still(600), 3).unwrap();
    write_frames(&dir.path().join("still.jsonl"), &m.frames);
    let o = ok(tic(&["rd", "--motion", "still.jsonl", "--n", "256", "--format", "csv"], dir.path()));
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.split(',').skip(2).all(|v| v == "1")));
    let o = ok(tic(&["rd", "--motion", "still.jsonl", "--n", "100", "--format", "csv"], dir.path()));
    assert_eq!(stdout(&o).lines().count(), 1 + 6);
}

#[test]
fn rd_limbs_exceed_head_on_active_motion() {
    let dir = tempfile::tempdir().unwrap();
    let o = ok(tic(&["rd", "--frames", "3000", "--n", "256", "--format", "csv"], dir.path()));
    let rows: Vec<Vec<usize>> = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| l.split(',').skip(2).map(|v| v.parse().unwrap()).collect())
        .collect();
    let total = |s: usize| rows.iter().map(|r| r[s]).sum::<usize>();
    for limb in 0..4 {
        assert!(total(limb) >= total(4), "sensor {limb}: {} < head {}", total(limb), total(4));
    }
}

#[test]
fn rd_reports_parse_errors_with_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let m = gen_motion(&MotionSpec::active(3), 3).unwrap();
    write_frames(&dir.path().join("m.jsonl"), &m.frames);
    let mut text = std::fs::read_to_string(dir.path().join("m.jsonl")).unwrap();
    text.push_str("{\"t\": 3, \"sensors\": oops}\n");
    std::fs::write(dir.path().join("m.jsonl"), text).unwrap();
    let o = tic(&["rd", "--motion", "m.jsonl", "--n", "2"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));
}

#[test]
fn eval_reports_injected_errors() {
    let dir = tempfile::tempdir().unwrap();
    let m = gen_motion(&MotionSpec::active(200), 4).unwrap();
    write_frames(&dir.path().join("gt.jsonl"), &m.frames);

    let o = ok(tic(&["eval", "--calibrated", "gt.jsonl", "--truth", "gt.jsonl", "--format", "csv"], dir.path()));
    for line in stdout(&o).lines().skip(1) {
        let f: Vec<f64> = line.split(',').skip(1).map(|v| v.parse().unwrap()).collect();
        assert_eq!(f, vec![0.0, 0.0], "{line}");
    }

    // a bone-side error of 15° on one non-root sensor
    let bent: Vec<ImuFrame> = m
        .frames
        .iter()
        .map(|f| {
            let mut f = f.clone();
            let r = &f.sensors[2];
            f.sensors[2] = SensorReading::new(r.orientation * Rotation::rx(15.0), r.accel);
            f
        })
        .collect();
    assert!((geodesic_deg(&bent[0].sensors[2].orientation, &m.frames[0].sensors[2].orientation) - 15.0).abs() < 1e-9);
    write_frames(&dir.path().join("bent.jsonl"), &bent);
    let o = ok(tic(&["eval", "--calibrated", "bent.jsonl", "--truth", "gt.jsonl", "--format", "csv"], dir.path()));
    let text = stdout(&o);
    let row = |name: &str| -> Vec<f64> {
        let l = text.lines().find(|l| l.starts_with(name)).unwrap();
        l.split(',').skip(1).map(|v| v.parse().unwrap()).collect()
    };
    assert!((row("left lower leg")[0] - 15.0).abs() < 1e-6);
    assert_eq!(row("left forearm")[0], 0.0);

    std::fs::write(dir.path().join("empty.jsonl"), "").unwrap();
    let o = tic(&["eval", "--calibrated", "empty.jsonl", "--truth", "empty.jsonl"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no frames"));

    write_frames(&dir.path().join("short.jsonl"), &m.frames[..100]);
    let o = tic(&["eval", "--calibrated", "short.jsonl", "--truth", "gt.jsonl"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("mismatch"));
}
