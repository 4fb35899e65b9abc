use std::io::{self, BufWriter, Write};
use std::sync::Arc;

use anyhow::{Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use tic_core::calibrator::{compare_streams, run_simulation, MetricsReport, SimulationConfig};
use tic_core::estimator::tic::{load_weights, save_weights, TicArch, WeightBundle, WeightFlags};
use tic_core::sensor_model::sensor_name;
use tic_core::synth::dataset::DatasetWriter;
use tic_core::synth::{load_motion, make_sample, mix_seed, ParamDistribution, SampleConfig};
use tic_core::{
    rotation_diversity, CalibratorConfig, DriftSchedule, Estimator, GravitySpec, OracleEstimator,
    ProcrustesConfig, ProcrustesEstimator, TicEstimator, TriggerConfig,
};

use crate::source::{expand_schedule, MotionSource};
use crate::{EstimatorKind, EvalArgs, Format, RdArgs, SimulateArgs, SynthArgs, UsageError, WeightsInitArgs, WeightsInspectArgs};

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn median(mut v: Vec<usize>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_unstable();
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m] as f64
    } else {
        (v[m - 1] + v[m]) as f64 / 2.0
    }
}

pub fn synth(a: &SynthArgs, seed: u64) -> Result<()> {
    let dist = ParamDistribution::symmetric(a.offset_deg, a.tilt_deg, a.heading_deg);
    dist.validate().map_err(|e| usage(e.to_string()))?;
    let cfg = SampleConfig {
        n: a.n,
        root: a.root,
        leakage: !a.no_leakage,
        gravity: GravitySpec::default(),
    };
    let file_motion = match &a.motion.motion {
        MotionSource::File(p) => Some(load_motion(p, a.motion.rate).with_context(|| format!("reading {}", p.display()))?),
        _ => None,
    };
    if let Some(m) = &file_motion {
        if m.len() < a.n {
            anyhow::bail!("motion file has {} frames, fewer than the window length {}", m.len(), a.n);
        }
    }

    let sensors = match &file_motion {
        Some(m) => m.sensors(),
        None => a.motion.motion.load(1, a.motion.rate, seed)?.sensors(),
    };
    let mut w = DatasetWriter::create(&a.out, sensors, a.n).with_context(|| format!("creating {}", a.out.display()))?;
    let mut rds: Vec<Vec<usize>> = Vec::with_capacity(a.count);

    // Each sample draws from its own stream, so the output does not depend on scheduling.
    // Chunks keep memory bounded for large counts.
    const CHUNK: usize = 256;
    for lo in (0..a.count).step_by(CHUNK) {
        let batch = (lo..(lo + CHUNK).min(a.count))
            .into_par_iter()
            .map(|i| {
                let s = mix_seed(seed, i as u64);
                let generated;
                let (motion, start) = match &file_motion {
                    Some(m) => (m, ChaCha8Rng::seed_from_u64(s).gen_range(0..=m.len() - a.n)),
                    None => {
                        generated = a.motion.motion.load(a.n, a.motion.rate, s)?;
                        (&generated, 0)
                    }
                };
                let sample = make_sample(motion, start, &dist, mix_seed(s, 1), &cfg)?;
                let rd = (0..sample.window.sensors())
                    .map(|k| rotation_diversity(sample.window.orientations(k)))
                    .collect::<tic_core::Result<Vec<_>>>()?;
                Ok((sample, rd))
            })
            .collect::<Result<Vec<_>>>()?;
        for (sample, rd) in batch {
            w.write_sample(&sample)?;
            rds.push(rd);
        }
    }
    let count = w.count();
    w.finish()?;

    println!("wrote {count} samples ({sensors} sensors, n = {}) to {}", a.n, a.out.display());
    if !rds.is_empty() {
        println!("median rotation diversity per sensor:");
        for k in 0..sensors {
            let m = median(rds.iter().map(|rd| rd[k]).collect());
            println!("  {:<16} {m:>6.1}", sensor_name(k));
        }
    }
    Ok(())
}

fn parse_thresholds(text: Option<&str>, sensors: usize) -> Result<TriggerConfig> {
    match text {
        None => Ok(TriggerConfig::default()),
        Some("off") => Ok(TriggerConfig::disabled(sensors)),
        Some(t) => {
            let values = t
                .split(',')
                .map(|v| v.trim().parse::<usize>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| usage(format!("--thresholds {t:?}: {e}")))?;
            let values = if values.len() == 1 { vec![values[0]; sensors] } else { values };
            TriggerConfig::new(values).map_err(|e| usage(e.to_string()))
        }
    }
}

fn estimator(a: &SimulateArgs) -> Result<Arc<dyn Estimator>> {
    Ok(match a.estimator {
        EstimatorKind::Oracle => Arc::new(OracleEstimator),
        EstimatorKind::Procrustes => Arc::new(ProcrustesEstimator::new(ProcrustesConfig {
            leakage: !a.no_leakage,
            ..ProcrustesConfig::default()
        })),
        EstimatorKind::Tic => {
            let path = a.weights.as_ref().ok_or_else(|| usage("--estimator tic needs --weights"))?;
            let bundle = load_weights(path)?;
            Arc::new(TicEstimator::new(&bundle)?)
        }
    })
}

fn write_report(report: &MetricsReport, out: Option<&std::path::Path>) -> Result<()> {
    match out {
        Some(p) => report.write_csv(p).with_context(|| format!("writing {}", p.display()))?,
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            report.write_csv_to(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn print_summary(report: &MetricsReport, to: &mut dyn Write) -> Result<()> {
    writeln!(to, "{:<16} {:>10} {:>10} {:>10} {:>8}", "sensor", "OME(deg)", "max(deg)", "AME(m/s2)", "updates")?;
    let summary = report.summary();
    for s in &summary {
        writeln!(
            to,
            "{:<16} {:>10.4} {:>10.4} {:>10.4} {:>8}",
            sensor_name(s.sensor),
            s.mean_ome_deg,
            s.max_ome_deg,
            s.mean_ame_ms2,
            s.updates
        )?;
    }
    let all = report.all_sensors();
    writeln!(
        to,
        "{:<16} {:>10.4} {:>10} {:>10.4} {:>8}",
        "average",
        report.mean_ome(&all, 0),
        "",
        report.mean_ame(&all, 0),
        summary.iter().map(|s| s.updates).sum::<usize>()
    )?;
    Ok(())
}

pub fn simulate(a: &SimulateArgs, seed: u64) -> Result<()> {
    let motion = a.motion.motion.load(a.motion.frames, a.motion.rate, seed)?;
    let sensors = motion.sensors();
    let schedule = DriftSchedule::parse(&expand_schedule(&a.schedule).map_err(|e| usage(format!("{e:#}")))?, sensors, a.root)
        .map_err(|e| usage(e.to_string()))?;
    let cfg = SimulationConfig {
        calibrator: CalibratorConfig {
            n: a.n,
            t_interval_s: a.interval,
            rate_hz: a.motion.rate,
            trigger: parse_thresholds(a.thresholds.as_deref(), sensors)?,
        },
        leakage: !a.no_leakage,
        gravity: GravitySpec::default(),
        root: a.root,
        initial: None,
    };
    cfg.calibrator.validate().map_err(|e| usage(e.to_string()))?;
    let est = estimator(a)?;
    log::info!("simulating {} frames with the {} estimator", motion.len(), est.name());
    let report = run_simulation(&motion, &schedule, &cfg, est)?;
    write_report(&report, a.out.as_deref())?;
    if a.out.is_some() {
        println!("{} frames, {} passes", report.frames(), report.passes.len());
        print_summary(&report, &mut io::stdout())?;
    }
    Ok(())
}

pub fn rd(a: &RdArgs, seed: u64) -> Result<()> {
    if a.n == 0 {
        return Err(usage("--n must be positive"));
    }
    let motion = a.motion.motion.load(a.motion.frames, a.motion.rate, seed)?;
    let sensors = motion.sensors();
    let windows = motion.len() / a.n;
    let rows = (0..windows)
        .into_par_iter()
        .map(|w| {
            let win = motion.window(w * a.n, a.n)?;
            (0..sensors)
                .map(|s| rotation_diversity(win.orientations(s)))
                .collect::<tic_core::Result<Vec<_>>>()
        })
        .collect::<tic_core::Result<Vec<_>>>()?;

    let mut out = BufWriter::new(io::stdout().lock());
    let names: Vec<String> = (0..sensors).map(sensor_name).collect();
    match a.format {
        Format::Csv => {
            writeln!(out, "window,start_frame,{}", names.join(","))?;
            for (w, rd) in rows.iter().enumerate() {
                let cells: Vec<String> = rd.iter().map(usize::to_string).collect();
                writeln!(out, "{w},{},{}", motion.frames[w * a.n].t, cells.join(","))?;
            }
        }
        Format::Table => {
            write!(out, "{:>6} {:>8}", "window", "start")?;
            for n in &names {
                write!(out, " {n:>14}")?;
            }
            writeln!(out)?;
            for (w, rd) in rows.iter().enumerate() {
                write!(out, "{w:>6} {:>8}", motion.frames[w * a.n].t)?;
                for v in rd {
                    write!(out, " {v:>14}")?;
                }
                writeln!(out)?;
            }
            writeln!(out, "{windows} windows of {} frames", a.n)?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn eval(a: &EvalArgs) -> Result<()> {
    let read = |p: &std::path::Path| load_motion(p, a.rate).with_context(|| format!("reading {}", p.display()));
    let cal = read(&a.calibrated)?;
    let gt = read(&a.truth)?;
    let report = compare_streams(&cal.frames, &gt.frames, a.root, a.rate)?;
    let mut out = io::stdout().lock();
    match a.format {
        Format::Table => print_summary(&report, &mut out)?,
        Format::Csv => {
            writeln!(out, "sensor,ome_deg,ame_ms2")?;
            for s in report.summary() {
                writeln!(out, "{},{},{}", sensor_name(s.sensor), s.mean_ome_deg, s.mean_ame_ms2)?;
            }
            let all = report.all_sensors();
            writeln!(out, "average,{},{}", report.mean_ome(&all, 0), report.mean_ame(&all, 0))?;
        }
    }
    Ok(())
}

pub fn weights_inspect(a: &WeightsInspectArgs) -> Result<()> {
    let bundle = load_weights(&a.path)?;
    let arch = bundle.validate()?;
    let mut out = io::stdout().lock();
    writeln!(out, "sensors      {}", arch.sensors)?;
    writeln!(out, "d_model      {}", arch.d_model)?;
    writeln!(out, "heads        {}", arch.heads)?;
    writeln!(out, "ffn          {}", arch.ffn)?;
    writeln!(out, "positional   {}", bundle.flags.positional_encoding)?;
    writeln!(out, "pre_norm     {}", bundle.flags.pre_norm)?;
    writeln!(out, "tensors      {}", bundle.tensors.len())?;
    writeln!(out, "parameters   {}", bundle.parameter_count())?;
    for (name, t) in &bundle.tensors {
        writeln!(out, "  {name:<28} {:?}", t.shape)?;
    }
    Ok(())
}

pub fn weights_init(a: &WeightsInitArgs, seed: u64) -> Result<()> {
    let arch = TicArch {
        sensors: a.sensors,
        d_model: a.d_model,
        heads: tic_core::estimator::tic::HEADS,
        ffn: a.ffn,
    };
    if arch.sensors == 0 || arch.ffn == 0 || arch.d_model == 0 || arch.d_model % arch.heads != 0 {
        return Err(usage(format!(
            "invalid architecture: d_model must be a positive multiple of {}, sensors and ffn positive",
            arch.heads
        )));
    }
    let flags = WeightFlags {
        positional_encoding: !a.no_positional,
        pre_norm: !a.post_norm,
    };
    let bundle = WeightBundle::seeded(seed, &arch, flags);
    save_weights(&bundle, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    println!("wrote {} parameters to {}", bundle.parameter_count(), a.out.display());
    Ok(())
}
