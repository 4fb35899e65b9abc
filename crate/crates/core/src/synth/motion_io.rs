//! JSON-lines motion files. One record per frame:
//!
//! ```text
//! {"t": 0, "sensors": [{"R": [r00, r01, ..., r22], "a": [ax, ay, az]}, ...]}
//! ```
//!
//! Rotations are row-major. Inputs within 1e-4 of orthonormal are projected
//! onto the nearest rotation; anything further off is rejected.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::MotionSequence;
use crate::error::{Error, Result};
use crate::rotmath::Rotation;
use crate::sensor_model::{ImuFrame, SensorReading};

/// Largest orthonormality error accepted from a motion file.
pub const FILE_ROTATION_TOLERANCE: f64 = 1e-4;

#[derive(Serialize, Deserialize)]
struct SensorRecord {
    #[serde(rename = "R")]
    r: Vec<f64>,
    a: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct FrameRecord {
    t: u64,
    sensors: Vec<SensorRecord>,
}

fn parse_line(line: &str, line_no: usize) -> Result<ImuFrame> {
    let err = |message: String| Error::Parse { line: line_no, message };
    let rec: FrameRecord = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
    let sensors = rec
        .sensors
        .iter()
        .enumerate()
        .map(|(s, sr)| {
            let orientation = Rotation::from_row_major(&sr.r, FILE_ROTATION_TOLERANCE)
                .map_err(|e| err(format!("sensor {s}: {e}")))?;
            if sr.a.len() != 3 {
                return Err(err(format!("sensor {s}: expected 3 acceleration values, got {}", sr.a.len())));
            }
            if sr.a.iter().any(|v| !v.is_finite()) {
                return Err(err(format!("sensor {s}: non-finite acceleration")));
            }
            Ok(SensorReading::new(orientation, Vector3::new(sr.a[0], sr.a[1], sr.a[2])))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ImuFrame::new(rec.t, sensors))
}

/// Parses motion records from a reader. Blank lines are skipped.
pub fn parse_motion(reader: impl BufRead, rate_hz: f64) -> Result<MotionSequence> {
    let mut frames: Vec<ImuFrame> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let frame = parse_line(&line, i + 1)?;
        if let Some(prev) = frames.last() {
            if frame.len() != prev.len() {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("expected {} sensors, got {}", prev.len(), frame.len()),
                });
            }
            if frame.t <= prev.t {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("frame index {} does not follow {}", frame.t, prev.t),
                });
            }
        }
        frames.push(frame);
    }
    MotionSequence::new(frames, rate_hz)
}

pub fn load_motion(path: impl AsRef<Path>, rate_hz: f64) -> Result<MotionSequence> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::from_open(e, path))?;
    parse_motion(BufReader::new(file), rate_hz)
}

pub fn write_motion_to(mut w: impl Write, frames: &[ImuFrame]) -> Result<()> {
    for f in frames {
        let rec = FrameRecord {
            t: f.t,
            sensors: f
                .sensors
                .iter()
                .map(|r| SensorRecord {
                    r: r.orientation.row_major().to_vec(),
                    a: vec![r.accel.x, r.accel.y, r.accel.z],
                })
                .collect(),
        };
        serde_json::to_writer(&mut w, &rec).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_motion(path: impl AsRef<Path>, frames: &[ImuFrame]) -> Result<()> {
    let file = File::create(path.as_ref())?;
    write_motion_to(BufWriter::new(file), frames)
}
