//! Orientation and acceleration measurement errors in the ego-yaw frame.
//!
//! Each stream is mapped into its own ego-yaw frame: the calibrated stream by
//! the heading of its calibrated root sensor, the ground truth by the heading
//! of the true root. A heading error common to all sensors therefore drops out.

use std::io::Write;
use std::path::Path;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::rotmath::{geodesic_deg, yaw_decompose, Rotation};
use crate::sensor_model::ImuFrame;

/// Heading of a root orientation; identity when indeterminate, as in `to_ego_yaw`.
pub fn ego_heading(root: &Rotation) -> Rotation {
    let split = yaw_decompose(root);
    if split.is_indeterminate() {
        Rotation::identity()
    } else {
        split.yaw
    }
}

/// Orientation error in degrees: `∠(ψ_calᵀ·R_cal, ψ_gtᵀ·R_gt)`.
pub fn ome(calibrated: &Rotation, calibrated_root_yaw: &Rotation, gt: &Rotation, gt_root_yaw: &Rotation) -> f64 {
    geodesic_deg(&(calibrated_root_yaw.transpose() * *calibrated), &(gt_root_yaw.transpose() * *gt))
}

/// Acceleration error in m/s²: `‖ψ_calᵀ·a_cal − ψ_gtᵀ·a_gt‖`.
pub fn ame(
    calibrated: &Vector3<f64>,
    calibrated_root_yaw: &Rotation,
    gt: &Vector3<f64>,
    gt_root_yaw: &Rotation,
) -> f64 {
    (calibrated_root_yaw.transpose().rotate(calibrated) - gt_root_yaw.transpose().rotate(gt)).norm()
}

/// OME and AME of a calibrated stream against ground truth, frame by frame.
/// Calibration state columns are zero.
pub fn compare_streams(calibrated: &[ImuFrame], truth: &[ImuFrame], root: usize, rate_hz: f64) -> Result<MetricsReport> {
    if calibrated.len() != truth.len() {
        return Err(Error::LengthMismatch {
            field: "frames",
            expected: truth.len(),
            actual: calibrated.len(),
        });
    }
    let sensors = truth.first().ok_or(Error::NoFrames)?.len();
    if root >= sensors {
        return Err(Error::SensorOutOfRange { index: root, sensors });
    }
    let mut rows = Vec::with_capacity(truth.len() * sensors);
    for (c, g) in calibrated.iter().zip(truth) {
        if c.len() != sensors || g.len() != sensors {
            return Err(Error::LengthMismatch {
                field: "sensors",
                expected: sensors,
                actual: if g.len() != sensors { g.len() } else { c.len() },
            });
        }
        let cal_yaw = ego_heading(&c.sensors[root].orientation);
        let gt_yaw = ego_heading(&g.sensors[root].orientation);
        for (s, (cr, gr)) in c.sensors.iter().zip(&g.sensors).enumerate() {
            rows.push(MetricsRow {
                frame: g.t,
                sensor: s,
                ome_deg: ome(&cr.orientation, &cal_yaw, &gr.orientation, &gt_yaw),
                ame_ms2: ame(&cr.accel, &cal_yaw, &gr.accel, &gt_yaw),
                rd: None,
                triggered: false,
                drift_angle_deg: 0.0,
                offset_angle_deg: 0.0,
            });
        }
    }
    Ok(MetricsReport {
        sensors,
        rate_hz,
        rows,
        passes: Vec::new(),
    })
}

/// One sensor at one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub frame: u64,
    pub sensor: usize,
    pub ome_deg: f64,
    pub ame_ms2: f64,
    /// Rotation diversity, on frames where an estimation pass ran.
    pub rd: Option<usize>,
    /// The sensor's state was updated at this frame.
    pub triggered: bool,
    /// Magnitude of the calibrator's current drift estimate.
    pub drift_angle_deg: f64,
    /// Magnitude of the calibrator's current offset estimate.
    pub offset_angle_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorSummary {
    pub sensor: usize,
    pub mean_ome_deg: f64,
    pub max_ome_deg: f64,
    pub mean_ame_ms2: f64,
    pub updates: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsReport {
    pub sensors: usize,
    pub rate_hz: f64,
    /// Frame-major: all sensors of frame 0, then frame 1, ...
    pub rows: Vec<MetricsRow>,
    /// Frames at which an estimation pass ran.
    pub passes: Vec<u64>,
}

impl MetricsReport {
    pub fn frames(&self) -> usize {
        self.rows.len().checked_div(self.sensors).unwrap_or(0)
    }

    fn select<'a>(&'a self, sensors: &'a [usize], from_frame: u64) -> impl Iterator<Item = &'a MetricsRow> + 'a {
        self.rows
            .iter()
            .filter(move |r| r.frame >= from_frame && sensors.contains(&r.sensor))
    }

    fn mean(values: impl Iterator<Item = f64>) -> f64 {
        let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
        if n == 0 {
            f64::NAN
        } else {
            sum / n as f64
        }
    }

    /// Mean OME over the given sensors from `from_frame` on.
    pub fn mean_ome(&self, sensors: &[usize], from_frame: u64) -> f64 {
        Self::mean(self.select(sensors, from_frame).map(|r| r.ome_deg))
    }

    pub fn mean_ame(&self, sensors: &[usize], from_frame: u64) -> f64 {
        Self::mean(self.select(sensors, from_frame).map(|r| r.ame_ms2))
    }

    /// Mean OME over the given sensors at each frame.
    pub fn ome_series(&self, sensors: &[usize]) -> Vec<f64> {
        self.rows
            .chunks(self.sensors.max(1))
            .map(|frame| Self::mean(frame.iter().filter(|r| sensors.contains(&r.sensor)).map(|r| r.ome_deg)))
            .collect()
    }

    pub fn all_sensors(&self) -> Vec<usize> {
        (0..self.sensors).collect()
    }

    pub fn summary(&self) -> Vec<SensorSummary> {
        (0..self.sensors)
            .map(|s| {
                let rows: Vec<_> = self.rows.iter().filter(|r| r.sensor == s).collect();
                SensorSummary {
                    sensor: s,
                    mean_ome_deg: Self::mean(rows.iter().map(|r| r.ome_deg)),
                    max_ome_deg: rows.iter().map(|r| r.ome_deg).fold(0.0, f64::max),
                    mean_ame_ms2: Self::mean(rows.iter().map(|r| r.ame_ms2)),
                    updates: rows.iter().filter(|r| r.triggered).count(),
                }
            })
            .collect()
    }

    pub fn write_csv_to(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "frame,sensor,ome_deg,ame_ms2,rd,triggered,drift_angle_deg,offset_angle_deg")?;
        for r in &self.rows {
            let rd = r.rd.map(|v| v.to_string()).unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.frame, r.sensor, r.ome_deg, r.ame_ms2, rd, r.triggered as u8, r.drift_angle_deg, r.offset_angle_deg
            )?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv_to(std::io::BufWriter::new(std::fs::File::create(path)?))
    }
}
