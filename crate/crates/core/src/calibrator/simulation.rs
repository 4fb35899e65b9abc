//! Streams ground-truth motion through the measurement model and the
//! calibration loop, recording errors per frame.

use std::sync::Arc;

use super::metrics::{ame, ego_heading, ome, MetricsReport, MetricsRow};
use super::schedule::DriftSchedule;
use super::{Calibrator, CalibratorConfig};
use crate::error::{Error, Result};
use crate::estimator::Estimator;
use crate::sensor_model::{apply_measurement_model, CalibState, GravitySpec, DEFAULT_ROOT};
use crate::synth::MotionSequence;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub calibrator: CalibratorConfig,
    /// Gravity leakage in the measured acceleration; on by default.
    pub leakage: bool,
    pub gravity: GravitySpec,
    /// Sensor whose heading defines the ego-yaw frame.
    pub root: usize,
    /// Calibration state the loop starts from.
    pub initial: Option<CalibState>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            calibrator: CalibratorConfig::default(),
            leakage: true,
            gravity: GravitySpec::default(),
            root: DEFAULT_ROOT,
            initial: None,
        }
    }
}

pub fn run_simulation(
    motion: &MotionSequence,
    schedule: &DriftSchedule,
    cfg: &SimulationConfig,
    estimator: Arc<dyn Estimator>,
) -> Result<MetricsReport> {
    let sensors = motion.sensors();
    if schedule.sensors() != sensors {
        return Err(Error::LengthMismatch {
            field: "schedule sensors",
            expected: sensors,
            actual: schedule.sensors(),
        });
    }
    if cfg.root >= sensors {
        return Err(Error::SensorOutOfRange {
            index: cfg.root,
            sensors,
        });
    }
    if (cfg.calibrator.rate_hz - motion.rate_hz).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "calibrator rate {} Hz does not match motion rate {} Hz",
            cfg.calibrator.rate_hz, motion.rate_hz
        )));
    }
    let last_t = motion.frames.last().map(|f| f.t).ok_or(Error::NoFrames)?;
    schedule.check_covers(last_t as f64 / motion.rate_hz)?;

    let initial = cfg.initial.clone().unwrap_or_else(|| CalibState::identity(sensors));
    let mut cal = Calibrator::with_state(cfg.calibrator.clone(), estimator, initial)?;
    let mut report = MetricsReport {
        sensors,
        rate_hz: motion.rate_hz,
        rows: Vec::with_capacity(motion.len() * sensors),
        passes: Vec::new(),
    };

    for gt in &motion.frames {
        let truth = schedule.state_at(gt.t as f64 / motion.rate_hz)?;
        let measured = apply_measurement_model(gt, &truth, cfg.leakage, &cfg.gravity)?;
        let out = cal.step_with_reference(&measured, gt, &truth.sensors)?;
        if let Some(e) = &out.event {
            report.passes.push(e.frame);
        }

        let cal_yaw = ego_heading(&out.calibrated.sensors[cfg.root].orientation);
        let gt_yaw = ego_heading(&gt.sensors[cfg.root].orientation);
        for s in 0..sensors {
            let c = &out.calibrated.sensors[s];
            let g = &gt.sensors[s];
            let p = &cal.state().sensors[s];
            report.rows.push(MetricsRow {
                frame: gt.t,
                sensor: s,
                ome_deg: ome(&c.orientation, &cal_yaw, &g.orientation, &gt_yaw),
                ame_ms2: ame(&c.accel, &cal_yaw, &g.accel, &gt_yaw),
                rd: out.event.as_ref().map(|e| e.rd[s]),
                triggered: out.event.as_ref().is_some_and(|e| e.updated[s]),
                drift_angle_deg: p.drift.angle_deg(),
                offset_angle_deg: p.offset.angle_deg(),
            });
        }
    }
    Ok(report)
}
