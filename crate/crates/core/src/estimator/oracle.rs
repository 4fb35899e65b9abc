//! Exact corrections from ground truth, for validating the calibration loop.

use super::{EstimateInput, EstimateOut, Estimator, SensorEstimate};
use crate::error::{Error, Result};
use crate::sensor_model::{CalibState, SensorCalib};

/// Returns the corrections that make the current state equal the true
/// parameters at the end of the window.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleEstimator;

/// `Δdrift = driftᵀ·drift_true`, `Δoffset = offset_true·offsetᵀ`.
pub fn oracle_delta(current: &SensorCalib, truth: &SensorCalib) -> SensorEstimate {
    SensorEstimate {
        delta_drift: current.drift.transpose() * truth.drift,
        delta_offset: truth.offset * current.offset.transpose(),
        ..SensorEstimate::identity()
    }
}

impl Estimator for OracleEstimator {
    fn name(&self) -> &str {
        "oracle"
    }

    fn estimate(&self, input: &EstimateInput<'_>) -> Result<EstimateOut> {
        let reference = input.require_reference()?;
        let sensors = input.window.sensors();
        let identity;
        let state = match input.state {
            Some(s) => s,
            None => {
                identity = CalibState::identity(sensors);
                &identity
            }
        };
        if state.len() != sensors {
            return Err(Error::LengthMismatch {
                field: "state sensors",
                expected: sensors,
                actual: state.len(),
            });
        }
        Ok(EstimateOut {
            sensors: state
                .sensors
                .iter()
                .zip(&reference.params)
                .map(|(cur, truth)| oracle_delta(cur, truth))
                .collect(),
            iterations: 0,
        })
    }
}
