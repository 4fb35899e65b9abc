//! Window → (Δdrift, Δoffset) estimators.
//!
//! Every estimator sees a window from which the currently known drift and
//! offset have already been removed, and returns the residual corrections.
//! The calibration loop applies them as `drift ← drift·Δdrift` and
//! `offset ← Δoffset·offset`.

pub mod oracle;
pub mod procrustes;
pub mod tic;

use crate::error::{Error, Result};
use crate::rotmath::Rotation;
use crate::sensor_model::{CalibState, ImuFrame, SensorCalib, SensorReading};

pub use oracle::OracleEstimator;
pub use procrustes::{ProcrustesConfig, ProcrustesEstimator};
pub use tic::{TicEstimator, WeightBundle};

/// `n` consecutive frames of `S` sensors.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    frames: Vec<ImuFrame>,
}

impl Window {
    pub fn new(frames: Vec<ImuFrame>) -> Result<Self> {
        if frames.len() < 2 {
            return Err(Error::Config(format!("window needs at least 2 frames, got {}", frames.len())));
        }
        let s = frames[0].len();
        if s == 0 {
            return Err(Error::Config("window frames have no sensors".into()));
        }
        if let Some(bad) = frames.iter().find(|f| f.len() != s) {
            return Err(Error::LengthMismatch {
                field: "sensors per frame",
                expected: s,
                actual: bad.len(),
            });
        }
        Ok(Window { frames })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn sensors(&self) -> usize {
        self.frames[0].len()
    }

    pub fn frames(&self) -> &[ImuFrame] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<ImuFrame> {
        self.frames
    }

    pub fn reading(&self, frame: usize, sensor: usize) -> &SensorReading {
        &self.frames[frame].sensors[sensor]
    }

    /// Orientations of one sensor across the window.
    pub fn orientations(&self, sensor: usize) -> impl Iterator<Item = &Rotation> + '_ {
        self.frames.iter().map(move |f| &f.sensors[sensor].orientation)
    }

    pub fn readings(&self, sensor: usize) -> impl Iterator<Item = &SensorReading> + '_ {
        self.frames.iter().map(move |f| &f.sensors[sensor])
    }
}

/// Ground truth aligned with a measured window.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceWindow {
    /// Bone orientations and global accelerations.
    pub truth: Window,
    /// True drift and offset per sensor at the last frame of the window.
    pub params: Vec<SensorCalib>,
}

/// Everything an estimator may look at for one pass.
#[derive(Debug, Clone, Copy)]
pub struct EstimateInput<'a> {
    /// Measured window with the known drift and offset removed.
    pub window: &'a Window,
    /// Calibration state that was removed from `window`.
    pub state: Option<&'a CalibState>,
    pub reference: Option<&'a ReferenceWindow>,
}

impl<'a> EstimateInput<'a> {
    pub fn new(window: &'a Window) -> Self {
        EstimateInput {
            window,
            state: None,
            reference: None,
        }
    }

    pub fn with_state(mut self, state: &'a CalibState) -> Self {
        self.state = Some(state);
        self
    }

    pub fn with_reference(mut self, reference: &'a ReferenceWindow) -> Self {
        self.reference = Some(reference);
        self
    }

    pub(crate) fn require_reference(&self) -> Result<&'a ReferenceWindow> {
        let r = self.reference.ok_or(Error::MissingReference)?;
        if r.truth.len() != self.window.len() {
            return Err(Error::LengthMismatch {
                field: "reference frames",
                expected: self.window.len(),
                actual: r.truth.len(),
            });
        }
        if r.truth.sensors() != self.window.sensors() || r.params.len() != self.window.sensors() {
            return Err(Error::LengthMismatch {
                field: "reference sensors",
                expected: self.window.sensors(),
                actual: r.params.len().min(r.truth.sensors()),
            });
        }
        Ok(r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateFlag {
    /// The window does not pin the solution down (rotation diversity 1).
    Degenerate,
    /// The iteration limit was hit; the best iterate is returned.
    NotConverged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorEstimate {
    pub delta_drift: Rotation,
    pub delta_offset: Rotation,
    /// RMS Frobenius residual of the fit, if the estimator has one.
    pub residual: f64,
    pub flags: Vec<EstimateFlag>,
}

impl SensorEstimate {
    pub fn identity() -> Self {
        SensorEstimate {
            delta_drift: Rotation::identity(),
            delta_offset: Rotation::identity(),
            residual: 0.0,
            flags: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateOut {
    pub sensors: Vec<SensorEstimate>,
    /// Iterations used (largest over sensors); 0 for closed-form estimators.
    pub iterations: usize,
}

impl EstimateOut {
    /// Applies the corrections in calibration-loop order.
    pub fn apply_to(&self, state: &mut CalibState) {
        for (p, e) in state.sensors.iter_mut().zip(&self.sensors) {
            apply_delta(p, e);
        }
    }
}

/// Applies one correction. The products are re-projected onto SO(3);
/// without that, rounding grows geometrically over repeated updates.
pub fn apply_delta(params: &mut SensorCalib, e: &SensorEstimate) {
    params.drift = (params.drift * e.delta_drift).renormalized();
    params.offset = (e.delta_offset * params.offset).renormalized();
}

/// A window → correction estimator. Implementations are immutable and
/// deterministic for fixed inputs.
pub trait Estimator: Send + Sync {
    fn name(&self) -> &str;

    fn estimate(&self, input: &EstimateInput<'_>) -> Result<EstimateOut>;
}
