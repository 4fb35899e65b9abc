//! The dynamic calibration loop: calibrate each incoming frame with the
//! current state, buffer raw frames, and at every timing signal with a full
//! buffer estimate corrections and apply them to sensors whose rotation
//! diversity clears their threshold.

pub mod metrics;
pub mod schedule;
pub mod simulation;

use std::collections::VecDeque;
use std::sync::Arc;

pub use metrics::{ame, compare_streams, ego_heading, ome, MetricsReport, MetricsRow, SensorSummary};
pub use schedule::{DriftSchedule, Param, Segment, Selector, Term};
pub use simulation::{run_simulation, SimulationConfig};

use crate::diversity::{rotation_diversity, should_update, TriggerConfig};
use crate::error::{Error, Result};
use crate::estimator::{EstimateInput, EstimateOut, Estimator, ReferenceWindow, Window};
use crate::sensor_model::{calibrate, CalibState, ImuFrame, SensorCalib};

#[derive(Debug, Clone, PartialEq)]
pub struct CalibratorConfig {
    /// Buffer length in frames.
    pub n: usize,
    /// Seconds between estimator runs.
    pub t_interval_s: f64,
    pub rate_hz: f64,
    pub trigger: TriggerConfig,
}

impl Default for CalibratorConfig {
    fn default() -> Self {
        CalibratorConfig {
            n: 256,
            t_interval_s: 1.0,
            rate_hz: 30.0,
            trigger: TriggerConfig::default(),
        }
    }
}

impl CalibratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config(format!("buffer length must be >= 2, got {}", self.n)));
        }
        if !(self.t_interval_s > 0.0 && self.t_interval_s.is_finite()) {
            return Err(Error::Config(format!("timing interval must be > 0, got {}", self.t_interval_s)));
        }
        if !(self.rate_hz > 0.0 && self.rate_hz.is_finite()) {
            return Err(Error::Config(format!("frame rate must be > 0, got {}", self.rate_hz)));
        }
        self.period_frames()?;
        Ok(())
    }

    /// Timing signal period in frames, `round(rate · t_interval)`.
    pub fn period_frames(&self) -> Result<u64> {
        let p = (self.rate_hz * self.t_interval_s).round();
        if p < 1.0 {
            return Err(Error::Config(format!(
                "timing interval {} s is shorter than one frame at {} Hz",
                self.t_interval_s, self.rate_hz
            )));
        }
        Ok(p as u64)
    }
}

/// One estimation pass.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateEvent {
    pub frame: u64,
    /// Rotation diversity of each sensor over the raw buffer.
    pub rd: Vec<usize>,
    /// Which sensors had their state changed.
    pub updated: Vec<bool>,
    pub estimate: Option<EstimateOut>,
    /// Estimator error, if the pass failed and the state was kept.
    pub error: Option<String>,
}

impl UpdateEvent {
    pub fn any_updated(&self) -> bool {
        self.updated.iter().any(|&u| u)
    }
}

#[derive(Debug, Clone)]
pub struct StepOutput {
    /// The frame calibrated with the state in effect when it arrived.
    pub calibrated: ImuFrame,
    pub event: Option<UpdateEvent>,
}

pub struct Calibrator {
    cfg: CalibratorConfig,
    period: u64,
    estimator: Arc<dyn Estimator>,
    state: CalibState,
    buffer: VecDeque<ImuFrame>,
    truth: VecDeque<ImuFrame>,
    truth_params: Vec<SensorCalib>,
    last_t: Option<u64>,
}

impl std::fmt::Debug for Calibrator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Calibrator")
            .field("cfg", &self.cfg)
            .field("estimator", &self.estimator.name())
            .field("buffered", &self.buffer.len())
            .field("last_t", &self.last_t)
            .finish()
    }
}

impl Calibrator {
    pub fn new(cfg: CalibratorConfig, estimator: Arc<dyn Estimator>, sensors: usize) -> Result<Self> {
        Self::with_state(cfg, estimator, CalibState::identity(sensors))
    }

    pub fn with_state(cfg: CalibratorConfig, estimator: Arc<dyn Estimator>, state: CalibState) -> Result<Self> {
        cfg.validate()?;
        if cfg.trigger.len() != state.len() {
            return Err(Error::LengthMismatch {
                field: "trigger thresholds",
                expected: state.len(),
                actual: cfg.trigger.len(),
            });
        }
        Ok(Calibrator {
            period: cfg.period_frames()?,
            buffer: VecDeque::with_capacity(cfg.n),
            truth: VecDeque::with_capacity(cfg.n),
            cfg,
            estimator,
            state,
            truth_params: Vec::new(),
            last_t: None,
        })
    }

    pub fn state(&self) -> &CalibState {
        &self.state
    }

    pub fn config(&self) -> &CalibratorConfig {
        &self.cfg
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    pub fn estimator_name(&self) -> &str {
        self.estimator.name()
    }

    pub fn step(&mut self, frame: &ImuFrame) -> Result<StepOutput> {
        self.step_inner(frame, None)
    }

    /// Like [`step`](Self::step), also buffering the ground truth for
    /// estimators that need a reference (oracle, Procrustes). `params` are
    /// the true drift and offset at this frame.
    pub fn step_with_reference(&mut self, frame: &ImuFrame, truth: &ImuFrame, params: &[SensorCalib]) -> Result<StepOutput> {
        if truth.len() != frame.len() || params.len() != frame.len() {
            return Err(Error::LengthMismatch {
                field: "reference sensors",
                expected: frame.len(),
                actual: truth.len().min(params.len()),
            });
        }
        self.step_inner(frame, Some((truth, params)))
    }

    fn step_inner(&mut self, frame: &ImuFrame, reference: Option<(&ImuFrame, &[SensorCalib])>) -> Result<StepOutput> {
        if let Some(last) = self.last_t {
            if frame.t <= last {
                return Err(Error::OutOfOrder { last, got: frame.t });
            }
        }
        frame.validate()?;
        let calibrated = calibrate(frame, &self.state)?;
        self.last_t = Some(frame.t);

        if self.buffer.len() == self.cfg.n {
            self.buffer.pop_front();
            self.truth.pop_front();
        }
        self.buffer.push_back(frame.clone());
        match reference {
            Some((truth, params)) => {
                self.truth.push_back(truth.clone());
                self.truth_params = params.to_vec();
            }
            None => self.truth.clear(),
        }

        let event = if self.buffer.len() == self.cfg.n && frame.t % self.period == 0 {
            Some(self.run_pass(frame.t)?)
        } else {
            None
        };
        Ok(StepOutput { calibrated, event })
    }

    fn run_pass(&mut self, t: u64) -> Result<UpdateEvent> {
        let raw = Window::new(self.buffer.drain(..).collect())?;
        let truth: Vec<ImuFrame> = self.truth.drain(..).collect();
        let sensors = raw.sensors();

        let rd = (0..sensors)
            .map(|s| rotation_diversity(raw.orientations(s)))
            .collect::<Result<Vec<_>>>()?;

        let removed = Window::new(
            raw.frames()
                .iter()
                .map(|f| calibrate(f, &self.state))
                .collect::<Result<_>>()?,
        )?;
        let reference = if truth.len() == removed.len() {
            Some(ReferenceWindow {
                truth: Window::new(truth)?,
                params: self.truth_params.clone(),
            })
        } else {
            None
        };
        let mut input = EstimateInput::new(&removed).with_state(&self.state);
        if let Some(r) = &reference {
            input = input.with_reference(r);
        }

        let mut event = UpdateEvent {
            frame: t,
            rd,
            updated: vec![false; sensors],
            estimate: None,
            error: None,
        };
        let result = self.estimator.estimate(&input).and_then(|out| {
            if out.sensors.len() != sensors {
                return Err(Error::LengthMismatch {
                    field: "estimator output sensors",
                    expected: sensors,
                    actual: out.sensors.len(),
                });
            }
            Ok(out)
        });
        match result {
            Ok(out) => {
                for s in 0..sensors {
                    if should_update(event.rd[s], s, &self.cfg.trigger)? {
                        crate::estimator::apply_delta(&mut self.state.sensors[s], &out.sensors[s]);
                        event.updated[s] = true;
                    }
                }
                if event.any_updated() {
                    self.state.last_trigger_frame = Some(t);
                }
                event.estimate = Some(out);
            }
            Err(e) => {
                log::warn!("estimator {} failed at frame {t}: {e}; keeping state", self.estimator.name());
                event.error = Some(e.to_string());
            }
        }
        Ok(event)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::{OracleEstimator, SensorEstimate};
    use crate::rotmath::{geodesic_deg, Rotation};
    use crate::sensor_model::{apply_measurement_model, GravitySpec};
    use crate::synth::{gen_motion, MotionSpec};

    /// Always proposes the same correction.
    struct Fixed(Rotation);

    impl Estimator for Fixed {
        fn name(&self) -> &str {
            "fixed"
        }
        fn estimate(&self, input: &EstimateInput<'_>) -> Result<EstimateOut> {
            Ok(EstimateOut {
                sensors: vec![
                    SensorEstimate {
                        delta_drift: self.0,
                        delta_offset: self.0,
                        ..SensorEstimate::identity()
                    };
                    input.window.sensors()
                ],
                iterations: 0,
            })
        }
    }

    struct Failing;

    impl Estimator for Failing {
        fn name(&self) -> &str {
            "failing"
        }
        fn estimate(&self, _: &EstimateInput<'_>) -> Result<EstimateOut> {
            Err(Error::NumericalFailure("test".into()))
        }
    }

    fn small_cfg() -> CalibratorConfig {
        CalibratorConfig {
            n: 32,
            ..CalibratorConfig::default()
        }
    }

    #[test]
    fn zero_drift_with_oracle_is_passthrough() {
        let m = gen_motion(&MotionSpec::active(300), 3).unwrap();
        let mut c = Calibrator::new(small_cfg(), Arc::new(OracleEstimator), 6).unwrap();
        let params = vec![SensorCalib::default(); 6];
        let mut events = 0;
        for f in &m.frames {
            let out = c.step_with_reference(f, f, &params).unwrap();
            assert_eq!(&out.calibrated, f);
            events += out.event.is_some() as usize;
        }
        assert!(events > 0);
        for p in &c.state().sensors {
            assert_eq!(p.drift, Rotation::identity());
            assert_eq!(p.offset, Rotation::identity());
        }
    }

    #[test]
    fn static_pose_never_updates() {
        let m = gen_motion(&MotionSpec::still(400), 1).unwrap();
        let mut c = Calibrator::new(small_cfg(), Arc::new(Fixed(Rotation::rx(30.0))), 6).unwrap();
        let mut events = 0;
        for f in &m.frames {
            if let Some(e) = c.step(f).unwrap().event {
                events += 1;
                assert!(e.rd.iter().all(|&r| r == 1));
                assert!(!e.any_updated());
            }
        }
        assert!(events > 0);
        assert_eq!(c.state(), &CalibState::identity(6));
    }

    #[test]
    fn timing_and_buffer_discipline() {
        let m = gen_motion(&MotionSpec::active(200), 2).unwrap();
        let mut c = Calibrator::new(small_cfg(), Arc::new(Fixed(Rotation::identity())), 6).unwrap();
        let mut passes = Vec::new();
        for f in &m.frames {
            let before = c.buffered();
            let out = c.step(f).unwrap();
            match out.event {
                Some(e) => {
                    assert!(before >= 31);
                    assert_eq!(f.t % 30, 0);
                    assert_eq!(c.buffered(), 0);
                    passes.push(e.frame);
                }
                None => assert_eq!(c.buffered(), (before + 1).min(32)),
            }
        }
        // Buffer fills at frame 31; first signal with a full buffer is 60, then
        // every 32+ frames rounded up to the next multiple of 30.
        assert_eq!(passes, vec![60, 120, 180]);
    }

    #[test]
    fn out_of_order_is_rejected() {
        let m = gen_motion(&MotionSpec::active(3), 2).unwrap();
        let mut c = Calibrator::new(small_cfg(), Arc::new(OracleEstimator), 6).unwrap();
        c.step(&m.frames[1]).unwrap();
        assert!(matches!(c.step(&m.frames[0]), Err(Error::OutOfOrder { last: 1, got: 0 })));
        assert!(matches!(c.step(&m.frames[1]), Err(Error::OutOfOrder { .. })));
    }

    #[test]
    fn estimator_failure_keeps_state_and_clears_buffer() {
        let m = gen_motion(&MotionSpec::active(100), 2).unwrap();
        let mut c = Calibrator::new(small_cfg(), Arc::new(Failing), 6).unwrap();
        let mut failed = 0;
        for f in &m.frames {
            if let Some(e) = c.step(f).unwrap().event {
                assert!(e.error.is_some() && !e.any_updated());
                assert_eq!(c.buffered(), 0);
                failed += 1;
            }
        }
        assert!(failed > 0);
        assert_eq!(c.state(), &CalibState::identity(6));
    }

    #[test]
    fn oracle_without_reference_fails_softly() {
        let m = gen_motion(&MotionSpec::active(100), 2).unwrap();
        let mut c = Calibrator::new(small_cfg(), Arc::new(OracleEstimator), 6).unwrap();
        let errs: Vec<_> = m.frames.iter().filter_map(|f| c.step(f).unwrap().event).collect();
        assert!(!errs.is_empty() && errs.iter().all(|e| e.error.is_some()));
    }

    #[test]
    fn gated_sensors_match_truth_after_update() {
        let m = gen_motion(&MotionSpec::active(200), 4).unwrap();
        let truth = CalibState::from_params(
            (0..6)
                .map(|s| SensorCalib::new(Rotation::ry(10.0 + s as f64), Rotation::rx(5.0 * s as f64)))
                .collect(),
        );
        let mut c = Calibrator::new(small_cfg(), Arc::new(OracleEstimator), 6).unwrap();
        for f in &m.frames {
            let meas = apply_measurement_model(f, &truth, false, &GravitySpec::default()).unwrap();
            if let Some(e) = c.step_with_reference(&meas, f, &truth.sensors).unwrap().event {
                let fixed = calibrate(&meas, c.state()).unwrap();
                for s in 0..6 {
                    let err = geodesic_deg(&fixed.sensors[s].orientation, &f.sensors[s].orientation);
                    if e.updated[s] {
                        assert!(err < 1e-9, "sensor {s}: {err}");
                    }
                    assert_eq!(e.updated[s], e.rd[s] > c.config().trigger.thresholds[s]);
                }
            }
        }
    }

    #[test]
    fn config_validation() {
        let bad = CalibratorConfig { n: 1, ..CalibratorConfig::default() };
        assert!(bad.validate().is_err());
        let bad = CalibratorConfig { t_interval_s: 0.0, ..CalibratorConfig::default() };
        assert!(bad.validate().is_err());
        assert_eq!(CalibratorConfig::default().period_frames().unwrap(), 30);
        assert!(Calibrator::new(CalibratorConfig::default(), Arc::new(OracleEstimator), 4).is_err());
    }
}
