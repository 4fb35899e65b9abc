//! Dynamic on-body IMU calibration for sparse inertial motion capture.
//!
//! - [`rotmath`]: rotations, Euler angles, 6D representation, heading split
//! - [`sensor_model`]: drift/offset measurement model and its inverse
//! - [`synth`]: synthetic motion, parameter sampling, dataset files
//! - [`diversity`]: rotation-diversity trigger
//! - [`estimator`]: oracle, alternating Procrustes and transformer estimators
//! - [`calibrator`]: the calibration loop, metrics and simulation harness

pub mod calibrator;
pub mod diversity;
pub mod error;
pub mod estimator;
pub mod rotmath;
pub mod sensor_model;
pub mod synth;

pub use calibrator::{Calibrator, CalibratorConfig, DriftSchedule, MetricsReport, StepOutput, UpdateEvent};
pub use diversity::{rotation_diversity, should_update, TriggerConfig};
pub use error::{Error, Result};
pub use estimator::{
    EstimateInput, EstimateOut, Estimator, OracleEstimator, ProcrustesConfig, ProcrustesEstimator, SensorEstimate,
    TicEstimator, WeightBundle, Window,
};
pub use rotmath::{EulerXYZ, Rot6D, Rotation};
pub use sensor_model::{CalibState, GravitySpec, ImuFrame, SensorCalib, SensorReading};
pub use synth::{MotionSequence, MotionSpec};
