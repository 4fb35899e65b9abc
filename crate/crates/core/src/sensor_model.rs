//! Forward measurement model (coordinate drift, mounting offset, gravity
//! leakage) and its inverse.
//!
//! A sensor reading is `R_imu = D * R_gb * O` and `a_imu = D * a_g`, where `D`
//! is the coordinate drift of the sensor's global frame and `O` the mounting
//! offset between bone and sensor. When the accelerometer's gravity
//! compensation happens in the drifted frame, the reading additionally picks
//! up `(I - D) * g`.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::rotmath::{yaw_decompose, Rotation};

/// Standard gravity along -Y, m/s².
pub const STANDARD_GRAVITY: f64 = 9.80665;

/// Upper bound on a plausible acceleration magnitude, m/s².
pub const MAX_ACCEL: f64 = 200.0;

/// Default number of sensors.
pub const DEFAULT_SENSORS: usize = 6;

/// Index of the root (hip) sensor in the default layout.
pub const DEFAULT_ROOT: usize = 5;

/// Default sensor names, in layout order.
pub const SENSOR_NAMES: [&str; DEFAULT_SENSORS] = [
    "left forearm",
    "right forearm",
    "left lower leg",
    "right lower leg",
    "head",
    "hip",
];

pub fn sensor_name(index: usize) -> String {
    SENSOR_NAMES
        .get(index)
        .map(|s| s.to_string())
        .unwrap_or_else(|| format!("sensor {index}"))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GravitySpec {
    pub g: Vector3<f64>,
}

impl Default for GravitySpec {
    fn default() -> Self {
        GravitySpec {
            g: Vector3::new(0.0, -STANDARD_GRAVITY, 0.0),
        }
    }
}

/// One sensor's orientation and acceleration at one instant.
///
/// Depending on context these are ground truth (`R_gb`, `a_g`), raw
/// measurements (`R_imu`, `a_imu`), or calibrated output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorReading {
    pub orientation: Rotation,
    pub accel: Vector3<f64>,
}

impl SensorReading {
    pub fn new(orientation: Rotation, accel: Vector3<f64>) -> Self {
        SensorReading { orientation, accel }
    }
}

impl Default for SensorReading {
    fn default() -> Self {
        SensorReading::new(Rotation::identity(), Vector3::zeros())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImuFrame {
    /// Frame index.
    pub t: u64,
    pub sensors: Vec<SensorReading>,
}

impl ImuFrame {
    pub fn new(t: u64, sensors: Vec<SensorReading>) -> Self {
        ImuFrame { t, sensors }
    }

    pub fn len(&self) -> usize {
        self.sensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sensors.is_empty()
    }

    /// Checks accelerations are finite and within [`MAX_ACCEL`].
    pub fn validate(&self) -> Result<()> {
        for (s, r) in self.sensors.iter().enumerate() {
            if r.accel.iter().any(|a| !a.is_finite()) {
                return Err(Error::NonFinite(format!("accel of sensor {s} at t={}", self.t)));
            }
            if r.accel.norm() >= MAX_ACCEL {
                return Err(Error::Config(format!(
                    "acceleration {:.1} m/s² of sensor {s} at t={} exceeds {MAX_ACCEL}",
                    r.accel.norm(),
                    self.t
                )));
            }
        }
        Ok(())
    }
}

/// Drift and offset of one sensor.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SensorCalib {
    /// `R_G'G`.
    pub drift: Rotation,
    /// `R_BS`.
    pub offset: Rotation,
}

impl SensorCalib {
    pub fn new(drift: Rotation, offset: Rotation) -> Self {
        SensorCalib { drift, offset }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibState {
    pub sensors: Vec<SensorCalib>,
    /// Frame at which the most recent update was applied.
    pub last_trigger_frame: Option<u64>,
}

impl CalibState {
    pub fn identity(sensors: usize) -> Self {
        CalibState {
            sensors: vec![SensorCalib::default(); sensors],
            last_trigger_frame: None,
        }
    }

    pub fn from_params(sensors: Vec<SensorCalib>) -> Self {
        CalibState {
            sensors,
            last_trigger_frame: None,
        }
    }

    pub fn len(&self) -> usize {
        self.sensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sensors.is_empty()
    }
}

fn check_sensor_count(frame: &ImuFrame, state: &CalibState) -> Result<()> {
    if frame.len() != state.len() {
        return Err(Error::LengthMismatch {
            field: "sensors",
            expected: state.len(),
            actual: frame.len(),
        });
    }
    Ok(())
}

/// Applies drift, offset and (optionally) gravity leakage to a ground-truth frame.
pub fn apply_measurement_model(
    gt: &ImuFrame,
    state: &CalibState,
    leakage: bool,
    gravity: &GravitySpec,
) -> Result<ImuFrame> {
    check_sensor_count(gt, state)?;
    let sensors = gt
        .sensors
        .iter()
        .zip(&state.sensors)
        .map(|(r, p)| measure_reading(r, p, leakage, gravity))
        .collect();
    Ok(ImuFrame::new(gt.t, sensors))
}

pub fn measure_reading(
    gt: &SensorReading,
    params: &SensorCalib,
    leakage: bool,
    gravity: &GravitySpec,
) -> SensorReading {
    let orientation = params.drift * gt.orientation * params.offset;
    let mut accel = params.drift * gt.accel;
    if leakage {
        accel += leakage_term(&params.drift, gravity);
    }
    SensorReading { orientation, accel }
}

/// Gravity that survives compensation in a drifted frame: `(I - D) * g`.
pub fn leakage_term(drift: &Rotation, gravity: &GravitySpec) -> Vector3<f64> {
    (Matrix3::identity() - drift.matrix()) * gravity.g
}

/// Removes drift and offset: `Dᵀ * R_imu * Oᵀ`, `Dᵀ * a_imu`.
pub fn calibrate(frame: &ImuFrame, state: &CalibState) -> Result<ImuFrame> {
    check_sensor_count(frame, state)?;
    let sensors = frame
        .sensors
        .iter()
        .zip(&state.sensors)
        .map(|(r, p)| calibrate_reading(r, p))
        .collect();
    Ok(ImuFrame::new(frame.t, sensors))
}

pub fn calibrate_reading(r: &SensorReading, params: &SensorCalib) -> SensorReading {
    let drift_t = params.drift.transpose();
    SensorReading {
        orientation: drift_t * r.orientation * params.offset.transpose(),
        accel: drift_t * r.accel,
    }
}

/// Recovers `(drift, offset)` from the sensor's own reading `r_imu`, its
/// absolute orientation `r_gs` and the bone orientation `r_gb`.
pub fn extract_gt_params(r_imu: &Rotation, r_gs: &Rotation, r_gb: &Rotation) -> SensorCalib {
    SensorCalib {
        drift: *r_imu * r_gs.transpose(),
        offset: r_gb.transpose() * *r_gs,
    }
}

#[derive(Debug, Clone)]
pub struct EgoYawFrame {
    pub frame: ImuFrame,
    /// Heading removed from every sensor; identity when indeterminate.
    pub root_yaw: Rotation,
    /// The root heading could not be determined; the frame is unchanged.
    pub yaw_indeterminate: bool,
}

/// Re-expresses a frame in the coordinate system whose heading follows the root sensor.
pub fn to_ego_yaw(frame: &ImuFrame, root: usize) -> Result<EgoYawFrame> {
    let root_reading = frame.sensors.get(root).ok_or(Error::SensorOutOfRange {
        index: root,
        sensors: frame.len(),
    })?;
    let split = yaw_decompose(&root_reading.orientation);
    if split.is_indeterminate() {
        return Ok(EgoYawFrame {
            frame: frame.clone(),
            root_yaw: Rotation::identity(),
            yaw_indeterminate: true,
        });
    }
    let inv = split.yaw.transpose();
    let sensors = frame
        .sensors
        .iter()
        .map(|r| SensorReading {
            orientation: inv * r.orientation,
            accel: inv * r.accel,
        })
        .collect();
    Ok(EgoYawFrame {
        frame: ImuFrame::new(frame.t, sensors),
        root_yaw: split.yaw,
        yaw_indeterminate: false,
    })
}
