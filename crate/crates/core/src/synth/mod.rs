//! Synthetic training and evaluation data.
//!
//! A training sample is a window of ground-truth motion pushed through the
//! measurement model with one randomly drawn (drift, offset) pair per sensor,
//! held constant over the window.

pub mod dataset;
pub mod motion;
pub mod motion_io;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::estimator::Window;
use crate::rotmath::{mat_from_euler, rot6d_from_mat, EulerXYZ, Rot6D, Rotation};
use crate::sensor_model::{measure_reading, GravitySpec, ImuFrame, SensorCalib};

pub use dataset::{read_dataset, write_dataset, Dataset, DatasetRecord};
pub use motion::{gen_motion, MotionSequence, MotionSpec};
pub use motion_io::{load_motion, parse_motion, write_motion};

/// Closed interval in degrees.
pub type Bounds = (f64, f64);

/// Per-axis uniform sampling ranges for drift and offset Euler angles.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamDistribution {
    pub offset: [Bounds; 3],
    /// Root drift; its y (heading) range is forced to zero when sampling.
    pub drift_root: [Bounds; 3],
    pub drift_non_root: [Bounds; 3],
}

impl Default for ParamDistribution {
    fn default() -> Self {
        ParamDistribution {
            offset: [(-45.0, 45.0); 3],
            drift_root: [(-20.0, 20.0), (0.0, 0.0), (-20.0, 20.0)],
            drift_non_root: [(-20.0, 20.0), (-60.0, 60.0), (-20.0, 20.0)],
        }
    }
}

impl ParamDistribution {
    /// Everything fixed at zero: samples are identity.
    pub fn zero() -> Self {
        ParamDistribution {
            offset: [(0.0, 0.0); 3],
            drift_root: [(0.0, 0.0); 3],
            drift_non_root: [(0.0, 0.0); 3],
        }
    }

    /// Symmetric bounds: offset ±`offset` on every axis, drift tilt ±`tilt`
    /// and non-root heading ±`heading`.
    pub fn symmetric(offset: f64, tilt: f64, heading: f64) -> Self {
        ParamDistribution {
            offset: [(-offset, offset); 3],
            drift_root: [(-tilt, tilt), (0.0, 0.0), (-tilt, tilt)],
            drift_non_root: [(-tilt, tilt), (-heading, heading), (-tilt, tilt)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |b: &Bounds| b.0.is_finite() && b.1.is_finite() && b.0 <= b.1;
        let all = self.offset.iter().chain(&self.drift_root).chain(&self.drift_non_root);
        if all.clone().all(ok) {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid sampling bounds: {self:?}")))
        }
    }
}

fn draw(rng: &mut impl Rng, b: Bounds) -> f64 {
    if b.0 == b.1 {
        b.0
    } else {
        rng.gen_range(b.0..=b.1)
    }
}

fn draw_euler(rng: &mut impl Rng, b: &[Bounds; 3]) -> EulerXYZ {
    EulerXYZ::new(draw(rng, b[0]), draw(rng, b[1]), draw(rng, b[2]))
}

/// Draws the Euler angles of one (drift, offset) pair.
pub fn sample_euler(dist: &ParamDistribution, is_root: bool, rng: &mut impl Rng) -> (EulerXYZ, EulerXYZ) {
    let drift = if is_root {
        let mut e = draw_euler(rng, &dist.drift_root);
        e.y = 0.0;
        e
    } else {
        draw_euler(rng, &dist.drift_non_root)
    };
    let offset = draw_euler(rng, &dist.offset);
    (drift, offset)
}

/// Draws one (drift, offset) pair.
pub fn sample_params(dist: &ParamDistribution, is_root: bool, rng: &mut impl Rng) -> SensorCalib {
    let (d, o) = sample_euler(dist, is_root, rng);
    SensorCalib::new(mat_from_euler(d), mat_from_euler(o))
}

/// [`sample_params`] with a generator seeded from `seed`.
pub fn sample_params_seeded(dist: &ParamDistribution, is_root: bool, seed: u64) -> SensorCalib {
    sample_params(dist, is_root, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// SplitMix64 finalizer; used to derive independent per-item seeds.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    /// Measured frames.
    pub window: Window,
    pub drift: Vec<Rot6D>,
    pub offset: Vec<Rot6D>,
}

impl TrainingSample {
    /// Decodes the labels.
    pub fn params(&self) -> Result<Vec<SensorCalib>> {
        self.drift
            .iter()
            .zip(&self.offset)
            .map(|(d, o)| Ok(SensorCalib::new(d.to_rotation()?, o.to_rotation()?)))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct SampleConfig {
    pub n: usize,
    pub root: usize,
    pub leakage: bool,
    pub gravity: GravitySpec,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            n: 256,
            root: crate::sensor_model::DEFAULT_ROOT,
            leakage: true,
            gravity: GravitySpec::default(),
        }
    }
}

/// Cuts `motion[start..start + n]` and applies one random (drift, offset) per sensor.
pub fn make_sample(
    motion: &MotionSequence,
    start: usize,
    dist: &ParamDistribution,
    seed: u64,
    cfg: &SampleConfig,
) -> Result<TrainingSample> {
    dist.validate()?;
    let truth = motion.window(start, cfg.n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params: Vec<SensorCalib> = (0..truth.sensors())
        .map(|s| sample_params(dist, s == cfg.root, &mut rng))
        .collect();
    let frames = truth
        .frames()
        .iter()
        .map(|f| {
            let sensors = f
                .sensors
                .iter()
                .zip(&params)
                .map(|(r, p)| measure_reading(r, p, cfg.leakage, &cfg.gravity))
                .collect();
            ImuFrame::new(f.t, sensors)
        })
        .collect();
    Ok(TrainingSample {
        window: Window::new(frames)?,
        drift: params.iter().map(|p| rot6d_from_mat(&p.drift)).collect(),
        offset: params.iter().map(|p| rot6d_from_mat(&p.offset)).collect(),
    })
}

/// Identity rotation helper for label defaults.
pub fn identity_label() -> Rot6D {
    rot6d_from_mat(&Rotation::identity())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rotmath::euler_from_mat;
    use crate::sensor_model::calibrate_reading;

    #[test]
    fn zero_bounds_give_identity() {
        let p = sample_params_seeded(&ParamDistribution::zero(), false, 5);
        assert_eq!(p, SensorCalib::default());
        let p = sample_params_seeded(&ParamDistribution::zero(), true, 5);
        assert_eq!(p, SensorCalib::default());
    }

    #[test]
    fn root_drift_has_no_heading() {
        let dist = ParamDistribution {
            drift_root: [(-20.0, 20.0), (-60.0, 60.0), (-20.0, 20.0)],
            ..ParamDistribution::default()
        };
        for seed in 0..500 {
            let p = sample_params_seeded(&dist, true, seed);
            assert!(euler_from_mat(&p.drift).y.abs() < 1e-9);
        }
    }

    #[test]
    fn make_sample_with_zero_bounds_equals_truth() {
        let m = gen_motion(&MotionSpec::active(300), 1).unwrap();
        let cfg = SampleConfig::default();
        let s = make_sample(&m, 10, &ParamDistribution::zero(), 3, &cfg).unwrap();
        assert_eq!(s.window, m.window(10, 256).unwrap());
        assert!(s.drift.iter().chain(&s.offset).all(|l| *l == identity_label()));
    }

    #[test]
    fn labels_invert_the_window() {
        let m = gen_motion(&MotionSpec::active(300), 2).unwrap();
        let cfg = SampleConfig {
            leakage: false,
            ..SampleConfig::default()
        };
        let s = make_sample(&m, 20, &ParamDistribution::default(), 11, &cfg).unwrap();
        let params = s.params().unwrap();
        let truth = m.window(20, 256).unwrap();
        for (mf, tf) in s.window.frames().iter().zip(truth.frames()) {
            for ((r, t), p) in mf.sensors.iter().zip(&tf.sensors).zip(&params) {
                let c = calibrate_reading(r, p);
                assert!((c.orientation.matrix() - t.orientation.matrix()).norm() < 1e-9);
                assert!((c.accel - t.accel).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn make_sample_is_deterministic() {
        let m = gen_motion(&MotionSpec::active(300), 2).unwrap();
        let cfg = SampleConfig::default();
        let a = make_sample(&m, 0, &ParamDistribution::default(), 77, &cfg).unwrap();
        let b = make_sample(&m, 0, &ParamDistribution::default(), 77, &cfg).unwrap();
        assert_eq!(a, b);
        let c = make_sample(&m, 0, &ParamDistribution::default(), 78, &cfg).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn make_sample_window_out_of_range() {
        let m = gen_motion(&MotionSpec::active(300), 2).unwrap();
        let err = make_sample(&m, 45, &ParamDistribution::default(), 1, &SampleConfig::default());
        assert!(matches!(err, Err(Error::WindowOutOfRange { .. })));
    }

    #[test]
    fn mix_seed_spreads() {
        assert_ne!(mix_seed(1, 0), mix_seed(1, 1));
        assert_ne!(mix_seed(0, 1), mix_seed(1, 0));
        assert_eq!(mix_seed(42, 7), mix_seed(42, 7));
    }
}
