//! Parametric ground-truth motion: smooth limb rotations around a slowly
//! turning body heading, with accelerations obtained by double-differencing
//! limb endpoint positions.

use std::f64::consts::TAU;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::estimator::Window;
use crate::rotmath::Rotation;
use crate::sensor_model::{ImuFrame, SensorReading, DEFAULT_ROOT};

/// A ground-truth track: bone orientations `R_gb` and global accelerations `a_g`.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionSequence {
    pub frames: Vec<ImuFrame>,
    pub rate_hz: f64,
}

impl MotionSequence {
    pub fn new(frames: Vec<ImuFrame>, rate_hz: f64) -> Result<Self> {
        if !(rate_hz > 0.0) {
            return Err(Error::Config(format!("rate must be positive, got {rate_hz}")));
        }
        if let Some(first) = frames.first() {
            let s = first.len();
            if let Some(bad) = frames.iter().find(|f| f.len() != s) {
                return Err(Error::LengthMismatch {
                    field: "sensors per frame",
                    expected: s,
                    actual: bad.len(),
                });
            }
        }
        Ok(MotionSequence { frames, rate_hz })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn sensors(&self) -> usize {
        self.frames.first().map_or(0, ImuFrame::len)
    }

    pub fn duration_s(&self) -> f64 {
        self.frames.len() as f64 / self.rate_hz
    }

    pub fn window(&self, start: usize, n: usize) -> Result<Window> {
        let end = start.checked_add(n).ok_or(Error::WindowOutOfRange {
            start,
            end: usize::MAX,
            len: self.len(),
        })?;
        if end > self.len() {
            return Err(Error::WindowOutOfRange {
                start,
                end,
                len: self.len(),
            });
        }
        Window::new(self.frames[start..end].to_vec())
    }
}

/// Generator parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionSpec {
    pub frames: usize,
    pub rate_hz: f64,
    /// Peak rotation amplitude per sensor, degrees. Its length sets the sensor count.
    pub amplitude_deg: Vec<f64>,
    /// Amplitude of the oscillating part of the shared heading, degrees.
    pub heading_amplitude_deg: f64,
    /// Steady turning rate of the shared heading, deg/s.
    pub turn_rate_deg_s: f64,
    /// Range of component frequencies, Hz.
    pub freq_hz: (f64, f64),
    /// Index of the root sensor; its track carries the body heading.
    pub root: usize,
}

impl MotionSpec {
    /// Vigorous whole-body motion: limbs swing up to ±60°.
    pub fn active(frames: usize) -> Self {
        MotionSpec {
            frames,
            rate_hz: 30.0,
            amplitude_deg: vec![60.0, 60.0, 60.0, 60.0, 30.0, 20.0],
            heading_amplitude_deg: 45.0,
            turn_rate_deg_s: 4.0,
            freq_hz: (0.15, 0.8),
            root: DEFAULT_ROOT,
        }
    }

    /// A held pose: every orientation constant.
    pub fn still(frames: usize) -> Self {
        MotionSpec::active(frames).scaled(0.0)
    }

    /// Scales every amplitude (limbs and heading) by `factor`.
    pub fn scaled(mut self, factor: f64) -> Self {
        self.amplitude_deg.iter_mut().for_each(|a| *a *= factor);
        self.heading_amplitude_deg *= factor;
        self.turn_rate_deg_s *= factor;
        self
    }

    pub fn sensors(&self) -> usize {
        self.amplitude_deg.len()
    }
}

struct Component {
    axis: Vector3<f64>,
    amp_rad: f64,
    omega: f64,
    phase: f64,
}

struct SensorTrack {
    components: Vec<Component>,
    /// Where the limb attaches, in the heading frame (m).
    mount: Vector3<f64>,
    /// Limb vector from the attachment to the sensor, in the bone frame (m).
    bone: Vector3<f64>,
}

struct Body {
    tracks: Vec<SensorTrack>,
    heading_amp_rad: f64,
    heading_omega: f64,
    heading_phase: f64,
    turn_rate_rad: f64,
    sway_amp: f64,
    sway_phase: [f64; 3],
}

fn random_unit(rng: &mut impl Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

fn limb_geometry(sensor: usize, root: usize) -> (Vector3<f64>, Vector3<f64>) {
    if sensor == root {
        return (Vector3::zeros(), Vector3::new(0.0, 0.0, 0.1));
    }
    match sensor {
        0 => (Vector3::new(0.2, 0.45, 0.0), Vector3::new(0.0, -0.5, 0.0)),
        1 => (Vector3::new(-0.2, 0.45, 0.0), Vector3::new(0.0, -0.5, 0.0)),
        2 => (Vector3::new(0.1, -0.05, 0.0), Vector3::new(0.0, -0.8, 0.0)),
        3 => (Vector3::new(-0.1, -0.05, 0.0), Vector3::new(0.0, -0.8, 0.0)),
        4 => (Vector3::new(0.0, 0.55, 0.0), Vector3::new(0.0, 0.12, 0.0)),
        _ => (Vector3::new(0.0, 0.3, 0.0), Vector3::new(0.0, -0.3, 0.0)),
    }
}

impl Body {
    fn new(spec: &MotionSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (f_lo, f_hi) = spec.freq_hz;
        let tracks = spec
            .amplitude_deg
            .iter()
            .enumerate()
            .map(|(s, &amp)| {
                let count = rng.gen_range(2..=5usize);
                let scale = 1.0 / (count as f64).sqrt();
                let components = (0..count)
                    .map(|_| Component {
                        axis: random_unit(&mut rng),
                        amp_rad: amp.to_radians() * rng.gen_range(0.6..=1.0) * scale * 1.5,
                        omega: TAU * rng.gen_range(f_lo..=f_hi),
                        phase: rng.gen_range(0.0..TAU),
                    })
                    .collect();
                let (mount, bone) = limb_geometry(s, spec.root);
                SensorTrack {
                    components,
                    mount,
                    bone,
                }
            })
            .collect();
        let motion_scale = spec.amplitude_deg.iter().cloned().fold(0.0, f64::max) / 60.0;
        Body {
            tracks,
            heading_amp_rad: spec.heading_amplitude_deg.to_radians(),
            heading_omega: TAU * rng.gen_range(0.02..0.06),
            heading_phase: rng.gen_range(0.0..TAU),
            turn_rate_rad: spec.turn_rate_deg_s.to_radians(),
            sway_amp: 0.05 * motion_scale,
            sway_phase: [rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU)],
        }
    }

    fn heading(&self, t: f64) -> Rotation {
        let h = self.heading_amp_rad * (self.heading_omega * t + self.heading_phase).sin() + self.turn_rate_rad * t;
        Rotation::ry(h.to_degrees())
    }

    fn orientation(&self, sensor: usize, t: f64) -> Rotation {
        let track = &self.tracks[sensor];
        let omega = track
            .components
            .iter()
            .fold(Vector3::zeros(), |acc, c| acc + c.axis * (c.amp_rad * (c.omega * t + c.phase).sin()));
        self.heading(t) * Rotation::exp(&omega)
    }

    fn root_position(&self, t: f64) -> Vector3<f64> {
        let a = self.sway_amp;
        let p = &self.sway_phase;
        Vector3::new(
            a * (TAU * 0.7 * t + p[0]).sin(),
            0.95 + 0.6 * a * (TAU * 1.4 * t + p[1]).sin(),
            a * (TAU * 0.5 * t + p[2]).sin(),
        )
    }

    fn endpoint(&self, sensor: usize, t: f64) -> Vector3<f64> {
        let track = &self.tracks[sensor];
        self.root_position(t) + self.heading(t) * track.mount + self.orientation(sensor, t) * track.bone
    }
}

/// Generates a motion sequence; identical `(spec, seed)` give identical output.
pub fn gen_motion(spec: &MotionSpec, seed: u64) -> Result<MotionSequence> {
    if spec.frames == 0 {
        return Err(Error::Config("motion must have at least one frame".into()));
    }
    if spec.sensors() == 0 || spec.root >= spec.sensors() {
        return Err(Error::Config(format!(
            "invalid sensor layout: {} sensors, root {}",
            spec.sensors(),
            spec.root
        )));
    }
    if !(spec.rate_hz > 0.0) || !(spec.freq_hz.0 > 0.0 && spec.freq_hz.0 <= spec.freq_hz.1) {
        return Err(Error::Config("invalid rate or frequency range".into()));
    }
    let body = Body::new(spec, seed);
    let dt = 1.0 / spec.rate_hz;
    let frames = (0..spec.frames)
        .map(|i| {
            let t = i as f64 * dt;
            let sensors = (0..spec.sensors())
                .map(|s| {
                    let p_prev = body.endpoint(s, t - dt);
                    let p = body.endpoint(s, t);
                    let p_next = body.endpoint(s, t + dt);
                    let accel = (p_next - 2.0 * p + p_prev) / (dt * dt);
                    SensorReading::new(body.orientation(s, t), accel)
                })
                .collect();
            ImuFrame::new(i as u64, sensors)
        })
        .collect();
    MotionSequence::new(frames, spec.rate_hz)
}

/// Endpoint position of `sensor` at time `t` under the generator for `(spec, seed)`.
///
/// Exposed so tests can check accelerations against the position track.
pub fn endpoint_position(spec: &MotionSpec, seed: u64, sensor: usize, t: f64) -> Vector3<f64> {
    Body::new(spec, seed).endpoint(sensor, t)
}
