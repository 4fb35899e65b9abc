//! Numerical baseline: fit `measured(t) ≈ X · reference(t) · Y` by
//! alternating closed-form orthogonal Procrustes steps.
//!
//! With `Y` fixed the optimal `X` is `kabsch(Σ M_t (R_t Y)ᵀ)`; with `X` fixed
//! the optimal `Y` is `kabsch(Σ (X R_t)ᵀ M_t)`. Each step is the exact
//! minimizer of its block, so the residual never increases. If every
//! reference orientation is the same the problem is underdetermined: any `Y`
//! can be absorbed into `X`.

use nalgebra::{Matrix3, Vector3};

use super::{EstimateFlag, EstimateInput, EstimateOut, Estimator, SensorEstimate};
use crate::diversity::rotation_diversity;
use crate::error::{Error, Result};
use crate::rotmath::{nearest_rotation, Rotation};
use crate::sensor_model::GravitySpec;

#[derive(Debug, Clone, PartialEq)]
pub struct ProcrustesConfig {
    pub max_iterations: usize,
    /// Stop once the RMS residual changes by less than this between sweeps.
    pub tolerance: f64,
    /// Measured accelerations contain gravity leakage; refine the drift tilt from it.
    pub leakage: bool,
    pub gravity: GravitySpec,
    /// Frames whose reference acceleration is below this (m/s²) count as low-motion.
    pub low_motion_accel: f64,
}

impl Default for ProcrustesConfig {
    fn default() -> Self {
        ProcrustesConfig {
            max_iterations: 100,
            tolerance: 1e-10,
            leakage: false,
            gravity: GravitySpec::default(),
            low_motion_accel: 1.0,
        }
    }
}

/// Rotation maximizing `tr(Rᵀ H)`: `U · diag(1, 1, det(UVᵀ)) · Vᵀ`.
pub fn kabsch(h: &Matrix3<f64>) -> Result<Rotation> {
    nearest_rotation(h)
}

#[derive(Debug, Clone)]
pub struct SensorSolution {
    /// Left factor (drift correction).
    pub x: Rotation,
    /// Right factor (offset correction).
    pub y: Rotation,
    /// RMS Frobenius residual of the returned iterate.
    pub residual: f64,
    /// Residual after the initial `X` step and after every sweep.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// `sqrt(Σ_t ||X R_t Y − M_t||²_F / n)`.
pub fn rms_residual(x: &Rotation, y: &Rotation, measured: &[Rotation], reference: &[Rotation]) -> f64 {
    let sum: f64 = measured
        .iter()
        .zip(reference)
        .map(|(m, r)| (x.matrix() * r.matrix() * y.matrix() - m.matrix()).norm_squared())
        .sum();
    (sum / measured.len() as f64).sqrt()
}

fn solve_x(y: &Rotation, measured: &[Rotation], reference: &[Rotation]) -> Result<Rotation> {
    let h = measured
        .iter()
        .zip(reference)
        .fold(Matrix3::zeros(), |acc, (m, r)| acc + m.matrix() * (r.matrix() * y.matrix()).transpose());
    kabsch(&h)
}

fn solve_y(x: &Rotation, measured: &[Rotation], reference: &[Rotation]) -> Result<Rotation> {
    let h = measured
        .iter()
        .zip(reference)
        .fold(Matrix3::zeros(), |acc, (m, r)| acc + (x.matrix() * r.matrix()).transpose() * m.matrix());
    kabsch(&h)
}

/// Closed-form starting point for `Y`.
///
/// For any two frames, `M_tᵀ·M_s = Yᵀ·(R_tᵀ·R_s)·Y`, so the rotation vector
/// of the measured relative motion is the reference one rotated by `Yᵀ`.
/// Aligning the two vector sets over many frame pairs gives `Y` without
/// iterating. Pairs whose relative rotation is near 0° or 180° carry no
/// reliable axis and are skipped.
pub fn relative_motion_init(measured: &[Rotation], reference: &[Rotation]) -> Result<Rotation> {
    let n = measured.len().min(reference.len());
    if n < 2 {
        return Ok(Rotation::identity());
    }
    let mut h = Matrix3::zeros();
    let mut used = 0;
    for stride in [1.max(n / 3), 1.max(n / 2)] {
        for i in 0..n {
            let j = (i + stride) % n;
            if i == j {
                continue;
            }
            let a = (reference[i].transpose() * reference[j]).log();
            let b = (measured[i].transpose() * measured[j]).log();
            let angle = a.norm();
            if angle < 1e-6 || angle > 175f64.to_radians() {
                continue;
            }
            h += b * a.transpose();
            used += 1;
        }
    }
    if used == 0 {
        return Ok(Rotation::identity());
    }
    Ok(kabsch(&h)?.transpose())
}

/// Alternating minimization for one sensor, starting from `init_y`.
pub fn solve_sensor(
    measured: &[Rotation],
    reference: &[Rotation],
    init_y: Rotation,
    cfg: &ProcrustesConfig,
) -> Result<SensorSolution> {
    if measured.len() != reference.len() {
        return Err(Error::LengthMismatch {
            field: "reference frames",
            expected: measured.len(),
            actual: reference.len(),
        });
    }
    if measured.len() < 2 {
        return Err(Error::Config("Procrustes fit needs at least 2 frames".into()));
    }
    let mut y = init_y;
    let mut x = solve_x(&y, measured, reference)?;
    let mut residual = rms_residual(&x, &y, measured, reference);
    let mut history = vec![residual];
    let mut best = (x, y, residual);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iterations {
        iterations += 1;
        y = solve_y(&x, measured, reference)?;
        x = solve_x(&y, measured, reference)?;
        let next = rms_residual(&x, &y, measured, reference);
        if !next.is_finite() {
            return Err(Error::NumericalFailure("non-finite Procrustes residual".into()));
        }
        history.push(next);
        if next <= best.2 {
            best = (x, y, next);
        }
        let change = (residual - next).abs();
        residual = next;
        if change < cfg.tolerance {
            converged = true;
            break;
        }
    }
    let (x, y, residual) = if converged { (x, y, residual) } else { best };
    Ok(SensorSolution {
        x,
        y,
        residual,
        history,
        iterations,
        converged,
    })
}

/// Smallest rotation taking direction `from` to direction `to`.
fn align(from: &Vector3<f64>, to: &Vector3<f64>) -> Rotation {
    let (u, v) = (from.normalize(), to.normalize());
    let axis = u.cross(&v);
    let angle = axis.norm().atan2(u.dot(&v));
    if axis.norm() < 1e-15 {
        return Rotation::identity();
    }
    Rotation::exp(&(axis.normalize() * angle))
}

/// Replaces the tilt of the drift correction `x` with the tilt implied by
/// the gravity leakage in the accelerations, keeping its heading.
///
/// `known_drift` is the drift already removed from `measured_accel`. The mean
/// of `measured − x·reference` over low-motion frames estimates
/// `known_driftᵀ·g − Δdrift·g`, from which `Δdrift·g` follows.
pub fn refine_tilt_from_leakage(
    x: &Rotation,
    known_drift: &Rotation,
    measured_accel: &[Vector3<f64>],
    reference_accel: &[Vector3<f64>],
    cfg: &ProcrustesConfig,
) -> Option<Rotation> {
    let g = cfg.gravity.g;
    if g.norm() == 0.0 || measured_accel.is_empty() || measured_accel.len() != reference_accel.len() {
        return None;
    }
    let residual = |(m, r): (&Vector3<f64>, &Vector3<f64>)| m - x * r;
    let quiet: Vec<_> = measured_accel
        .iter()
        .zip(reference_accel)
        .filter(|(_, r)| r.norm() <= cfg.low_motion_accel)
        .map(residual)
        .collect();
    let picked = if quiet.is_empty() {
        measured_accel.iter().zip(reference_accel).map(residual).collect()
    } else {
        quiet
    };
    let mean_leak = picked.iter().fold(Vector3::zeros(), |acc, v| acc + v) / picked.len() as f64;
    let target = known_drift.transpose() * g - mean_leak;
    if target.norm() < 1e-9 * g.norm() {
        return None;
    }
    let swing = align(&g, &(x * &g));
    let twist = swing.transpose() * *x;
    Some(align(&g, &target) * twist)
}

#[derive(Debug, Clone, Default)]
pub struct ProcrustesEstimator {
    pub cfg: ProcrustesConfig,
}

impl ProcrustesEstimator {
    pub fn new(cfg: ProcrustesConfig) -> Self {
        ProcrustesEstimator { cfg }
    }
}

impl Estimator for ProcrustesEstimator {
    fn name(&self) -> &str {
        "procrustes"
    }

    fn estimate(&self, input: &EstimateInput<'_>) -> Result<EstimateOut> {
        let reference = input.require_reference()?;
        let window = input.window;
        let mut iterations = 0;
        let mut sensors = Vec::with_capacity(window.sensors());
        for s in 0..window.sensors() {
            let measured: Vec<Rotation> = window.orientations(s).copied().collect();
            let truth: Vec<Rotation> = reference.truth.orientations(s).copied().collect();
            let init = relative_motion_init(&measured, &truth)?;
            let mut sol = solve_sensor(&measured, &truth, init, &self.cfg)?;
            iterations = iterations.max(sol.iterations);

            if self.cfg.leakage {
                let known = input
                    .state
                    .and_then(|st| st.sensors.get(s))
                    .map_or(Rotation::identity(), |p| p.drift);
                let meas_a: Vec<_> = window.readings(s).map(|r| r.accel).collect();
                let ref_a: Vec<_> = reference.truth.readings(s).map(|r| r.accel).collect();
                if let Some(x) = refine_tilt_from_leakage(&sol.x, &known, &meas_a, &ref_a, &self.cfg) {
                    sol.x = x;
                    sol.y = solve_y(&x, &measured, &truth)?;
                    sol.residual = rms_residual(&sol.x, &sol.y, &measured, &truth);
                }
            }

            let mut flags = Vec::new();
            if rotation_diversity(&measured)? == 1 {
                flags.push(EstimateFlag::Degenerate);
            }
            if !sol.converged {
                flags.push(EstimateFlag::NotConverged);
            }
            sensors.push(SensorEstimate {
                delta_drift: sol.x,
                delta_offset: sol.y,
                residual: sol.residual,
                flags,
            });
        }
        Ok(EstimateOut { sensors, iterations })
    }
}
