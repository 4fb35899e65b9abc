//! Rotation representations and the conversions the rest of the crate relies on.
//!
//! Conventions:
//! - Euler angles are extrinsic X, then Y, then Z, so the matrix is `Rz(z) * Ry(y) * Rx(x)`
//!   and `y` is the axis bounded to [-90, 90].
//! - Angles cross the public API in degrees.
//! - The vertical axis is +Y; heading (yaw) is a rotation about +Y.
//! - The 6D representation is the first two matrix columns, column-major.

use std::fmt;
use std::ops::Mul;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Tolerance on `||RᵀR - I||_F` and `|det R - 1|` for a matrix to count as a rotation.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// Below this `cos(theta_y)` the Euler extraction treats the matrix as gimbal-locked.
const GIMBAL_EPS: f64 = 1e-9;

/// A proper rotation matrix (orthonormal, determinant +1).
#[derive(Clone, Copy, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl fmt::Debug for Rotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = &self.0;
        f.debug_tuple("Rotation")
            .field(&[m[(0, 0)], m[(0, 1)], m[(0, 2)]])
            .field(&[m[(1, 0)], m[(1, 1)], m[(1, 2)]])
            .field(&[m[(2, 0)], m[(2, 1)], m[(2, 2)]])
            .finish()
    }
}

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Matrix3::identity())
    }

    /// Wraps `m` after checking it is a rotation within [`ROTATION_TOLERANCE`].
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        let (ortho, det) = orthonormality_error(&m);
        if ortho <= ROTATION_TOLERANCE && (det - 1.0).abs() <= ROTATION_TOLERANCE {
            Ok(Rotation(m))
        } else {
            Err(Error::NotARotation { ortho, det })
        }
    }

    /// Wraps `m` without checking. The caller guarantees `m` is a rotation.
    pub fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Rotation(m)
    }

    /// Nearest rotation to `m` in the Frobenius sense.
    pub fn nearest(m: &Matrix3<f64>) -> Result<Self> {
        nearest_rotation(m)
    }

    /// Builds a rotation from nine row-major values, projecting onto SO(3) when
    /// the input is within `tolerance` of a rotation.
    pub fn from_row_major(values: &[f64], tolerance: f64) -> Result<Self> {
        if values.len() != 9 {
            return Err(Error::LengthMismatch {
                field: "rotation",
                expected: 9,
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("rotation".into()));
        }
        let m = Matrix3::from_row_slice(values);
        let (ortho, det) = orthonormality_error(&m);
        if ortho > tolerance || (det - 1.0).abs() > tolerance {
            return Err(Error::NotARotation { ortho, det });
        }
        if ortho <= ROTATION_TOLERANCE && (det - 1.0).abs() <= ROTATION_TOLERANCE {
            Ok(Rotation(m))
        } else {
            nearest_rotation(&m)
        }
    }

    pub fn row_major(&self) -> [f64; 9] {
        let m = &self.0;
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
        ]
    }

    pub fn rx(deg: f64) -> Self {
        let (s, c) = deg.to_radians().sin_cos();
        Rotation(Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c))
    }

    pub fn ry(deg: f64) -> Self {
        let (s, c) = deg.to_radians().sin_cos();
        Rotation(Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c))
    }

    pub fn rz(deg: f64) -> Self {
        let (s, c) = deg.to_radians().sin_cos();
        Rotation(Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0))
    }

    /// Rotation of `deg` degrees about `axis` (need not be normalized).
    pub fn about_axis(axis: &Vector3<f64>, deg: f64) -> Self {
        let norm = axis.norm();
        if norm == 0.0 || deg == 0.0 {
            return Self::identity();
        }
        Self::exp(&(axis * (deg.to_radians() / norm)))
    }

    /// Exponential map from an axis-angle vector in radians.
    pub fn exp(omega: &Vector3<f64>) -> Self {
        let theta = omega.norm();
        let k = omega.cross_matrix();
        if theta < 1e-12 {
            return Rotation(Matrix3::identity() + k);
        }
        let a = theta.sin() / theta;
        let b = (1.0 - theta.cos()) / (theta * theta);
        Rotation(Matrix3::identity() + k * a + k * k * b)
    }

    /// Re-projects onto SO(3) to remove rounding accumulated by long
    /// products of rotations.
    pub fn renormalized(&self) -> Self {
        nearest_rotation(&self.0).unwrap_or(*self)
    }

    /// Logarithm map: axis-angle vector in radians.
    pub fn log(&self) -> Vector3<f64> {
        nalgebra::Rotation3::from_matrix_unchecked(self.0).scaled_axis()
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Rotation(self.0.transpose())
    }

    /// Rotation angle in degrees, in [0, 180].
    pub fn angle_deg(&self) -> f64 {
        rotation_angle(&self.0).to_degrees()
    }

    pub fn to_euler(&self) -> EulerXYZ {
        euler_from_mat(self)
    }

    pub fn to_rot6d(&self) -> Rot6D {
        rot6d_from_mat(self)
    }

    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0 * v
    }

    /// Returns `(||RᵀR - I||_F, det R)`.
    pub fn orthonormality(&self) -> (f64, f64) {
        orthonormality_error(&self.0)
    }
}

impl Mul for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Mul<&Rotation> for &Rotation {
    type Output = Rotation;
    fn mul(self, rhs: &Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Mul<Vector3<f64>> for Rotation {
    type Output = Vector3<f64>;
    fn mul(self, rhs: Vector3<f64>) -> Vector3<f64> {
        self.0 * rhs
    }
}

impl Mul<&Vector3<f64>> for &Rotation {
    type Output = Vector3<f64>;
    fn mul(self, rhs: &Vector3<f64>) -> Vector3<f64> {
        self.0 * rhs
    }
}

fn orthonormality_error(m: &Matrix3<f64>) -> (f64, f64) {
    let ortho = (m.transpose() * m - Matrix3::identity()).norm();
    (ortho, m.determinant())
}

/// Rotation angle of `m` in radians.
///
/// Uses `atan2(|skew|, trace - 1)`, which equals `acos((tr - 1) / 2)` but keeps
/// full precision for angles near 0 where `acos` loses half the mantissa.
fn rotation_angle(m: &Matrix3<f64>) -> f64 {
    let sin2 = Vector3::new(
        m[(2, 1)] - m[(1, 2)],
        m[(0, 2)] - m[(2, 0)],
        m[(1, 0)] - m[(0, 1)],
    )
    .norm();
    let cos2 = m.trace() - 1.0;
    sin2.atan2(cos2)
}

/// Euler angles in degrees for the extrinsic X-Y-Z convention.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EulerXYZ {
    /// In [-180, 180].
    pub x: f64,
    /// In [-90, 90].
    pub y: f64,
    /// In [-180, 180].
    pub z: f64,
}

impl EulerXYZ {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        EulerXYZ { x, y, z }
    }

    pub fn in_range(&self) -> bool {
        (-180.0..=180.0).contains(&self.x)
            && (-90.0..=90.0).contains(&self.y)
            && (-180.0..=180.0).contains(&self.z)
    }

    pub fn to_rotation(&self) -> Rotation {
        mat_from_euler(*self)
    }
}

/// `Rz(z) * Ry(y) * Rx(x)`.
pub fn mat_from_euler(e: EulerXYZ) -> Rotation {
    Rotation::rz(e.z) * Rotation::ry(e.y) * Rotation::rx(e.x)
}

/// Inverse of [`mat_from_euler`].
///
/// At gimbal lock (`|y| = 90`) only `z - x` (or `z + x`) is observable; `x` is
/// pinned to 0 and the free rotation is reported in `z`.
pub fn euler_from_mat(r: &Rotation) -> EulerXYZ {
    let m = r.matrix();
    let cy = m[(0, 0)].hypot(m[(1, 0)]);
    let y = (-m[(2, 0)]).atan2(cy);
    if cy < GIMBAL_EPS {
        let z = (-m[(0, 1)]).atan2(m[(1, 1)]);
        return EulerXYZ::new(0.0, y.to_degrees(), z.to_degrees());
    }
    let x = m[(2, 1)].atan2(m[(2, 2)]);
    let z = m[(1, 0)].atan2(m[(0, 0)]);
    EulerXYZ::new(x.to_degrees(), y.to_degrees(), z.to_degrees())
}

/// Geodesic distance on SO(3) in degrees, in [0, 180].
pub fn geodesic_deg(a: &Rotation, b: &Rotation) -> f64 {
    rotation_angle(&(a.0.transpose() * b.0)).to_degrees()
}

/// Continuous 6D rotation representation: first column then second column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rot6D(pub [f64; 6]);

impl Rot6D {
    pub fn to_rotation(&self) -> Result<Rotation> {
        mat_from_rot6d(self)
    }
}

/// Gram-Schmidt decoding of a 6D vector.
pub fn mat_from_rot6d(v: &Rot6D) -> Result<Rotation> {
    let v = &v.0;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Degenerate6D);
    }
    let a1 = Vector3::new(v[0], v[1], v[2]);
    let a2 = Vector3::new(v[3], v[4], v[5]);
    let n1 = a1.norm();
    if n1 < 1e-12 {
        return Err(Error::Degenerate6D);
    }
    let b1 = a1 / n1;
    let u = a2 - b1 * b1.dot(&a2);
    let nu = u.norm();
    if nu <= 1e-9 * a2.norm().max(1e-300) || nu < 1e-12 {
        return Err(Error::Degenerate6D);
    }
    let b2 = u / nu;
    let b3 = b1.cross(&b2);
    Ok(Rotation(Matrix3::from_columns(&[b1, b2, b3])))
}

pub fn rot6d_from_mat(r: &Rotation) -> Rot6D {
    let m = r.matrix();
    Rot6D([
        m[(0, 0)],
        m[(1, 0)],
        m[(2, 0)],
        m[(0, 1)],
        m[(1, 1)],
        m[(2, 1)],
    ])
}

/// Nearest rotation to `m` under the Frobenius norm, i.e. the orthogonal
/// Procrustes solution `argmax_R tr(Rᵀ m)`.
pub fn nearest_rotation(m: &Matrix3<f64>) -> Result<Rotation> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericalFailure("non-finite matrix in SVD".into()));
    }
    let svd = m.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::NumericalFailure("SVD did not converge".into())),
    };
    let d = (u * v_t).determinant().signum();
    let correction = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d));
    Ok(Rotation(u * correction * v_t))
}

/// How the heading of a rotation was determined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum YawStatus {
    /// Heading taken from the body +Z (forward) axis.
    Forward,
    /// Forward axis within 1° of vertical; heading taken from body +X.
    SideFallback,
    /// No horizontal reference axis; heading set to 0.
    Indeterminate,
}

#[derive(Debug, Clone, Copy)]
pub struct YawSplit {
    /// `Ry(heading)`.
    pub yaw: Rotation,
    /// `yawᵀ * R`; carries no heading.
    pub residual: Rotation,
    pub heading_deg: f64,
    pub status: YawStatus,
}

impl YawSplit {
    pub fn is_indeterminate(&self) -> bool {
        self.status == YawStatus::Indeterminate
    }
}

/// Splits `R = Ry(psi) * residual` with `psi` the heading of the body forward axis.
pub fn yaw_decompose(r: &Rotation) -> YawSplit {
    let m = r.matrix();
    let min_horizontal = 1f64.to_radians().sin();
    let (heading, status) = if m[(0, 2)].hypot(m[(2, 2)]) >= min_horizontal {
        (m[(0, 2)].atan2(m[(2, 2)]), YawStatus::Forward)
    } else if m[(0, 0)].hypot(m[(2, 0)]) >= min_horizontal {
        ((-m[(2, 0)]).atan2(m[(0, 0)]), YawStatus::SideFallback)
    } else {
        (0.0, YawStatus::Indeterminate)
    };
    let heading_deg = heading.to_degrees();
    let yaw = Rotation::ry(heading_deg);
    YawSplit {
        yaw,
        residual: yaw.transpose() * *r,
        heading_deg,
        status,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn frob(a: &Rotation, b: &Rotation) -> f64 {
        (a.matrix() - b.matrix()).norm()
    }

    /// Direct trigonometric evaluation of Rz*Ry*Rx, written out element by element.
    fn euler_matrix_by_hand(x: f64, y: f64, z: f64) -> Matrix3<f64> {
        let (sx, cx) = x.to_radians().sin_cos();
        let (sy, cy) = y.to_radians().sin_cos();
        let (sz, cz) = z.to_radians().sin_cos();
        Matrix3::new(
            cz * cy,
            cz * sy * sx - sz * cx,
            cz * sy * cx + sz * sx,
            sz * cy,
            sz * sy * sx + cz * cx,
            sz * sy * cx - cz * sx,
            -sy,
            cy * sx,
            cy * cx,
        )
    }

    #[test]
    fn euler_identity_and_half_turn() {
        assert_eq!(mat_from_euler(EulerXYZ::new(0.0, 0.0, 0.0)), Rotation::identity());
        let half = mat_from_euler(EulerXYZ::new(180.0, 0.0, 0.0));
        let expected = Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0));
        assert!((half.matrix() - expected).norm() < 1e-15);
    }

    #[test]
    fn euler_matches_hand_expansion_and_round_trips() {
        let m = mat_from_euler(EulerXYZ::new(30.0, -45.0, 60.0));
        assert!((m.matrix() - euler_matrix_by_hand(30.0, -45.0, 60.0)).norm() < 1e-14);
        let e = euler_from_mat(&m);
        assert_abs_diff_eq!(e.x, 30.0, epsilon = 1e-6);
        assert_abs_diff_eq!(e.y, -45.0, epsilon = 1e-6);
        assert_abs_diff_eq!(e.z, 60.0, epsilon = 1e-6);
    }

    #[test]
    fn euler_gimbal_lock_pins_x() {
        assert_eq!(euler_from_mat(&Rotation::identity()), EulerXYZ::new(0.0, 0.0, 0.0));
        let e = euler_from_mat(&Rotation::ry(90.0));
        assert_abs_diff_eq!(e.x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.y, 90.0, epsilon = 1e-9);
        assert_abs_diff_eq!(e.z, 0.0, epsilon = 1e-9);

        // A locked rotation with a free component folds it into z.
        let r = mat_from_euler(EulerXYZ::new(25.0, -90.0, 10.0));
        let e = euler_from_mat(&r);
        assert_eq!(e.x, 0.0);
        assert!(frob(&mat_from_euler(e), &r) < 1e-9);
    }

    #[test]
    fn geodesic_examples() {
        let r = Rotation::rz(33.0) * Rotation::rx(-12.0);
        assert_eq!(geodesic_deg(&r, &r), 0.0);
        assert_abs_diff_eq!(geodesic_deg(&Rotation::identity(), &Rotation::rx(30.0)), 30.0, epsilon = 1e-12);
        let a = Rotation::rz(10.0);
        let b = Rotation::rz(10.0) * Rotation::ry(20.0);
        assert_abs_diff_eq!(geodesic_deg(&a, &b), 20.0, epsilon = 1e-12);
        assert_abs_diff_eq!(geodesic_deg(&Rotation::identity(), &Rotation::ry(180.0)), 180.0, epsilon = 1e-12);
    }

    #[test]
    fn geodesic_resolves_tiny_angles() {
        let tiny = 1e-7;
        assert_abs_diff_eq!(Rotation::rx(tiny).angle_deg(), tiny, epsilon = 1e-15);
    }

    #[test]
    fn rot6d_examples() {
        let id = mat_from_rot6d(&Rot6D([1.0, 0.0, 0.0, 0.0, 1.0, 0.0])).unwrap();
        assert_eq!(id, Rotation::identity());
        let sheared = mat_from_rot6d(&Rot6D([2.0, 0.0, 0.0, 3.0, 1.0, 0.0])).unwrap();
        assert!(frob(&sheared, &Rotation::identity()) < 1e-15);
    }

    #[test]
    fn rot6d_degenerate_inputs() {
        for v in [
            [0.0; 6],
            [1.0, 0.0, 0.0, 2.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
            [f64::NAN, 0.0, 0.0, 0.0, 1.0, 0.0],
        ] {
            let err = mat_from_rot6d(&Rot6D(v)).unwrap_err();
            assert_eq!(err.to_string(), "degenerate 6D input");
        }
    }

    #[test]
    fn yaw_decompose_examples() {
        let s = yaw_decompose(&Rotation::ry(40.0));
        assert!(frob(&s.yaw, &Rotation::ry(40.0)) < 1e-12);
        assert!(frob(&s.residual, &Rotation::identity()) < 1e-12);

        let s = yaw_decompose(&Rotation::rx(20.0));
        assert!(frob(&s.yaw, &Rotation::identity()) < 1e-12);
        assert!(frob(&s.residual, &Rotation::rx(20.0)) < 1e-12);

        let r = Rotation::ry(30.0) * Rotation::rx(10.0);
        let s = yaw_decompose(&r);
        assert_eq!(s.status, YawStatus::Forward);
        assert!(frob(&s.yaw, &Rotation::ry(30.0)) < 1e-12);
        assert!(frob(&s.residual, &Rotation::rx(10.0)) < 1e-12);
        assert!(frob(&(s.yaw * s.residual), &r) < 1e-15);
    }

    #[test]
    fn yaw_decompose_falls_back_to_side_axis() {
        // Forward axis pointing straight up: heading comes from body +X.
        let r = Rotation::ry(50.0) * Rotation::rx(-90.0);
        let s = yaw_decompose(&r);
        assert_eq!(s.status, YawStatus::SideFallback);
        assert_abs_diff_eq!(s.heading_deg, 50.0, epsilon = 1e-9);
        let again = yaw_decompose(&s.residual);
        assert!(frob(&again.yaw, &Rotation::identity()) < 1e-9);
    }

    #[test]
    fn nearest_rotation_projects_perturbed_matrix() {
        let r = Rotation::rz(20.0) * Rotation::rx(5.0);
        let noisy = r.matrix() + Matrix3::repeat(1e-6);
        let p = nearest_rotation(&noisy).unwrap();
        let (ortho, det) = p.orthonormality();
        assert!(ortho < 1e-12 && (det - 1.0).abs() < 1e-12);
        assert!(geodesic_deg(&p, &r) < 1e-3);
    }

    #[test]
    fn from_matrix_rejects_reflections() {
        let reflect = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(matches!(Rotation::from_matrix(reflect), Err(Error::NotARotation { .. })));
        assert!(Rotation::from_matrix(*Rotation::rz(3.0).matrix()).is_ok());
    }
}
