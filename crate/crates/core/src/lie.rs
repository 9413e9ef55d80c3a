//! Matrix Lie group numerics for SO(3) and the extended poses SE_k(3).
//!
//! An element of SE_k(3) is the (3+k)×(3+k) matrix
//!
//! ```text
//! [ R  t_1 .. t_k ]
//! [ 0     I_k     ]
//! ```
//!
//! and its tangent vector is ordered `(φ, ρ_1, .., ρ_k)` with 3(k+1) entries.
//! All maps are closed form (Rodrigues / left Jacobian). Short Taylor series
//! replace the closed forms only where those lose precision near zero angle.

use nalgebra::{DMatrix, DVector, Dim, Matrix, Matrix3, StorageMut, Vector3, SVD};
use std::ops::Mul;

use crate::error::LieError;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Below this rotation angle the trigonometric coefficients switch to Taylor expansions.
pub const SMALL_ANGLE: f64 = 1e-7;

/// Below this angle coefficients whose closed forms cancel catastrophically use
/// a series truncated after the θ⁶ term (error below 1e-17).
const SERIES_ANGLE: f64 = 1e-2;

/// Tolerance used by [`vee`] when checking skew symmetry.
pub const SKEW_TOL: f64 = 1e-8;

/// Skew-symmetric matrix with `hat(v) * u == v.cross(&u)`.
#[inline]
pub fn hat(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`hat`]. Rejects matrices whose symmetric part is not negligible.
pub fn vee(m: &Mat3) -> Result<Vec3, LieError> {
    let asym = (m + m.transpose()).norm();
    if !(asym < SKEW_TOL) {
        return Err(LieError::NotSkewSymmetric(asym));
    }
    Ok(vee_unchecked(m))
}

#[inline]
fn vee_unchecked(m: &Mat3) -> Vec3 {
    Vec3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// `(sin θ / θ, (1 − cos θ) / θ², (θ − sin θ) / θ³)` with Taylor fallbacks.
fn rodrigues_coeffs(theta: f64) -> (f64, f64, f64) {
    if theta < SMALL_ANGLE {
        let t2 = theta * theta;
        (1.0 - t2 / 6.0, 0.5 - t2 / 24.0, 1.0 / 6.0 - t2 / 120.0)
    } else {
        let s = theta.sin();
        let half = (0.5 * theta).sin();
        let t2 = theta * theta;
        (s / theta, 2.0 * half * half / t2, third_coeff(theta))
    }
}

/// `(θ − sin θ) / θ³`; the closed form cancels badly for small θ.
fn third_coeff(theta: f64) -> f64 {
    let t2 = theta * theta;
    if theta < SERIES_ANGLE {
        1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0 - t2 * t2 * t2 / 362_880.0
    } else {
        (theta - theta.sin()) / (t2 * theta)
    }
}

/// Rodrigues formula.
pub fn so3_exp(phi: &Vec3) -> Mat3 {
    let (a, b, _) = rodrigues_coeffs(phi.norm());
    let k = hat(phi);
    Mat3::identity() + k * a + k * k * b
}

/// Principal logarithm; the returned vector has norm in `[0, π]`.
pub fn so3_log(r: &Mat3) -> Vec3 {
    let w = vee_unchecked(&(r - r.transpose())); // 2 sin θ · axis
    let s = 0.5 * w.norm();
    let c = 0.5 * (r.trace() - 1.0);
    let theta = s.atan2(c);

    if theta < SMALL_ANGLE {
        return w * (0.5 * (1.0 + theta * theta / 6.0));
    }
    if theta < std::f64::consts::PI - 1e-3 {
        return w * (theta / (2.0 * s));
    }

    // Near π the antisymmetric part vanishes; read the axis off
    // (R + Rᵀ)/2 − cos θ·I = (1 − cos θ)·a·aᵀ using its dominant column.
    let b = (r + r.transpose()) * 0.5 - Mat3::identity() * c;
    let i = (0..3)
        .max_by(|&i, &j| b[(i, i)].total_cmp(&b[(j, j)]))
        .unwrap_or(0);
    let mut axis = b.column(i).into_owned();
    axis /= axis.norm();
    if axis.dot(&w) < 0.0 {
        axis = -axis;
    }
    axis * theta
}

/// Left Jacobian of SO(3), also the first strapdown integral Γ₁.
pub fn so3_left_jacobian(phi: &Vec3) -> Mat3 {
    let (_, b, c) = rodrigues_coeffs(phi.norm());
    let k = hat(phi);
    Mat3::identity() + k * b + k * k * c
}

/// Closed-form inverse of [`so3_left_jacobian`], valid for ‖φ‖ < 2π.
pub fn so3_left_jacobian_inv(phi: &Vec3) -> Mat3 {
    let theta = phi.norm();
    let k = hat(phi);
    let d = if theta < SERIES_ANGLE {
        let t2 = theta * theta;
        1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30_240.0 + t2 * t2 * t2 / 1_209_600.0
    } else {
        let half = 0.5 * theta;
        1.0 / (theta * theta) - half.cos() / (half.sin() * 2.0 * theta)
    };
    Mat3::identity() - k * 0.5 + k * k * d
}

/// Second strapdown integral Γ₂(φ) = Σ φ^∧ⁿ / (n+2)!.
pub fn so3_gamma2(phi: &Vec3) -> Mat3 {
    let theta = phi.norm();
    let k = hat(phi);
    let t2 = theta * theta;
    let c = if theta < SERIES_ANGLE {
        1.0 / 24.0 - t2 / 720.0 + t2 * t2 / 40_320.0 - t2 * t2 * t2 / 3_628_800.0
    } else {
        (t2 + 2.0 * theta.cos() - 2.0) / (2.0 * t2 * t2)
    };
    let b = third_coeff(theta);
    Mat3::identity() * 0.5 + k * b + k * k * c
}

/// `‖RᵀR − I‖_F`.
pub fn orthonormality_error(r: &Mat3) -> f64 {
    (r.transpose() * r - Mat3::identity()).norm()
}

pub fn is_rotation(r: &Mat3, tol: f64) -> bool {
    orthonormality_error(r) < tol && r.determinant() > 0.0
}

/// Nearest rotation in the Frobenius sense (polar projection).
pub fn orthonormalize(r: &Mat3) -> Mat3 {
    let svd = SVD::new(*r, true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut out = u * vt;
    if out.determinant() < 0.0 {
        let mut u = u;
        u.column_mut(2).neg_mut();
        out = u * vt;
    }
    out
}

/// Element of SE_k(3): a rotation with `K` translation-like columns.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SEk3<const K: usize> {
    rotation: Mat3,
    cols: [Vec3; K],
}

/// Tangent coordinates `(φ, ρ_1, .., ρ_K)` of SE_k(3).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TangentSEk3<const K: usize> {
    pub rot: Vec3,
    pub cols: [Vec3; K],
}

impl<const K: usize> TangentSEk3<K> {
    pub const DIM: usize = 3 * (K + 1);

    pub fn zeros() -> Self {
        Self {
            rot: Vec3::zeros(),
            cols: [Vec3::zeros(); K],
        }
    }

    /// Builds a tangent from a flat slice of length `3(K+1)`.
    ///
    /// Panics if the slice has the wrong length.
    pub fn from_slice(xs: &[f64]) -> Self {
        assert_eq!(xs.len(), Self::DIM, "tangent slice length");
        let rot = Vec3::new(xs[0], xs[1], xs[2]);
        let cols = std::array::from_fn(|i| {
            let o = 3 * (i + 1);
            Vec3::new(xs[o], xs[o + 1], xs[o + 2])
        });
        Self { rot, cols }
    }

    pub fn to_vector(&self) -> DVector<f64> {
        let mut out = DVector::zeros(Self::DIM);
        out.fixed_rows_mut::<3>(0).copy_from(&self.rot);
        for (i, c) in self.cols.iter().enumerate() {
            out.fixed_rows_mut::<3>(3 * (i + 1)).copy_from(c);
        }
        out
    }

    /// The Lie algebra matrix ξ^∧ of size (3+K)×(3+K).
    pub fn wedge(&self) -> DMatrix<f64> {
        let n = 3 + K;
        let mut m = DMatrix::zeros(n, n);
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&hat(&self.rot));
        for (i, c) in self.cols.iter().enumerate() {
            m.fixed_view_mut::<3, 1>(0, 3 + i).copy_from(c);
        }
        m
    }

    pub fn is_finite(&self) -> bool {
        self.rot.iter().chain(self.cols.iter().flatten()).all(|x| x.is_finite())
    }
}

impl<const K: usize> SEk3<K> {
    pub fn identity() -> Self {
        Self {
            rotation: Mat3::identity(),
            cols: [Vec3::zeros(); K],
        }
    }

    /// Assembles an element without validating the rotation block.
    pub fn new(rotation: Mat3, cols: [Vec3; K]) -> Self {
        Self { rotation, cols }
    }

    pub fn rotation(&self) -> &Mat3 {
        &self.rotation
    }

    pub fn col(&self, i: usize) -> &Vec3 {
        &self.cols[i]
    }

    pub fn cols(&self) -> &[Vec3; K] {
        &self.cols
    }

    pub fn set_rotation(&mut self, r: Mat3) {
        self.rotation = r;
    }

    pub fn set_col(&mut self, i: usize, c: Vec3) {
        self.cols[i] = c;
    }

    pub fn exp(xi: &TangentSEk3<K>) -> Self {
        let jl = so3_left_jacobian(&xi.rot);
        Self {
            rotation: so3_exp(&xi.rot),
            cols: xi.cols.map(|c| jl * c),
        }
    }

    pub fn log(&self) -> TangentSEk3<K> {
        let rot = so3_log(&self.rotation);
        let jinv = so3_left_jacobian_inv(&rot);
        TangentSEk3 {
            rot,
            cols: self.cols.map(|c| jinv * c),
        }
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            cols: self.cols.map(|c| -(rt * c)),
        }
    }

    /// Writes `Ad_X` into the top-left 3(K+1)×3(K+1) block of `out`.
    ///
    /// Only the nonzero blocks are written; `out` must be zero there beforehand.
    pub fn write_adjoint<R: Dim, C: Dim, S: StorageMut<f64, R, C>>(
        &self,
        out: &mut Matrix<f64, R, C, S>,
    ) {
        let r = &self.rotation;
        out.fixed_view_mut::<3, 3>(0, 0).copy_from(r);
        for (i, c) in self.cols.iter().enumerate() {
            let o = 3 * (i + 1);
            out.fixed_view_mut::<3, 3>(o, o).copy_from(r);
            out.fixed_view_mut::<3, 3>(o, 0).copy_from(&(hat(c) * r));
        }
    }

    pub fn adjoint(&self) -> DMatrix<f64> {
        let n = 3 * (K + 1);
        let mut out = DMatrix::zeros(n, n);
        self.write_adjoint(&mut out);
        out
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let n = 3 + K;
        let mut m = DMatrix::identity(n, n);
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        for (i, c) in self.cols.iter().enumerate() {
            m.fixed_view_mut::<3, 1>(0, 3 + i).copy_from(c);
        }
        m
    }

    /// Parses a (3+K)×(3+K) matrix, checking the block structure.
    pub fn from_matrix(m: &DMatrix<f64>, tol: f64) -> Result<Self, LieError> {
        let n = 3 + K;
        if m.nrows() != n || m.ncols() != n {
            return Err(LieError::Shape {
                expected: n,
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        let lower = m.view((3, 0), (K, n));
        let mut expected = DMatrix::zeros(K, n);
        expected.view_mut((0, 3), (K, K)).fill_with_identity();
        if (lower - expected).norm() > tol {
            return Err(LieError::BadBlockStructure);
        }
        let rotation: Mat3 = m.fixed_view::<3, 3>(0, 0).into_owned();
        if !is_rotation(&rotation, tol.max(1e-9)) {
            return Err(LieError::NotRotation(orthonormality_error(&rotation)));
        }
        let cols = std::array::from_fn(|i| m.fixed_view::<3, 1>(0, 3 + i).into_owned());
        Ok(Self { rotation, cols })
    }

    pub fn is_finite(&self) -> bool {
        self.rotation
            .iter()
            .chain(self.cols.iter().flatten())
            .all(|x| x.is_finite())
    }
}

impl<const K: usize> Mul for SEk3<K> {
    type Output = SEk3<K>;

    fn mul(self, rhs: SEk3<K>) -> SEk3<K> {
        &self * &rhs
    }
}

impl<const K: usize> Mul<&SEk3<K>> for &SEk3<K> {
    type Output = SEk3<K>;

    fn mul(self, rhs: &SEk3<K>) -> SEk3<K> {
        SEk3 {
            rotation: self.rotation * rhs.rotation,
            cols: std::array::from_fn(|i| self.rotation * rhs.cols[i] + self.cols[i]),
        }
    }
}

pub type SE43 = SEk3<4>;
pub type Tangent43 = TangentSEk3<4>;
