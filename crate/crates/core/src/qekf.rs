//! Quaternion error-state EKF baseline over `(p, v, q, p^{cL}, p^{cR}, b^g, b^a)`.
//!
//! Nominal attitude is a Hamilton unit quaternion (world ← body). The error
//! state is `(δp, δv, δφ, δp^{cL}, δp^{cR}, δb^g, δb^a)` with a right
//! multiplicative attitude error `q = q̄ ⊗ Exp(δφ)` and additive errors elsewhere,
//! all defined as true minus estimate.

use nalgebra::{DMatrix, DVector, Quaternion, SMatrix, UnitQuaternion};

use crate::error::FilterError;
use crate::filter::{Estimator, FilterKind};
use crate::lie::{hat, Mat3, Vec3};
use crate::riekf::{contact_noise, gain_and_joseph, strapdown, Integrator};
use crate::state::{symmetrize, BiasVector, Covariance21, Foot, ImuSample, KinSample, NoiseParams, RobotState, DIM};

/// Offsets of each 3-block in the QEKF error vector.
pub mod qidx {
    pub const POS: usize = 0;
    pub const VEL: usize = 3;
    pub const ATT: usize = 6;
    pub const FOOT_L: usize = 9;
    pub const FOOT_R: usize = 12;
    pub const BIAS_G: usize = 15;
    pub const BIAS_A: usize = 18;
}

pub type QCovariance21 = Covariance21;

fn foot_offset(foot: Foot) -> usize {
    match foot {
        Foot::Left => qidx::FOOT_L,
        Foot::Right => qidx::FOOT_R,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuatState {
    pub p: Vec3,
    pub v: Vec3,
    pub q: UnitQuaternion<f64>,
    pub feet: [Vec3; 2],
    pub bg: Vec3,
    pub ba: Vec3,
}

impl QuatState {
    pub fn from_robot_state(s: &RobotState) -> Self {
        let rot = nalgebra::Rotation3::from_matrix_unchecked(*s.rotation());
        Self {
            p: *s.position(),
            v: *s.velocity(),
            q: UnitQuaternion::from_rotation_matrix(&rot),
            feet: [*s.foot(Foot::Left), *s.foot(Foot::Right)],
            bg: s.bias.bg,
            ba: s.bias.ba,
        }
    }

    pub fn to_robot_state(&self) -> RobotState {
        RobotState::new(
            self.rotation(),
            self.v,
            self.p,
            self.feet[0],
            self.feet[1],
            BiasVector::new(self.bg, self.ba),
        )
    }

    pub fn rotation(&self) -> Mat3 {
        self.q.to_rotation_matrix().into_inner()
    }

    /// Raw quaternion norm (the stored value is renormalized after every write).
    pub fn quaternion_norm(&self) -> f64 {
        self.q.as_ref().norm()
    }

    /// Quaternion as `(w, x, y, z)`.
    pub fn wxyz(&self) -> [f64; 4] {
        let q: &Quaternion<f64> = self.q.as_ref();
        [q.w, q.i, q.j, q.k]
    }
}

/// Continuous-time error Jacobian `A` for bias-corrected `omega`, `accel`.
pub fn error_jacobian(state: &QuatState, omega: &Vec3, accel: &Vec3) -> QCovariance21 {
    let r = state.rotation();
    let mut a = QCovariance21::zeros();
    a.fixed_view_mut::<3, 3>(qidx::POS, qidx::VEL).fill_with_identity();
    a.fixed_view_mut::<3, 3>(qidx::VEL, qidx::ATT).copy_from(&-(r * hat(accel)));
    a.fixed_view_mut::<3, 3>(qidx::VEL, qidx::BIAS_A).copy_from(&-r);
    a.fixed_view_mut::<3, 3>(qidx::ATT, qidx::ATT).copy_from(&-hat(omega));
    a.fixed_view_mut::<3, 3>(qidx::ATT, qidx::BIAS_G).copy_from(&-Mat3::identity());
    a
}

/// Continuous process noise mapped into the error state.
pub fn process_noise(state: &QuatState, params: &NoiseParams, kin: &KinSample) -> QCovariance21 {
    let r = state.rotation();
    let eye = Mat3::identity();
    let mut q = QCovariance21::zeros();
    q.fixed_view_mut::<3, 3>(qidx::VEL, qidx::VEL)
        .copy_from(&(r * (eye * params.std_accel.powi(2)) * r.transpose()));
    q.fixed_view_mut::<3, 3>(qidx::ATT, qidx::ATT)
        .copy_from(&(eye * params.std_gyro.powi(2)));
    for foot in Foot::BOTH {
        let o = foot_offset(foot);
        let qc = contact_noise(params, kin.foot(foot));
        q.fixed_view_mut::<3, 3>(o, o).copy_from(&(r * qc * r.transpose()));
    }
    q.fixed_view_mut::<3, 3>(qidx::BIAS_G, qidx::BIAS_G)
        .copy_from(&(eye * params.std_gyro_bias.powi(2)));
    q.fixed_view_mut::<3, 3>(qidx::BIAS_A, qidx::BIAS_A)
        .copy_from(&(eye * params.std_accel_bias.powi(2)));
    q
}

pub fn initial_covariance(params: &NoiseParams) -> QCovariance21 {
    let blocks = [
        params.std0_pos,
        params.std0_vel,
        params.std0_orient,
        params.std0_foot,
        params.std0_foot,
        params.std0_bias_g,
        params.std0_bias_a,
    ];
    QCovariance21::from_diagonal(&SMatrix::<f64, DIM, 1>::from_fn(|i, _| blocks[i / 3].powi(2)))
}

/// Mean propagation shared with the invariant filter, plus first-order covariance propagation.
pub fn qekf_predict(
    state: &QuatState,
    p: &QCovariance21,
    imu: &ImuSample,
    kin: &KinSample,
    dt: f64,
    params: &NoiseParams,
    integrator: Integrator,
) -> Result<(QuatState, QCovariance21), FilterError> {
    if !(dt > 0.0) {
        return Err(FilterError::InvalidDt(dt));
    }
    let omega = imu.omega - state.bg;
    let accel = imu.accel - state.ba;

    let a = error_jacobian(state, &omega, &accel);
    let qc = process_noise(state, params, kin);
    let phi = QCovariance21::identity() + a * dt;
    let qd = symmetrize(&(phi * qc * phi.transpose() * dt));
    let p_next = symmetrize(&(phi * p * phi.transpose() + qd));

    let (_, v, pos) = strapdown(&state.rotation(), &state.v, &state.p, &omega, &accel, dt, integrator);
    let mut q = state.q * UnitQuaternion::from_scaled_axis(omega * dt);
    q.renormalize();
    Ok((
        QuatState {
            p: pos,
            v,
            q,
            ..*state
        },
        p_next,
    ))
}

/// Residual and Jacobian of one foot's kinematic measurement about `state`.
pub fn foot_residual(state: &QuatState, kin: &KinSample, foot: Foot) -> (Vec3, SMatrix<f64, 3, DIM>) {
    let r = state.rotation();
    let rel = r.transpose() * (state.feet[foot.index()] - state.p);
    let residual = kin.foot(foot).p_fk - rel;
    let mut h = SMatrix::<f64, 3, DIM>::zeros();
    h.fixed_view_mut::<3, 3>(0, qidx::POS).copy_from(&-r.transpose());
    h.fixed_view_mut::<3, 3>(0, qidx::ATT).copy_from(&hat(&rel));
    h.fixed_view_mut::<3, 3>(0, foot_offset(foot)).copy_from(&r.transpose());
    (residual, h)
}

fn to_dyn<const R: usize, const C: usize>(m: &SMatrix<f64, R, C>) -> DMatrix<f64> {
    DMatrix::from_column_slice(R, C, m.as_slice())
}

/// Applies an error-state correction to the nominal state.
pub fn inject(state: &QuatState, dx: &DVector<f64>) -> QuatState {
    let block = |o: usize| Vec3::new(dx[o], dx[o + 1], dx[o + 2]);
    let mut q = state.q * UnitQuaternion::from_scaled_axis(block(qidx::ATT));
    q.renormalize();
    QuatState {
        p: state.p + block(qidx::POS),
        v: state.v + block(qidx::VEL),
        q,
        feet: [
            state.feet[0] + block(qidx::FOOT_L),
            state.feet[1] + block(qidx::FOOT_R),
        ],
        bg: state.bg + block(qidx::BIAS_G),
        ba: state.ba + block(qidx::BIAS_A),
    }
}

/// Sequential per-foot correction, all feet linearized about the prior.
/// Returns the accumulated error-state correction and the posterior covariance.
pub fn sequential_correction(
    state: &QuatState,
    p: &QCovariance21,
    kin: &KinSample,
    params: &NoiseParams,
) -> Result<(DVector<f64>, QCovariance21), FilterError> {
    let n = DMatrix::identity(3, 3) * params.std_fk.powi(2);
    let mut dx = DVector::zeros(DIM);
    let mut cov = *p;
    for foot in Foot::BOTH.into_iter().filter(|&f| kin.foot(f).contact) {
        let (r, h) = foot_residual(state, kin, foot);
        let h = to_dyn(&h);
        let innovation = DVector::from_column_slice(r.as_slice()) - &h * &dx;
        let (k, post) = gain_and_joseph(&cov, &h, &n)?;
        dx += k * innovation;
        cov = post;
    }
    Ok((dx, cov))
}

/// Same correction computed with both feet stacked into one measurement.
pub fn stacked_correction(
    state: &QuatState,
    p: &QCovariance21,
    kin: &KinSample,
    params: &NoiseParams,
) -> Result<(DVector<f64>, QCovariance21), FilterError> {
    let feet: Vec<Foot> = Foot::BOTH.into_iter().filter(|&f| kin.foot(f).contact).collect();
    let m = feet.len();
    if m == 0 {
        return Ok((DVector::zeros(DIM), *p));
    }
    let mut h = DMatrix::zeros(3 * m, DIM);
    let mut r = DVector::zeros(3 * m);
    for (i, &foot) in feet.iter().enumerate() {
        let (res, hf) = foot_residual(state, kin, foot);
        h.view_mut((3 * i, 0), (3, DIM)).copy_from(&hf);
        r.rows_mut(3 * i, 3).copy_from(&res);
    }
    let n = DMatrix::identity(3 * m, 3 * m) * params.std_fk.powi(2);
    let (k, post) = gain_and_joseph(p, &h, &n)?;
    Ok((k * r, post))
}

/// Kinematic correction; a no-op when no foot is in contact.
pub fn qekf_update(
    state: &QuatState,
    p: &QCovariance21,
    kin: &KinSample,
    params: &NoiseParams,
) -> Result<(QuatState, QCovariance21), FilterError> {
    let (dx, cov) = sequential_correction(state, p, kin, params)?;
    if dx.iter().any(|d| !d.is_finite()) {
        return Err(FilterError::NonFinite("correction"));
    }
    Ok((inject(state, &dx), cov))
}

#[derive(Clone, Debug)]
pub struct Qekf {
    state: QuatState,
    cov: QCovariance21,
    params: NoiseParams,
    integrator: Integrator,
}

impl Qekf {
    pub fn new(state: QuatState, cov: QCovariance21, params: NoiseParams) -> Self {
        Self {
            state,
            cov,
            params,
            integrator: Integrator::ClosedForm,
        }
    }

    /// Starts from the given estimate with the diagonal initial covariance.
    pub fn from_robot_state(init: &RobotState, params: &NoiseParams) -> Self {
        Self::new(QuatState::from_robot_state(init), initial_covariance(params), *params)
    }

    pub fn with_integrator(mut self, integrator: Integrator) -> Self {
        self.integrator = integrator;
        self
    }

    pub fn state(&self) -> &QuatState {
        &self.state
    }

    pub fn covariance(&self) -> &QCovariance21 {
        &self.cov
    }

    pub fn step(&mut self, imu: &ImuSample, kin: &KinSample, dt: f64) -> Result<(), FilterError> {
        let (s, p) = qekf_predict(&self.state, &self.cov, imu, kin, dt, &self.params, self.integrator)?;
        let (s, p) = qekf_update(&s, &p, kin, &self.params)?;
        self.state = s;
        self.cov = p;
        Ok(())
    }
}

impl Estimator for Qekf {
    fn kind(&self) -> FilterKind {
        FilterKind::Qekf
    }

    fn step(&mut self, imu: &ImuSample, kin: &KinSample, dt: f64) -> Result<(), FilterError> {
        Qekf::step(self, imu, kin, dt)
    }

    fn estimate(&self) -> RobotState {
        self.state.to_robot_state()
    }

    fn covariance(&self) -> &Covariance21 {
        &self.cov
    }

    fn quaternion_norm(&self) -> Option<f64> {
        Some(self.state.quaternion_norm())
    }
}
