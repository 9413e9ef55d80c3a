//! Right-invariant EKF on SE_4(3) with IMU-bias augmentation.
//!
//! Error convention: `η = X̄ X⁻¹ = exp(ξ^∧)` for the group part and
//! `ζ = θ̄ − θ` for the biases. Prediction integrates the IMU in closed form;
//! the correction uses forward-kinematics contact positions written as
//! right-invariant observations `Y = X⁻¹ b + V`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::FilterError;
use crate::lie::{hat, orthonormalize, so3_exp, so3_gamma2, so3_left_jacobian, Mat3, Tangent43, Vec3, SE43};
use crate::state::{idx, symmetrize, BiasVector, Covariance21, Foot, FootKin, ImuSample, KinSample, NoiseParams, RobotState, DIM};

/// Standard gravity in the world frame (z up).
pub const GRAVITY: Vec3 = Vec3::new(0.0, 0.0, -9.81);

/// Variance added to a swinging foot's contact noise.
pub const SWING_INFLATION: f64 = 1e5;

/// Innovation covariances with a larger condition number are rejected.
pub const MAX_INNOVATION_CONDITION: f64 = 1e12;

/// Steps between polar re-orthonormalizations of the rotation estimate.
pub const REORTHONORMALIZE_EVERY: u64 = 1000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Integrator {
    /// Exact integration for piecewise-constant body rates (Γ₀, Γ₁, Γ₂).
    #[default]
    ClosedForm,
    /// First-order rotation, constant world acceleration.
    Euler,
}

impl std::str::FromStr for Integrator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "closed_form" | "closed-form" => Ok(Self::ClosedForm),
            "euler" => Ok(Self::Euler),
            other => Err(format!("unknown integrator `{other}`")),
        }
    }
}

/// Propagates `(R, v, p)` over `dt` with bias-corrected rate `omega` and specific force `accel`.
pub fn strapdown(
    r: &Mat3,
    v: &Vec3,
    p: &Vec3,
    omega: &Vec3,
    accel: &Vec3,
    dt: f64,
    integrator: Integrator,
) -> (Mat3, Vec3, Vec3) {
    let phi = omega * dt;
    let r_next = r * so3_exp(&phi);
    match integrator {
        Integrator::ClosedForm => {
            let v_next = v + (r * so3_left_jacobian(&phi) * accel) * dt + GRAVITY * dt;
            let p_next =
                p + v * dt + (r * so3_gamma2(&phi) * accel) * (dt * dt) + GRAVITY * (0.5 * dt * dt);
            (r_next, v_next, p_next)
        }
        Integrator::Euler => {
            let a_world = r * accel + GRAVITY;
            (r_next, v + a_world * dt, p + v * dt + a_world * (0.5 * dt * dt))
        }
    }
}

pub fn propagate_state(state: &RobotState, imu: &ImuSample, dt: f64) -> Result<RobotState, FilterError> {
    propagate_state_with(state, imu, dt, Integrator::ClosedForm)
}

/// Mean propagation: feet and biases stay constant.
pub fn propagate_state_with(
    state: &RobotState,
    imu: &ImuSample,
    dt: f64,
    integrator: Integrator,
) -> Result<RobotState, FilterError> {
    if !(dt > 0.0) {
        return Err(FilterError::InvalidDt(dt));
    }
    let omega = imu.omega - state.bias.bg;
    let accel = imu.accel - state.bias.ba;
    let (r, v, p) = strapdown(
        state.rotation(),
        state.velocity(),
        state.position(),
        &omega,
        &accel,
        dt,
        integrator,
    );
    let mut x = state.x;
    x.set_rotation(r);
    x.set_col(0, v);
    x.set_col(1, p);
    Ok(RobotState { x, bias: state.bias })
}

/// Linearized error dynamics and their discretization for one step.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictMatrices {
    /// Continuous-time error dynamics.
    pub f: Covariance21,
    /// `I + F·dt`.
    pub fk: Covariance21,
    /// `F_k Q_c F_kᵀ dt`.
    pub qd: Covariance21,
}

/// Contact-point noise covariance for one foot, inflated while swinging.
pub fn contact_noise(params: &NoiseParams, foot: &FootKin) -> Mat3 {
    let swing = if foot.contact { 0.0 } else { SWING_INFLATION };
    let var = params.std_contact_vel * params.std_contact_vel;
    foot.r_fk * (Mat3::identity() * (var + swing)) * foot.r_fk.transpose()
}

/// Continuous-time `F`. The 15×15 block acting on ξ is constant; only the
/// bias columns depend on the estimate.
pub fn error_dynamics(state: &RobotState) -> Covariance21 {
    let mut f = Covariance21::zeros();
    let r = state.rotation();
    f.fixed_view_mut::<3, 3>(idx::VEL, idx::ROT).copy_from(&hat(&GRAVITY));
    f.fixed_view_mut::<3, 3>(idx::POS, idx::VEL).copy_from(&Mat3::identity());

    f.fixed_view_mut::<3, 3>(idx::ROT, idx::BIAS_G).copy_from(&-r);
    f.fixed_view_mut::<3, 3>(idx::VEL, idx::BIAS_G).copy_from(&-(hat(state.velocity()) * r));
    f.fixed_view_mut::<3, 3>(idx::VEL, idx::BIAS_A).copy_from(&-r);
    f.fixed_view_mut::<3, 3>(idx::POS, idx::BIAS_G).copy_from(&-(hat(state.position()) * r));
    for foot in Foot::BOTH {
        f.fixed_view_mut::<3, 3>(foot.offset(), idx::BIAS_G)
            .copy_from(&-(hat(state.foot(foot)) * r));
    }
    f
}

/// Process noise `Cov(w)` in the order `(w^g, w^a, 0, w^{cL}, w^{cR}, w^{bg}, w^{ba})`.
pub fn process_noise(params: &NoiseParams, feet: &[FootKin; 2]) -> Covariance21 {
    let mut q = Covariance21::zeros();
    let eye = Mat3::identity();
    q.fixed_view_mut::<3, 3>(idx::ROT, idx::ROT)
        .copy_from(&(eye * params.std_gyro.powi(2)));
    q.fixed_view_mut::<3, 3>(idx::VEL, idx::VEL)
        .copy_from(&(eye * params.std_accel.powi(2)));
    for foot in Foot::BOTH {
        let o = foot.offset();
        q.fixed_view_mut::<3, 3>(o, o)
            .copy_from(&contact_noise(params, &feet[foot.index()]));
    }
    q.fixed_view_mut::<3, 3>(idx::BIAS_G, idx::BIAS_G)
        .copy_from(&(eye * params.std_gyro_bias.powi(2)));
    q.fixed_view_mut::<3, 3>(idx::BIAS_A, idx::BIAS_A)
        .copy_from(&(eye * params.std_accel_bias.powi(2)));
    q
}

pub fn predict_matrices(
    state: &RobotState,
    dt: f64,
    params: &NoiseParams,
    feet: &[FootKin; 2],
) -> PredictMatrices {
    let f = error_dynamics(state);
    let mut g = Covariance21::zeros();
    state.x.write_adjoint(&mut g);
    g.fixed_view_mut::<6, 6>(15, 15).fill_with_identity();
    let qc = g * process_noise(params, feet) * g.transpose();
    let fk = Covariance21::identity() + f * dt;
    let qd = symmetrize(&(fk * qc * fk.transpose() * dt));
    PredictMatrices { f, fk, qd }
}

pub fn propagate_covariance(p: &Covariance21, m: &PredictMatrices) -> Covariance21 {
    symmetrize(&(m.fk * p * m.fk.transpose() + m.qd))
}

/// Stacked right-invariant observation for the feet in contact.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub feet: Vec<Foot>,
    /// Stacked 7-blocks `(ᵦp, 0, 1, −1 at the foot slot)`.
    pub y: DVector<f64>,
    pub b: DVector<f64>,
    pub h: DMatrix<f64>,
    pub n: DMatrix<f64>,
    /// Selector `[I₃ | 0₃ₓ₄]` per foot.
    pub pi: DMatrix<f64>,
}

/// Observation matrix of one foot: `[0 0 −I (I at the foot) 0 0]`.
pub fn foot_jacobian(foot: Foot) -> nalgebra::SMatrix<f64, 3, DIM> {
    let mut h = nalgebra::SMatrix::<f64, 3, DIM>::zeros();
    h.fixed_view_mut::<3, 3>(0, idx::POS).copy_from(&-Mat3::identity());
    h.fixed_view_mut::<3, 3>(0, foot.offset()).copy_from(&Mat3::identity());
    h
}

pub fn build_observation(state: &RobotState, kin: &KinSample, params: &NoiseParams) -> Option<Observation> {
    let feet: Vec<Foot> = Foot::BOTH
        .into_iter()
        .filter(|&f| kin.foot(f).contact)
        .collect();
    if feet.is_empty() {
        return None;
    }
    let m = feet.len();
    let mut y = DVector::zeros(7 * m);
    let mut b = DVector::zeros(7 * m);
    let mut h = DMatrix::zeros(3 * m, DIM);
    let mut n = DMatrix::zeros(3 * m, 3 * m);
    let mut pi = DMatrix::zeros(3 * m, 7 * m);
    let r = state.rotation();
    let n_foot = r * (Mat3::identity() * params.std_fk.powi(2)) * r.transpose();
    for (k, &foot) in feet.iter().enumerate() {
        let (o7, o3) = (7 * k, 3 * k);
        y.fixed_rows_mut::<3>(o7).copy_from(&kin.foot(foot).p_fk);
        // slots after the 3-vector: v, p, p^{cL}, p^{cR}
        let slot = 3 + foot.column();
        for target in [&mut y, &mut b] {
            target[o7 + 4] = 1.0;
            target[o7 + slot] = -1.0;
        }
        h.fixed_view_mut::<3, DIM>(o3, 0).copy_from(&foot_jacobian(foot));
        n.fixed_view_mut::<3, 3>(o3, o3).copy_from(&n_foot);
        pi.fixed_view_mut::<3, 3>(o3, o7).fill_with_identity();
    }
    Some(Observation { feet, y, b, h, n, pi })
}

impl Observation {
    /// `Π · blkdiag(X̄, ..) · Y`.
    pub fn innovation(&self, state: &RobotState) -> DVector<f64> {
        let xm = state.x.to_matrix();
        let mut out = DVector::zeros(3 * self.feet.len());
        for k in 0..self.feet.len() {
            let block = &xm * self.y.rows(7 * k, 7);
            let sel = self.pi.view((3 * k, 7 * k), (3, 7));
            out.rows_mut(3 * k, 3).copy_from(&(sel * block));
        }
        out
    }
}

/// Symmetric positive-definite solve guard: returns the condition number of `s`.
pub(crate) fn innovation_condition(s: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(s.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(min > 0.0) || !max.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Kalman gain `P Hᵀ S⁻¹` and the Joseph-form posterior covariance.
pub(crate) fn gain_and_joseph(
    p: &Covariance21,
    h: &DMatrix<f64>,
    n: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, Covariance21), FilterError> {
    let pd = DMatrix::from_column_slice(DIM, DIM, p.as_slice());
    let pht = &pd * h.transpose();
    let s = h * &pht + n;
    let s = (&s + s.transpose()) * 0.5;
    let cond = innovation_condition(&s);
    if !(cond <= MAX_INNOVATION_CONDITION) {
        return Err(FilterError::SingularInnovation(cond));
    }
    let chol = s
        .clone()
        .cholesky()
        .ok_or(FilterError::SingularInnovation(cond))?;
    // K = P Hᵀ S⁻¹  ⇔  S Kᵀ = H P
    let k = chol.solve(&pht.transpose()).transpose();
    let ikh = DMatrix::identity(DIM, DIM) - &k * h;
    let joseph = &ikh * &pd * ikh.transpose() + &k * n * k.transpose();
    let post = Covariance21::from_column_slice(joseph.as_slice());
    Ok((k, symmetrize(&post)))
}

/// Invariant correction `X̂ = exp(ξ^∧)·X̄`, `θ̂ = θ̄ + δθ` with `(ξ, δθ) = K z`.
pub fn update(
    state: &RobotState,
    p: &Covariance21,
    obs: &Observation,
) -> Result<(RobotState, Covariance21), FilterError> {
    let z = obs.innovation(state);
    let (k, p_post) = gain_and_joseph(p, &obs.h, &obs.n)?;
    let delta = k * z;
    if delta.iter().any(|d| !d.is_finite()) {
        return Err(FilterError::NonFinite("correction"));
    }
    let xi = Tangent43::from_slice(&delta.as_slice()[..15]);
    let x = &SE43::exp(&xi) * &state.x;
    let bias = BiasVector {
        bg: state.bias.bg + delta.fixed_rows::<3>(idx::BIAS_G),
        ba: state.bias.ba + delta.fixed_rows::<3>(idx::BIAS_A),
    };
    Ok((RobotState { x, bias }, p_post))
}

/// One predict/correct cycle. `imu` holds the rates over `[t, t + dt)`,
/// `kin` the kinematics at `t + dt`; its contact flags also gate the
/// process noise of the interval.
pub fn step(
    state: &RobotState,
    p: &Covariance21,
    imu: &ImuSample,
    kin: &KinSample,
    params: &NoiseParams,
    dt: f64,
) -> Result<(RobotState, Covariance21), FilterError> {
    step_with(state, p, imu, kin, params, dt, Integrator::ClosedForm)
}

pub fn step_with(
    state: &RobotState,
    p: &Covariance21,
    imu: &ImuSample,
    kin: &KinSample,
    params: &NoiseParams,
    dt: f64,
    integrator: Integrator,
) -> Result<(RobotState, Covariance21), FilterError> {
    // linearize about the estimate at the start of the interval
    let m = predict_matrices(state, dt, params, &kin.feet);
    let predicted = propagate_state_with(state, imu, dt, integrator)?;
    let p_pred = propagate_covariance(p, &m);
    match build_observation(&predicted, kin, params) {
        Some(obs) => update(&predicted, &p_pred, &obs),
        None => Ok((predicted, p_pred)),
    }
}

/// Stateful wrapper owning the estimate and covariance.
#[derive(Clone, Debug)]
pub struct Riekf {
    state: RobotState,
    cov: Covariance21,
    params: NoiseParams,
    integrator: Integrator,
    steps: u64,
}

impl Riekf {
    pub fn new(state: RobotState, cov: Covariance21, params: NoiseParams) -> Self {
        Self {
            state,
            cov,
            params,
            integrator: Integrator::ClosedForm,
            steps: 0,
        }
    }

    pub fn with_integrator(mut self, integrator: Integrator) -> Self {
        self.integrator = integrator;
        self
    }

    pub fn state(&self) -> &RobotState {
        &self.state
    }

    pub fn covariance(&self) -> &Covariance21 {
        &self.cov
    }

    pub fn step(&mut self, imu: &ImuSample, kin: &KinSample, dt: f64) -> Result<(), FilterError> {
        let (mut state, cov) = step_with(
            &self.state,
            &self.cov,
            imu,
            kin,
            &self.params,
            dt,
            self.integrator,
        )?;
        self.steps += 1;
        if self.steps % REORTHONORMALIZE_EVERY == 0 {
            state.x.set_rotation(orthonormalize(state.rotation()));
        }
        self.state = state;
        self.cov = cov;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::so3_exp;
    use approx::assert_relative_eq;

    fn still_foot(contact: bool) -> FootKin {
        FootKin {
            p_fk: Vec3::zeros(),
            r_fk: Mat3::identity(),
            contact,
        }
    }

    fn hover_imu() -> ImuSample {
        ImuSample {
            t: 0.0,
            omega: Vec3::zeros(),
            accel: -GRAVITY,
        }
    }

    fn origin_state() -> RobotState {
        RobotState::new(
            Mat3::identity(),
            Vec3::zeros(),
            Vec3::zeros(),
            Vec3::zeros(),
            Vec3::zeros(),
            BiasVector::default(),
        )
    }

    #[test]
    fn hover_is_stationary() {
        let s = origin_state();
        for integrator in [Integrator::ClosedForm, Integrator::Euler] {
            let next = propagate_state_with(&s, &hover_imu(), 0.002, integrator).unwrap();
            assert_eq!(next, s);
        }
    }

    #[test]
    fn constant_forward_acceleration() {
        // hand integration: v += a dt, p += a dt²/2 with a = [1, 0, 0]
        let dt = 0.002;
        let imu = ImuSample {
            t: 0.0,
            omega: Vec3::zeros(),
            accel: -GRAVITY + Vec3::new(1.0, 0.0, 0.0),
        };
        let next = propagate_state(&origin_state(), &imu, dt).unwrap();
        assert_relative_eq!(*next.velocity(), Vec3::new(dt, 0.0, 0.0), epsilon = 1e-15);
        assert_relative_eq!(*next.position(), Vec3::new(0.5 * dt * dt, 0.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn pure_yaw_rate() {
        let imu = ImuSample {
            t: 0.0,
            omega: Vec3::new(0.0, 0.0, 1.0),
            accel: -GRAVITY,
        };
        let mut s = origin_state();
        for _ in 0..1000 {
            s = propagate_state(&s, &imu, 0.002).unwrap();
        }
        assert_relative_eq!(*s.rotation(), so3_exp(&Vec3::new(0.0, 0.0, 2.0)), epsilon = 1e-12);
        assert_relative_eq!(s.position().norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn closed_form_is_exact_for_constant_rates() {
        // Constant body rate and specific force: one big closed-form step must
        // match many tiny Euler steps.
        let omega = Vec3::new(0.3, -0.5, 0.9);
        let accel = Vec3::new(0.4, 0.1, 9.5);
        let r0 = so3_exp(&Vec3::new(0.1, 0.2, 0.3));
        let v0 = Vec3::new(0.2, 0.0, -0.1);
        let p0 = Vec3::new(1.0, 2.0, 0.8);
        let (r1, v1, p1) = strapdown(&r0, &v0, &p0, &omega, &accel, 0.5, Integrator::ClosedForm);

        let n = 200_000;
        let h = 0.5 / n as f64;
        let (mut r, mut v, mut p) = (r0, v0, p0);
        for _ in 0..n {
            // midpoint in the world-frame acceleration
            let r_mid = r * so3_exp(&(omega * (0.5 * h)));
            let a = r_mid * accel + GRAVITY;
            p += v * h + a * (0.5 * h * h);
            v += a * h;
            r *= so3_exp(&(omega * h));
        }
        assert_relative_eq!(r1, r, epsilon = 1e-9);
        assert_relative_eq!(v1, v, epsilon = 1e-9);
        assert_relative_eq!(p1, p, epsilon = 1e-9);
    }

    #[test]
    fn invalid_dt_rejected() {
        for dt in [0.0, -0.1, f64::NAN] {
            assert!(matches!(
                propagate_state(&origin_state(), &hover_imu(), dt),
                Err(FilterError::InvalidDt(_))
            ));
        }
    }

    #[test]
    fn f_at_identity_has_only_constant_blocks() {
        let f = error_dynamics(&origin_state());
        let mut expected = Covariance21::zeros();
        expected
            .fixed_view_mut::<3, 3>(idx::VEL, idx::ROT)
            .copy_from(&hat(&GRAVITY));
        expected
            .fixed_view_mut::<3, 3>(idx::POS, idx::VEL)
            .fill_with_identity();
        assert_eq!(f.fixed_view::<15, 15>(0, 0), expected.fixed_view::<15, 15>(0, 0));
        // bias columns at the identity: −I for gyro in R row and accel in v row
        assert_eq!(f.fixed_view::<3, 3>(idx::ROT, idx::BIAS_G), -Mat3::identity());
        assert_eq!(f.fixed_view::<3, 3>(idx::VEL, idx::BIAS_A), -Mat3::identity());
        assert_eq!(f.fixed_view::<6, 21>(15, 0), nalgebra::SMatrix::<f64, 6, 21>::zeros());
    }

    #[test]
    fn swing_inflates_contact_noise() {
        let params = NoiseParams::default();
        let stance = process_noise(&params, &[still_foot(true), still_foot(true)]);
        let swing = process_noise(&params, &[still_foot(false), still_foot(true)]);
        for i in 0..3 {
            let o = idx::FOOT_L + i;
            assert_relative_eq!(swing[(o, o)] - stance[(o, o)], SWING_INFLATION, epsilon = 1e-9);
            let o = idx::FOOT_R + i;
            assert_eq!(swing[(o, o)], stance[(o, o)]);
        }
    }

    #[test]
    fn zero_dt_limit() {
        let params = NoiseParams::default();
        let m = predict_matrices(&origin_state(), 1e-300, &params, &[still_foot(true); 2]);
        assert_relative_eq!(m.fk, Covariance21::identity(), epsilon = 1e-290);
        assert!(m.qd.amax() < 1e-290);
    }

    #[test]
    fn covariance_propagation_basics() {
        let params = NoiseParams::default();
        let m = predict_matrices(&origin_state(), 0.002, &params, &[still_foot(true); 2]);
        assert_eq!(propagate_covariance(&Covariance21::zeros(), &m), m.qd);
        let p = params.initial_covariance();
        let identity = PredictMatrices {
            f: Covariance21::zeros(),
            fk: Covariance21::identity(),
            qd: m.qd,
        };
        assert_eq!(propagate_covariance(&p, &identity), symmetrize(&(p + m.qd)));
    }

    fn kin(l: bool, r: bool) -> KinSample {
        KinSample {
            t: 0.0,
            feet: [
                FootKin {
                    p_fk: Vec3::new(0.1, 0.05, -0.8),
                    r_fk: Mat3::identity(),
                    contact: l,
                },
                FootKin {
                    p_fk: Vec3::new(0.1, -0.05, -0.8),
                    r_fk: Mat3::identity(),
                    contact: r,
                },
            ],
        }
    }

    #[test]
    fn observation_shapes() {
        let params = NoiseParams::default();
        let s = origin_state();
        assert!(build_observation(&s, &kin(false, false), &params).is_none());

        let single = build_observation(&s, &kin(true, false), &params).unwrap();
        assert_eq!(single.y.len(), 7);
        assert_eq!(single.y.rows(3, 4).as_slice(), &[0.0, 1.0, -1.0, 0.0]);
        assert_eq!(single.b.as_slice(), &[0.0, 0.0, 0.0, 0.0, 1.0, -1.0, 0.0]);
        assert_eq!(single.h.shape(), (3, 21));
        assert_eq!(single.h.view((0, idx::POS), (3, 3)), -DMatrix::<f64>::identity(3, 3));
        assert_eq!(single.h.view((0, idx::FOOT_L), (3, 3)), DMatrix::<f64>::identity(3, 3));
        assert_eq!(single.h.columns(15, 6).amax(), 0.0);

        let right = build_observation(&s, &kin(false, true), &params).unwrap();
        assert_eq!(right.y.rows(3, 4).as_slice(), &[0.0, 1.0, 0.0, -1.0]);
        assert_eq!(right.h.view((0, idx::FOOT_R), (3, 3)), DMatrix::<f64>::identity(3, 3));

        let double = build_observation(&s, &kin(true, true), &params).unwrap();
        assert_eq!(double.y.len(), 14);
        assert_eq!(double.h.shape(), (6, 21));
        assert_eq!(double.n.shape(), (6, 6));
        assert_eq!(double.n.view((0, 3), (3, 3)).amax(), 0.0);
        assert_eq!(double.pi.shape(), (6, 14));
    }

    #[test]
    fn consistent_measurement_leaves_state_unchanged() {
        let params = NoiseParams::default();
        let s = RobotState::new(
            Mat3::identity(),
            Vec3::zeros(),
            Vec3::new(0.0, 0.0, 0.8),
            Vec3::new(0.1, 0.05, 0.0),
            Vec3::new(0.1, -0.05, 0.0),
            BiasVector::default(),
        );
        let obs = build_observation(&s, &kin(true, false), &params).unwrap();
        assert_eq!(obs.innovation(&s).as_slice(), &[0.0, 0.0, 0.0]);
        let (post, _) = update(&s, &params.initial_covariance(), &obs).unwrap();
        assert_eq!(post, s);
    }

    #[test]
    fn zero_gain_changes_nothing() {
        let params = NoiseParams::default();
        let s = origin_state();
        let obs = build_observation(&s, &kin(true, true), &params).unwrap();
        let (post, p) = update(&s, &Covariance21::zeros(), &obs).unwrap();
        assert_eq!(post, s);
        assert_eq!(p, Covariance21::zeros());
    }

    #[test]
    fn singular_innovation_detected() {
        let params = NoiseParams {
            std_fk: 1e-9,
            ..NoiseParams::default()
        };
        let s = origin_state();
        let obs = build_observation(&s, &kin(true, false), &params).unwrap();
        let mut p = Covariance21::zeros();
        p[(idx::POS, idx::POS)] = 1e4;
        assert!(matches!(
            update(&s, &p, &obs),
            Err(FilterError::SingularInnovation(_))
        ));
    }
}
