//! Kinematic bipedal walking generator.
//!
//! Footsteps are laid along a turning path; the base follows a C² quintic
//! Hermite spline through the stance midpoints at constant height, with a
//! small lateral sway and roll toward the stance foot. The swing foot follows
//! a cycloid, so it leaves and reaches the ground with zero velocity. All base
//! derivatives are analytic, which lets the IMU be synthesized exactly.

use rand_distr::{Distribution, Normal};
use std::f64::consts::PI;

use crate::error::ConfigError;
use crate::lie::{Mat3, Vec3};
use crate::riekf::GRAVITY;
use crate::rng::{derive_seed, rng_from, stream};
use crate::state::{BiasVector, Foot, FootKin, ImuSample, KinSample, RobotState};

/// Constant gyro bias used by default in simulation, rad/s.
pub const DEFAULT_GYRO_BIAS: [f64; 3] = [0.002, -0.001, 0.0015];
/// Constant accelerometer bias used by default in simulation, m/s².
pub const DEFAULT_ACCEL_BIAS: [f64; 3] = [0.02, 0.01, -0.015];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaitConfig {
    /// Forward advance of the stance midpoint per step, m.
    pub step_length: f64,
    /// Heading change per step, rad.
    pub turn_per_step: f64,
    pub step_time: f64,
    /// Double-support share at the start of each step, s.
    pub dsp_time: f64,
    /// Sampling rate, Hz.
    pub control_rate: f64,
    pub n_steps: usize,
    pub base_height: f64,
    /// Lateral distance between the feet, m.
    pub foot_separation: f64,
    pub swing_height: f64,
    /// Peak lateral base sway toward the stance foot, m.
    pub sway_amplitude: f64,
    /// Peak base roll toward the stance foot, rad.
    pub roll_amplitude: f64,
    pub rng_seed: u64,
}

impl Default for GaitConfig {
    fn default() -> Self {
        Self {
            step_length: 0.17,
            turn_per_step: 0.15,
            step_time: 1.0,
            dsp_time: 0.1,
            control_rate: 500.0,
            n_steps: 60,
            base_height: 0.8,
            foot_separation: 0.2,
            swing_height: 0.05,
            sway_amplitude: 0.02,
            roll_amplitude: 0.02,
            rng_seed: 42,
        }
    }
}

impl GaitConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: &str| Err(ConfigError::Invalid(msg.to_string()));
        if !(self.step_time > 0.0 && self.step_time.is_finite()) {
            return bad("step_time must be positive");
        }
        if !(self.dsp_time > 0.0 && self.dsp_time < self.step_time) {
            return bad("dsp_time must lie in (0, step_time)");
        }
        if !(self.control_rate > 0.0 && self.control_rate.is_finite()) {
            return bad("control_rate must be positive");
        }
        if self.n_steps == 0 {
            return bad("n_steps must be at least 1");
        }
        for (name, v) in [
            ("step_length", self.step_length),
            ("turn_per_step", self.turn_per_step),
            ("base_height", self.base_height),
            ("foot_separation", self.foot_separation),
            ("swing_height", self.swing_height),
            ("sway_amplitude", self.sway_amplitude),
            ("roll_amplitude", self.roll_amplitude),
        ] {
            if !v.is_finite() {
                return Err(ConfigError::Invalid(format!("{name} must be finite")));
            }
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.n_steps as f64 * self.step_time
    }

    /// Number of sampling intervals; samples run from `t = 0` to `duration()` inclusive.
    pub fn n_intervals(&self) -> usize {
        (self.duration() * self.control_rate).round() as usize
    }

    /// Swing foot of step `j` (1-based): the left foot leads.
    pub fn swing_foot(step: usize) -> Foot {
        if step % 2 == 1 {
            Foot::Left
        } else {
            Foot::Right
        }
    }
}

/// Sensor noise added to the synthetic measurements.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimNoise {
    pub std_gyro: f64,
    pub std_accel: f64,
    pub std_fk: f64,
}

impl Default for SimNoise {
    fn default() -> Self {
        Self {
            std_gyro: 0.05,
            std_accel: 0.015,
            std_fk: 0.002,
        }
    }
}

impl SimNoise {
    pub fn zero() -> Self {
        Self {
            std_gyro: 0.0,
            std_accel: 0.0,
            std_fk: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroundTruthRecord {
    pub t: f64,
    pub r: Mat3,
    pub v: Vec3,
    pub p: Vec3,
    pub feet: [Vec3; 2],
    pub foot_yaw: [f64; 2],
    pub contact: [bool; 2],
    /// Body angular rate `vee(RᵀṘ)`, rad/s.
    pub omega: Vec3,
    /// World-frame acceleration `v̇`, m/s².
    pub accel: Vec3,
}

impl GroundTruthRecord {
    pub fn to_robot_state(&self, bias: BiasVector) -> RobotState {
        RobotState::new(self.r, self.v, self.p, self.feet[0], self.feet[1], bias)
    }

    pub fn yaw(&self) -> f64 {
        self.r[(1, 0)].atan2(self.r[(0, 0)])
    }
}

/// Value with first and second time derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Jet {
    v: f64,
    d: f64,
    dd: f64,
}

impl Jet {
    #[cfg(test)]
    fn constant(v: f64) -> Self {
        Self { v, d: 0.0, dd: 0.0 }
    }

    fn scale(self, k: f64) -> Self {
        Self {
            v: self.v * k,
            d: self.d * k,
            dd: self.dd * k,
        }
    }

    fn add(self, o: Self) -> Self {
        Self {
            v: self.v + o.v,
            d: self.d + o.d,
            dd: self.dd + o.dd,
        }
    }

    fn mul(self, o: Self) -> Self {
        Self {
            v: self.v * o.v,
            d: self.d * o.v + self.v * o.d,
            dd: self.dd * o.v + 2.0 * self.d * o.d + self.v * o.dd,
        }
    }

    fn sin(self) -> Self {
        let (s, c) = self.v.sin_cos();
        Self {
            v: s,
            d: c * self.d,
            dd: c * self.dd - s * self.d * self.d,
        }
    }

    fn cos(self) -> Self {
        let (s, c) = self.v.sin_cos();
        Self {
            v: c,
            d: -s * self.d,
            dd: -s * self.dd - c * self.d * self.d,
        }
    }
}

/// Quintic Hermite segment with zero end accelerations.
/// `tau` in [0, 1], `h` the segment duration; derivatives are in time.
fn quintic(p0: f64, v0: f64, p1: f64, v1: f64, h: f64, tau: f64) -> Jet {
    let (t2, t3) = (tau * tau, tau * tau * tau);
    let (t4, t5) = (t3 * tau, t3 * t2);
    let h0 = [
        1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5,
        -30.0 * t2 + 60.0 * t3 - 30.0 * t4,
        -60.0 * tau + 180.0 * t2 - 120.0 * t3,
    ];
    let h1 = [
        tau - 6.0 * t3 + 8.0 * t4 - 3.0 * t5,
        1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4,
        -36.0 * tau + 96.0 * t2 - 60.0 * t3,
    ];
    let h4 = [
        -4.0 * t3 + 7.0 * t4 - 3.0 * t5,
        -12.0 * t2 + 28.0 * t3 - 15.0 * t4,
        -24.0 * tau + 84.0 * t2 - 60.0 * t3,
    ];
    let h5 = [1.0 - h0[0], -h0[1], -h0[2]];
    let eval = |k: usize| h0[k] * p0 + h1[k] * v0 * h + h4[k] * v1 * h + h5[k] * p1;
    Jet {
        v: eval(0),
        d: eval(1) / h,
        dd: eval(2) / (h * h),
    }
}

fn rot_z(yaw: f64) -> Mat3 {
    let (s, c) = yaw.sin_cos();
    Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

fn rot_x(roll: f64) -> Mat3 {
    let (s, c) = roll.sin_cos();
    Mat3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

#[derive(Clone, Copy, Debug)]
struct Footprint {
    pos: Vec3,
    yaw: f64,
}

/// Precomputed footstep plan and base knots.
struct Plan {
    cfg: GaitConfig,
    /// `prints[j][foot]`: footprint of each foot after step j (j = 0 is the start).
    prints: Vec<[Footprint; 2]>,
    /// Base knots `(x, y, yaw)` after each step, with knot velocities.
    knots: Vec<[f64; 3]>,
    knot_vel: Vec<[f64; 3]>,
}

impl Plan {
    fn new(cfg: GaitConfig) -> Self {
        let n = cfg.n_steps;
        let half = 0.5 * cfg.foot_separation;
        let place = |c: Vec3, yaw: f64, foot: Foot| {
            let side = if foot == Foot::Left { half } else { -half };
            Footprint {
                pos: c + rot_z(yaw) * Vec3::new(0.0, side, 0.0),
                yaw,
            }
        };

        let mut centre = Vec3::zeros();
        let mut heading = 0.0;
        let mut prints = vec![[place(centre, 0.0, Foot::Left), place(centre, 0.0, Foot::Right)]];
        for j in 1..=n {
            // every step turns; the last one closes the stance without advancing
            if j < n {
                centre += rot_z(heading + 0.5 * cfg.turn_per_step) * Vec3::new(cfg.step_length, 0.0, 0.0);
            }
            heading += cfg.turn_per_step;
            let mut next = prints[j - 1];
            let swing = GaitConfig::swing_foot(j);
            next[swing.index()] = place(centre, heading, swing);
            prints.push(next);
        }

        let knots: Vec<[f64; 3]> = prints
            .iter()
            .enumerate()
            .map(|(j, fp)| {
                let mid = (fp[0].pos + fp[1].pos) * 0.5;
                [mid.x, mid.y, j as f64 * cfg.turn_per_step]
            })
            .collect();
        let knot_vel = (0..=n)
            .map(|j| {
                if j == 0 || j == n {
                    [0.0; 3]
                } else {
                    std::array::from_fn(|k| (knots[j + 1][k] - knots[j - 1][k]) / (2.0 * cfg.step_time))
                }
            })
            .collect();
        Self {
            cfg,
            prints,
            knots,
            knot_vel,
        }
    }

    /// Step index (1-based) and phase in [0, 1) of time `t`; `(n, 1)` at or after the end.
    fn locate(&self, t: f64) -> (usize, f64) {
        let n = self.cfg.n_steps;
        let s = t / self.cfg.step_time;
        if s >= n as f64 {
            return (n, 1.0);
        }
        let j = (s.floor() as usize).min(n - 1) + 1;
        (j, s - (j - 1) as f64)
    }

    fn record(&self, t: f64) -> GroundTruthRecord {
        let cfg = &self.cfg;
        let (j, tau) = self.locate(t);
        let h = cfg.step_time;
        let seg = |k: usize| {
            quintic(
                self.knots[j - 1][k],
                self.knot_vel[j - 1][k],
                self.knots[j][k],
                self.knot_vel[j][k],
                h,
                tau,
            )
        };
        let (xs, ys, yaw) = (seg(0), seg(1), seg(2));

        let swing = GaitConfig::swing_foot(j);
        // lean toward the stance foot
        let side = if swing == Foot::Left { -1.0 } else { 1.0 };
        let phase = Jet {
            v: PI * tau,
            d: PI / h,
            dd: 0.0,
        };
        let bump = phase.sin();
        let sway = bump.scale(side * cfg.sway_amplitude);
        let roll = bump.scale(-side * cfg.roll_amplitude);

        let px = xs.add(sway.mul(yaw.sin()).scale(-1.0));
        let py = ys.add(sway.mul(yaw.cos()));

        let r = rot_z(yaw.v) * rot_x(roll.v);
        let omega = Vec3::new(roll.d, yaw.d * roll.v.sin(), yaw.d * roll.v.cos());

        let mut feet = [Vec3::zeros(); 2];
        let mut foot_yaw = [0.0; 2];
        let mut contact = [true; 2];
        for foot in Foot::BOTH {
            let i = foot.index();
            let (from, to) = (self.prints[j - 1][i], self.prints[j][i]);
            let swing_t = tau * h - cfg.dsp_time;
            let ssp = h - cfg.dsp_time;
            if foot == swing && swing_t > 0.0 && tau < 1.0 {
                let u = swing_t / ssp;
                let s = u - (2.0 * PI * u).sin() / (2.0 * PI);
                let lift = cfg.swing_height * 0.5 * (1.0 - (2.0 * PI * u).cos());
                feet[i] = from.pos + (to.pos - from.pos) * s + Vec3::new(0.0, 0.0, lift);
                foot_yaw[i] = from.yaw + (to.yaw - from.yaw) * s;
                contact[i] = false;
            } else if foot == swing && tau >= 1.0 {
                feet[i] = to.pos;
                foot_yaw[i] = to.yaw;
            } else {
                feet[i] = from.pos;
                foot_yaw[i] = from.yaw;
            }
        }

        GroundTruthRecord {
            t,
            r,
            v: Vec3::new(px.d, py.d, 0.0),
            p: Vec3::new(px.v, py.v, cfg.base_height),
            feet,
            foot_yaw,
            contact,
            omega,
            accel: Vec3::new(px.dd, py.dd, 0.0),
        }
    }
}

/// Samples the ground truth at `k / control_rate` for `k = 0..=n_intervals`.
pub fn generate_trajectory(cfg: &GaitConfig) -> Result<Vec<GroundTruthRecord>, ConfigError> {
    cfg.validate()?;
    let plan = Plan::new(*cfg);
    Ok((0..=cfg.n_intervals())
        .map(|k| plan.record(k as f64 / cfg.control_rate))
        .collect())
}

/// Final footstep-path heading (sum of per-step turns).
pub fn final_heading(cfg: &GaitConfig) -> f64 {
    cfg.n_steps as f64 * cfg.turn_per_step
}

fn gaussian(std: f64) -> Normal<f64> {
    // std >= 0 is validated by callers; Normal rejects only negative/NaN
    Normal::new(0.0, std).expect("noise standard deviation must be non-negative")
}

/// IMU readings `ω̃ = ω + b_g + n_g`, `ã = Rᵀ(v̇ − g) + b_a + n_a`.
pub fn synthesize_imu(
    truth: &[GroundTruthRecord],
    noise: &SimNoise,
    bias: &BiasVector,
    seed: u64,
) -> Vec<ImuSample> {
    let mut rng = rng_from(seed);
    let (ng, na) = (gaussian(noise.std_gyro), gaussian(noise.std_accel));
    truth
        .iter()
        .map(|rec| {
            let mut draw3 = |d: &Normal<f64>| Vec3::new(d.sample(&mut rng), d.sample(&mut rng), d.sample(&mut rng));
            let wn = draw3(&ng);
            let an = draw3(&na);
            ImuSample {
                t: rec.t,
                omega: rec.omega + bias.bg + wn,
                accel: rec.r.transpose() * (rec.accel - GRAVITY) + bias.ba + an,
            }
        })
        .collect()
}

/// Forward-kinematics readings `Rᵀ(p_c − p) + n` for both feet at every sample.
pub fn synthesize_kinematics(truth: &[GroundTruthRecord], noise: &SimNoise, seed: u64) -> Vec<KinSample> {
    let mut rng = rng_from(seed);
    let nf = gaussian(noise.std_fk);
    truth
        .iter()
        .map(|rec| {
            let rt = rec.r.transpose();
            let feet = std::array::from_fn(|i| {
                let n = Vec3::new(nf.sample(&mut rng), nf.sample(&mut rng), nf.sample(&mut rng));
                FootKin {
                    p_fk: rt * (rec.feet[i] - rec.p) + n,
                    r_fk: rt * rot_z(rec.foot_yaw[i]),
                    contact: rec.contact[i],
                }
            });
            KinSample { t: rec.t, feet }
        })
        .collect()
}

/// Ground truth plus both measurement streams.
#[derive(Clone, Debug, PartialEq)]
pub struct SimLogs {
    pub truth: Vec<GroundTruthRecord>,
    pub imu: Vec<ImuSample>,
    pub kin: Vec<KinSample>,
    /// Biases that were added to the IMU.
    pub bias: BiasVector,
}

impl SimLogs {
    pub fn truth_state(&self, k: usize) -> RobotState {
        self.truth[k].to_robot_state(self.bias)
    }

    pub fn duration(&self) -> f64 {
        self.truth.last().map_or(0.0, |r| r.t) - self.truth.first().map_or(0.0, |r| r.t)
    }

    /// Horizontal distance covered by the base divided by duration, m/s.
    pub fn average_speed(&self) -> f64 {
        let mut dist = 0.0;
        for w in self.truth.windows(2) {
            let d = w[1].p - w[0].p;
            dist += d.xy().norm();
        }
        let dur = self.duration();
        if dur > 0.0 {
            dist / dur
        } else {
            0.0
        }
    }
}

pub fn default_bias() -> BiasVector {
    BiasVector::new(Vec3::from(DEFAULT_GYRO_BIAS), Vec3::from(DEFAULT_ACCEL_BIAS))
}

/// Generates truth and measurements; the noise streams derive from `cfg.rng_seed`.
pub fn simulate(cfg: &GaitConfig, noise: &SimNoise, bias: &BiasVector) -> Result<SimLogs, ConfigError> {
    for (name, v) in [
        ("std_gyro", noise.std_gyro),
        ("std_accel", noise.std_accel),
        ("std_fk", noise.std_fk),
    ] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(ConfigError::Invalid(format!("simulation noise {name} must be >= 0")));
        }
    }
    let truth = generate_trajectory(cfg)?;
    let imu = synthesize_imu(&truth, noise, bias, derive_seed(cfg.rng_seed, stream::IMU_NOISE, 0));
    let kin = synthesize_kinematics(&truth, noise, derive_seed(cfg.rng_seed, stream::KIN_NOISE, 0));
    Ok(SimLogs {
        truth,
        imu,
        kin,
        bias: *bias,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// `vee(RᵀṘ)` by central differences of two rotations `h` apart.
    fn body_rate_fd(r_prev: &Mat3, r_next: &Mat3, h: f64) -> Vec3 {
        crate::lie::so3_log(&(r_prev.transpose() * r_next)) / h
    }

    fn cfg(n_steps: usize, turn: f64) -> GaitConfig {
        GaitConfig {
            n_steps,
            turn_per_step: turn,
            ..GaitConfig::default()
        }
    }

    #[test]
    fn quintic_boundary_conditions() {
        let j0 = quintic(1.0, 0.5, 3.0, -0.2, 2.0, 0.0);
        let j1 = quintic(1.0, 0.5, 3.0, -0.2, 2.0, 1.0);
        assert_relative_eq!(j0.v, 1.0);
        assert_relative_eq!(j0.d, 0.5);
        assert_relative_eq!(j0.dd, 0.0);
        assert_relative_eq!(j1.v, 3.0, epsilon = 1e-14);
        assert_relative_eq!(j1.d, -0.2, epsilon = 1e-14);
        assert_relative_eq!(j1.dd, 0.0, epsilon = 1e-13);
    }

    #[test]
    fn jet_derivatives_match_finite_differences() {
        let f = |t: f64| {
            let x = Jet { v: t, d: 1.0, dd: 0.0 };
            x.mul(x).sin().mul(x.cos()).add(Jet::constant(2.0))
        };
        let (t, h) = (0.7, 1e-4);
        let j = f(t);
        assert_relative_eq!(j.d, (f(t + h).v - f(t - h).v) / (2.0 * h), epsilon = 1e-7);
        assert_relative_eq!(j.dd, (f(t + h).v - 2.0 * j.v + f(t - h).v) / (h * h), epsilon = 1e-5);
    }

    #[test]
    fn two_straight_steps_advance_one_step_length() {
        let truth = generate_trajectory(&cfg(2, 0.0)).unwrap();
        let (first, last) = (truth.first().unwrap(), truth.last().unwrap());
        assert!(((last.p - first.p).x - 0.17).abs() < 1e-3);
        assert_relative_eq!(last.yaw(), 0.0);
        assert_eq!(truth.len(), 1001);
    }

    #[test]
    fn heading_accumulates() {
        let c = cfg(10, 0.15);
        let truth = generate_trajectory(&c).unwrap();
        assert_relative_eq!(truth.last().unwrap().yaw(), 1.5, epsilon = 1e-12);
        assert_relative_eq!(final_heading(&c), 1.5, epsilon = 1e-12);
    }

    #[test]
    fn stance_feet_do_not_slip() {
        let truth = generate_trajectory(&cfg(6, 0.15)).unwrap();
        for foot in 0..2 {
            let mut anchor: Option<Vec3> = None;
            for rec in &truth {
                if rec.contact[foot] {
                    match anchor {
                        Some(a) => assert_eq!(rec.feet[foot], a, "slip at t={}", rec.t),
                        None => anchor = Some(rec.feet[foot]),
                    }
                } else {
                    anchor = None;
                }
            }
        }
    }

    #[test]
    fn contact_schedule_partition() {
        let c = cfg(6, 0.15);
        let truth = generate_trajectory(&c).unwrap();
        for rec in &truth {
            assert!(rec.contact[0] || rec.contact[1], "flight phase at t={}", rec.t);
            if rec.contact[0] && rec.contact[1] {
                let phase = rec.t - (rec.t / c.step_time).floor() * c.step_time;
                assert!(phase <= c.dsp_time + 1e-9 || phase >= c.step_time - 1e-9 || rec.t >= c.duration() - 1e-9);
            }
        }
        let single = truth.iter().filter(|r| r.contact[0] ^ r.contact[1]).count();
        assert!(single > truth.len() * 8 / 10);
    }

    #[test]
    fn velocity_and_rates_match_differences() {
        let c = cfg(5, 0.15);
        let truth = generate_trajectory(&c).unwrap();
        let h = 1.0 / c.control_rate;
        for w in truth.windows(3) {
            let v_fd = (w[2].p - w[0].p) / (2.0 * h);
            assert!((v_fd - w[1].v).amax() <= 1e-4, "t={}", w[1].t);
            let a_fd = (w[2].v - w[0].v) / (2.0 * h);
            // jerk is discontinuous at step boundaries, so the central difference is only first order there
            let phase = w[1].t / c.step_time;
            let at_knot = (phase - phase.round()).abs() * c.step_time < 1.5 * h;
            let tol = if at_knot { 1e-2 } else { 1e-3 };
            assert!((a_fd - w[1].accel).amax() <= tol, "t={}", w[1].t);
            let om = body_rate_fd(&w[0].r, &w[2].r, 2.0 * h);
            assert!((om - w[1].omega).amax() <= 1e-4, "t={}", w[1].t);
        }
    }

    #[test]
    fn static_imu_reads_gravity() {
        // a stationary record: zero rates and accelerations, level attitude
        let rec = GroundTruthRecord {
            t: 0.0,
            r: Mat3::identity(),
            v: Vec3::zeros(),
            p: Vec3::new(0.0, 0.0, 0.8),
            feet: [Vec3::zeros(); 2],
            foot_yaw: [0.0; 2],
            contact: [true; 2],
            omega: Vec3::zeros(),
            accel: Vec3::zeros(),
        };
        let imu = synthesize_imu(&[rec], &SimNoise::zero(), &BiasVector::default(), 1);
        assert_eq!(imu[0].omega, Vec3::zeros());
        assert_eq!(imu[0].accel, Vec3::new(0.0, 0.0, 9.81));
    }

    #[test]
    fn noise_free_kinematics_are_exact() {
        let truth = generate_trajectory(&cfg(3, 0.15)).unwrap();
        let kin = synthesize_kinematics(&truth, &SimNoise::zero(), 5);
        assert_eq!(kin.len(), truth.len());
        for (rec, k) in truth.iter().zip(&kin) {
            for i in 0..2 {
                assert_eq!(k.feet[i].p_fk, rec.r.transpose() * (rec.feet[i] - rec.p));
                assert_eq!(k.feet[i].contact, rec.contact[i]);
            }
        }
        // swing samples are still emitted
        assert!(kin.iter().any(|k| !k.feet[0].contact));
    }

    #[test]
    fn noise_levels_match_configuration() {
        let c = cfg(20, 0.15);
        let truth = generate_trajectory(&c).unwrap();
        let noise = SimNoise::default();
        let imu = synthesize_imu(&truth, &noise, &BiasVector::default(), 9);
        let kin = synthesize_kinematics(&truth, &noise, 10);
        let mut sg = 0.0;
        let mut sk = 0.0;
        for ((rec, m), k) in truth.iter().zip(&imu).zip(&kin) {
            sg += (m.omega - rec.omega).norm_squared();
            sk += (k.feet[0].p_fk - rec.r.transpose() * (rec.feet[0] - rec.p)).norm_squared();
        }
        let n = 3.0 * truth.len() as f64;
        let std_g = (sg / n).sqrt();
        let std_k = (sk / n).sqrt();
        assert!((std_g / 0.05 - 1.0).abs() < 0.05, "gyro std {std_g}");
        assert!((std_k / 0.002 - 1.0).abs() < 0.05, "fk std {std_k}");
    }

    #[test]
    fn simulation_is_deterministic() {
        let c = cfg(3, 0.15);
        let a = simulate(&c, &SimNoise::default(), &default_bias()).unwrap();
        let b = simulate(&c, &SimNoise::default(), &default_bias()).unwrap();
        assert_eq!(a, b);
        let other = simulate(&GaitConfig { rng_seed: 7, ..c }, &SimNoise::default(), &default_bias()).unwrap();
        assert_ne!(a.imu, other.imu);
    }

    #[test]
    fn invalid_configs_rejected() {
        for bad in [
            GaitConfig { dsp_time: 1.0, ..GaitConfig::default() },
            GaitConfig { dsp_time: 0.0, ..GaitConfig::default() },
            GaitConfig { control_rate: 0.0, ..GaitConfig::default() },
            GaitConfig { n_steps: 0, ..GaitConfig::default() },
        ] {
            assert!(matches!(generate_trajectory(&bad), Err(ConfigError::Invalid(_))));
        }
    }

    #[test]
    fn average_speed_near_step_rate() {
        let logs = simulate(&cfg(30, 0.0), &SimNoise::zero(), &BiasVector::default()).unwrap();
        let v = logs.average_speed();
        // 17 cm per 1 s step, minus the start/stop half steps, plus sway
        assert!(v > 0.14 && v < 0.19, "{v}");
    }
}
