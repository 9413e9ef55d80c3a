//! Estimator state `(X, θ) ∈ SE_4(3) × ℝ⁶`, its covariance and the noise
//! configuration shared by both filters.

use nalgebra::{SMatrix, SVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::path::Path;

use crate::error::ConfigError;
use crate::lie::{Mat3, Tangent43, Vec3, SE43};

/// Dimension of the full error state.
pub const DIM: usize = 21;

/// Offsets of each 3-block in the error vector
/// `(ξ^R, ξ^v, ξ^p, ξ^{cL}, ξ^{cR}, ζ^g, ζ^a)`.
pub mod idx {
    pub const ROT: usize = 0;
    pub const VEL: usize = 3;
    pub const POS: usize = 6;
    pub const FOOT_L: usize = 9;
    pub const FOOT_R: usize = 12;
    pub const BIAS_G: usize = 15;
    pub const BIAS_A: usize = 18;
}

pub type Covariance21 = SMatrix<f64, DIM, DIM>;
pub type Vector21 = SVector<f64, DIM>;

/// Replaces `p` by `(p + pᵀ)/2`.
pub fn symmetrize<const N: usize>(p: &SMatrix<f64, N, N>) -> SMatrix<f64, N, N> {
    (p + p.transpose()) * 0.5
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Foot {
    Left,
    Right,
}

impl Foot {
    pub const BOTH: [Foot; 2] = [Foot::Left, Foot::Right];

    /// Column of the foot position inside the group element.
    pub fn column(self) -> usize {
        match self {
            Foot::Left => 2,
            Foot::Right => 3,
        }
    }

    /// Offset of the foot block in the error vector.
    pub fn offset(self) -> usize {
        match self {
            Foot::Left => idx::FOOT_L,
            Foot::Right => idx::FOOT_R,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Foot::Left => 0,
            Foot::Right => 1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Foot::Left => "l",
            Foot::Right => "r",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BiasVector {
    /// Gyroscope bias, rad/s.
    pub bg: Vec3,
    /// Accelerometer bias, m/s².
    pub ba: Vec3,
}

impl BiasVector {
    pub fn new(bg: Vec3, ba: Vec3) -> Self {
        Self { bg, ba }
    }
}

/// Base orientation, velocity, position and both contact points (world frame),
/// plus the IMU biases.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RobotState {
    pub x: SE43,
    pub bias: BiasVector,
}

impl RobotState {
    pub fn new(r: Mat3, v: Vec3, p: Vec3, foot_l: Vec3, foot_r: Vec3, bias: BiasVector) -> Self {
        Self {
            x: SE43::new(r, [v, p, foot_l, foot_r]),
            bias,
        }
    }

    pub fn rotation(&self) -> &Mat3 {
        self.x.rotation()
    }

    pub fn velocity(&self) -> &Vec3 {
        self.x.col(0)
    }

    pub fn position(&self) -> &Vec3 {
        self.x.col(1)
    }

    pub fn foot(&self, foot: Foot) -> &Vec3 {
        self.x.col(foot.column())
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite()
            && self
                .bias
                .bg
                .iter()
                .chain(self.bias.ba.iter())
                .all(|v| v.is_finite())
    }
}

/// One `key = value` line of a configuration file.
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment<'a> {
    pub line: usize,
    pub key: String,
    pub value: &'a str,
}

/// Splits configuration text into assignments; `#` starts a comment.
pub fn parse_assignments(text: &str) -> Result<Vec<Assignment<'_>>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Parse {
            line: i + 1,
            msg: format!("expected `key = value`, got `{line}`"),
        })?;
        out.push(Assignment {
            line: i + 1,
            key: key.trim().to_string(),
            value: value.trim(),
        });
    }
    Ok(out)
}

pub(crate) fn parse_number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| ConfigError::Invalid(format!("`{key}`: cannot parse `{value}`: {e}")))
}

/// Filter noise densities and initial standard deviations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseParams {
    pub std_gyro: f64,
    pub std_accel: f64,
    pub std_gyro_bias: f64,
    pub std_accel_bias: f64,
    pub std_fk: f64,
    pub std_contact_vel: f64,
    pub std0_orient: f64,
    pub std0_vel: f64,
    pub std0_pos: f64,
    pub std0_foot: f64,
    pub std0_bias_g: f64,
    pub std0_bias_a: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            std_gyro: 0.05,
            std_accel: 0.08,
            std_gyro_bias: 0.001,
            std_accel_bias: 0.001,
            std_fk: 0.05,
            std_contact_vel: 0.1,
            std0_orient: 0.1,
            std0_vel: 0.15,
            std0_pos: 0.1,
            std0_foot: 0.1,
            std0_bias_g: 0.2,
            std0_bias_a: 0.2,
        }
    }
}

impl NoiseParams {
    fn fields_mut(&mut self) -> [(&'static str, &mut f64); 12] {
        [
            ("std_gyro", &mut self.std_gyro),
            ("std_accel", &mut self.std_accel),
            ("std_gyro_bias", &mut self.std_gyro_bias),
            ("std_accel_bias", &mut self.std_accel_bias),
            ("std_fk", &mut self.std_fk),
            ("std_contact_vel", &mut self.std_contact_vel),
            ("std0_orient", &mut self.std0_orient),
            ("std0_vel", &mut self.std0_vel),
            ("std0_pos", &mut self.std0_pos),
            ("std0_foot", &mut self.std0_foot),
            ("std0_bias_g", &mut self.std0_bias_g),
            ("std0_bias_a", &mut self.std0_bias_a),
        ]
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut copy = *self;
        for (name, value) in copy.fields_mut() {
            if !(*value > 0.0 && value.is_finite()) {
                return Err(ConfigError::NonPositive(name));
            }
        }
        Ok(())
    }

    /// Parses `key = value` lines on top of the defaults. `#` starts a comment.
    pub fn from_config_str(text: &str) -> Result<Self, ConfigError> {
        let mut params = Self::default();
        for entry in parse_assignments(text)? {
            if !params.set(&entry.key, entry.value).map_err(|e| e.at_line(entry.line))? {
                return Err(ConfigError::UnknownKey {
                    line: entry.line,
                    key: entry.key,
                });
            }
        }
        params.validate()?;
        Ok(params)
    }

    /// Sets a named field; `Ok(false)` if the key is not a noise parameter.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool, ConfigError> {
        let mut fields = self.fields_mut();
        match fields.iter_mut().find(|(name, _)| *name == key) {
            Some(slot) => {
                *slot.1 = parse_number(key, value)?;
                Ok(true)
            }
            None => Ok(false),
        }
    }

    pub fn from_config_file(path: &Path) -> Result<Self, ConfigError> {
        Self::from_config_str(&std::fs::read_to_string(path)?)
    }

    /// Per-coordinate initial standard deviations in error-vector order.
    pub fn initial_stds(&self) -> Vector21 {
        let blocks = [
            self.std0_orient,
            self.std0_vel,
            self.std0_pos,
            self.std0_foot,
            self.std0_foot,
            self.std0_bias_g,
            self.std0_bias_a,
        ];
        Vector21::from_fn(|i, _| blocks[i / 3])
    }

    pub fn initial_covariance(&self) -> Covariance21 {
        Covariance21::from_diagonal(&self.initial_stds().map(|s| s * s))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImuSample {
    pub t: f64,
    /// Measured angular rate, rad/s (body frame).
    pub omega: Vec3,
    /// Measured specific force, m/s² (body frame).
    pub accel: Vec3,
}

/// Forward-kinematics reading for one foot.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FootKin {
    /// Contact point in the body frame, m.
    pub p_fk: Vec3,
    /// Foot orientation relative to the body.
    pub r_fk: Mat3,
    pub contact: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KinSample {
    pub t: f64,
    pub feet: [FootKin; 2],
}

impl KinSample {
    pub fn foot(&self, foot: Foot) -> &FootKin {
        &self.feet[foot.index()]
    }

    pub fn contacts(&self) -> (bool, bool) {
        (self.feet[0].contact, self.feet[1].contact)
    }
}

/// Draws (or copies) the initial estimate and builds the diagonal initial covariance.
///
/// The group part is perturbed on the left, `X̄ = exp(ξ^∧)·X`, with each
/// coordinate of ξ drawn from N(0, std0²); biases get additive noise.
pub fn initial_state(
    config: &NoiseParams,
    truth: &RobotState,
    rng_seed: u64,
    perturb: bool,
) -> (RobotState, Covariance21) {
    let cov = config.initial_covariance();
    if !perturb {
        return (*truth, cov);
    }
    let stds = config.initial_stds();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let draw: Vector21 = Vector21::from_fn(|i, _| {
        let z: f64 = StandardNormal.sample(&mut rng);
        z * stds[i]
    });
    let xi = Tangent43::from_slice(&draw.as_slice()[..15]);
    let x = &SE43::exp(&xi) * &truth.x;
    let bias = BiasVector {
        bg: truth.bias.bg + draw.fixed_rows::<3>(idx::BIAS_G),
        ba: truth.bias.ba + draw.fixed_rows::<3>(idx::BIAS_A),
    };
    (RobotState { x, bias }, cov)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::{so3_exp, so3_log};
    use approx::assert_relative_eq;

    fn truth() -> RobotState {
        RobotState::new(
            so3_exp(&Vec3::new(0.0, 0.0, 0.4)),
            Vec3::new(0.1, 0.0, 0.0),
            Vec3::new(0.0, 0.0, 0.8),
            Vec3::new(0.0, 0.1, 0.0),
            Vec3::new(0.0, -0.1, 0.0),
            BiasVector::default(),
        )
    }

    #[test]
    fn table_defaults() {
        let p = NoiseParams::default();
        assert_eq!(
            [p.std_gyro, p.std_accel, p.std_gyro_bias, p.std_accel_bias, p.std_fk, p.std_contact_vel],
            [0.05, 0.08, 0.001, 0.001, 0.05, 0.1]
        );
        assert_eq!(
            [p.std0_orient, p.std0_vel, p.std0_pos, p.std0_foot, p.std0_bias_g, p.std0_bias_a],
            [0.1, 0.15, 0.1, 0.1, 0.2, 0.2]
        );
    }

    #[test]
    fn unperturbed_init_is_truth() {
        let (est, cov) = initial_state(&NoiseParams::default(), &truth(), 3, false);
        assert_eq!(est, truth());
        let expected = [0.1, 0.15, 0.1, 0.1, 0.1, 0.2, 0.2];
        for i in 0..DIM {
            assert_eq!(cov[(i, i)], expected[i / 3] * expected[i / 3]);
        }
        assert_eq!(cov, Covariance21::from_diagonal(&cov.diagonal()));
    }

    #[test]
    fn perturbation_is_seeded_and_zero_mean() {
        let params = NoiseParams::default();
        let t = truth();
        let a = initial_state(&params, &t, 11, true);
        let b = initial_state(&params, &t, 11, true);
        assert_eq!(a, b);
        assert_ne!(a.0, initial_state(&params, &t, 12, true).0);

        let n = 10_000;
        let mut mean = Vec3::zeros();
        for seed in 0..n {
            let (est, _) = initial_state(&params, &t, seed, true);
            mean += so3_log(&(est.rotation() * t.rotation().transpose()));
        }
        mean /= n as f64;
        let bound = 3.0 * params.std0_orient / (n as f64).sqrt();
        assert!(mean.amax() < bound, "mean {mean:?} bound {bound}");
    }

    #[test]
    fn symmetrize_is_idempotent() {
        let m = Covariance21::from_fn(|i, j| (i * 7 + j * 3) as f64 * 0.01);
        let s = symmetrize(&m);
        assert_eq!(symmetrize(&s), s);
        assert_eq!(s, s.transpose());
    }

    #[test]
    fn config_parsing() {
        let p = NoiseParams::from_config_str("# tuning\nstd_fk = 0.01\n\nstd0_vel=0.3 # note\n")
            .unwrap();
        assert_eq!(p.std_fk, 0.01);
        assert_eq!(p.std0_vel, 0.3);
        assert_eq!(p.std_gyro, 0.05);

        assert!(matches!(
            NoiseParams::from_config_str("std_fkk = 1"),
            Err(ConfigError::UnknownKey { line: 1, .. })
        ));
        assert!(matches!(
            NoiseParams::from_config_str("std_fk = -1"),
            Err(ConfigError::NonPositive("std_fk"))
        ));
        assert!(matches!(
            NoiseParams::from_config_str("\nstd_fk 1"),
            Err(ConfigError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn foot_layout() {
        let s = truth();
        assert_relative_eq!(*s.foot(Foot::Left), Vec3::new(0.0, 0.1, 0.0));
        assert_relative_eq!(*s.foot(Foot::Right), Vec3::new(0.0, -0.1, 0.0));
        assert_eq!(Foot::Left.offset(), idx::FOOT_L);
    }
}
