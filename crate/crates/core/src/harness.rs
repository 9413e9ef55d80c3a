//! Experiment orchestration: single runs, Monte-Carlo initialization studies,
//! error metrics and numerical-health monitoring.

use rayon::prelude::*;
use std::collections::BTreeMap;
use std::fmt;

use crate::error::HarnessError;
use crate::filter::{make_filter, FilterKind};
use crate::gait::{simulate, GaitConfig, SimLogs, SimNoise};
use crate::lie::{orthonormality_error, so3_log, Mat3};
use crate::riekf::Integrator;
use crate::rng::{derive_seed, stream};
use crate::state::{initial_state, Covariance21, NoiseParams, RobotState};

/// Scalar error channels. Velocity errors are taken in the body frame, where
/// they are observable; world-frame horizontal velocity inherits yaw drift.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Channel {
    Px,
    Py,
    Pz,
    Vx,
    Vy,
    Vz,
    Roll,
    Pitch,
    Yaw,
}

impl Channel {
    pub const ALL: [Channel; 9] = [
        Channel::Px,
        Channel::Py,
        Channel::Pz,
        Channel::Vx,
        Channel::Vy,
        Channel::Vz,
        Channel::Roll,
        Channel::Pitch,
        Channel::Yaw,
    ];

    /// Channels that converge regardless of initialization.
    pub const OBSERVABLE: [Channel; 6] = [
        Channel::Vx,
        Channel::Vy,
        Channel::Vz,
        Channel::Roll,
        Channel::Pitch,
        Channel::Pz,
    ];

    /// Drifting channels compared in the localization study.
    pub const DRIFT: [Channel; 3] = [Channel::Px, Channel::Py, Channel::Yaw];

    pub fn name(self) -> &'static str {
        match self {
            Channel::Px => "px",
            Channel::Py => "py",
            Channel::Pz => "pz",
            Channel::Vx => "vx",
            Channel::Vy => "vy",
            Channel::Vz => "vz",
            Channel::Roll => "roll",
            Channel::Pitch => "pitch",
            Channel::Yaw => "yaw",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let w = a.rem_euclid(two_pi);
    if w > std::f64::consts::PI {
        w - two_pi
    } else {
        w
    }
}

/// ZYX Euler angles `(roll, pitch, yaw)`.
pub fn euler_zyx(r: &Mat3) -> (f64, f64, f64) {
    let roll = r[(2, 1)].atan2(r[(2, 2)]);
    let pitch = (-r[(2, 0)]).clamp(-1.0, 1.0).asin();
    let yaw = r[(1, 0)].atan2(r[(0, 0)]);
    (roll, pitch, yaw)
}

/// Estimate minus truth for every channel.
pub fn channel_errors(truth: &RobotState, est: &RobotState) -> [f64; 9] {
    let dp = est.position() - truth.position();
    let vb_est = est.rotation().transpose() * est.velocity();
    let vb_true = truth.rotation().transpose() * truth.velocity();
    let dv = vb_est - vb_true;
    let (re, pe, _) = euler_zyx(est.rotation());
    let (rt, pt, _) = euler_zyx(truth.rotation());
    let yaw = so3_log(&(est.rotation() * truth.rotation().transpose())).z;
    [
        dp.x,
        dp.y,
        dp.z,
        dv.x,
        dv.y,
        dv.z,
        wrap_angle(re - rt),
        wrap_angle(pe - pt),
        wrap_angle(yaw),
    ]
}

/// Convergence bands per observable channel plus the hold time.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceCriteria {
    pub bands: BTreeMap<Channel, f64>,
    pub hold: f64,
}

impl Default for ConvergenceCriteria {
    fn default() -> Self {
        let bands = [
            (Channel::Vx, 0.05),
            (Channel::Vy, 0.05),
            (Channel::Vz, 0.05),
            (Channel::Roll, 0.02),
            (Channel::Pitch, 0.02),
            (Channel::Pz, 0.02),
        ]
        .into_iter()
        .collect();
        Self { bands, hold: 1.0 }
    }
}

/// First sample time `t*` with `|e| < band` on every sample of `[t*, t* + hold]`.
/// The window must fit inside the log.
pub fn convergence_time(times: &[f64], errors: &[f64], band: f64, hold: f64) -> Option<f64> {
    assert!(band > 0.0, "convergence band must be positive");
    assert_eq!(times.len(), errors.len());
    let n = times.len();
    if n == 0 {
        return None;
    }
    let t_end = times[n - 1];
    // next_violation[i]: smallest j >= i with |e_j| >= band, or n
    let mut next_violation = vec![n; n + 1];
    for i in (0..n).rev() {
        next_violation[i] = if !(errors[i].abs() < band) { i } else { next_violation[i + 1] };
    }
    let mut end = 0;
    for i in 0..n {
        if times[i] + hold > t_end + 1e-12 {
            return None;
        }
        if next_violation[i] != i {
            while end < n && times[end] <= times[i] + hold {
                end += 1;
            }
            if next_violation[i] >= end {
                return Some(times[i]);
            }
        }
    }
    None
}

/// Numerical health accumulated over a run.
#[derive(Clone, Debug, PartialEq)]
pub struct HealthReport {
    pub min_eigenvalue: f64,
    /// Samples where `P + 1e-9·I` failed a Cholesky factorization.
    pub psd_violations: usize,
    pub max_asymmetry: f64,
    pub max_orthonormality_error: f64,
    pub max_quaternion_norm_error: Option<f64>,
    pub non_finite: bool,
}

impl Default for HealthReport {
    fn default() -> Self {
        Self {
            min_eigenvalue: f64::INFINITY,
            psd_violations: 0,
            max_asymmetry: 0.0,
            max_orthonormality_error: 0.0,
            max_quaternion_norm_error: None,
            non_finite: false,
        }
    }
}

impl HealthReport {
    pub const EIGEN_TOL: f64 = -1e-9;
    pub const ORTHO_TOL: f64 = 1e-8;
    pub const QUAT_TOL: f64 = 1e-9;

    pub fn is_healthy(&self) -> bool {
        !self.non_finite
            && self.psd_violations == 0
            && self.min_eigenvalue >= Self::EIGEN_TOL
            && self.max_asymmetry <= 1e-9
            && self.max_orthonormality_error < Self::ORTHO_TOL
            && self.max_quaternion_norm_error.map_or(true, |e| e <= Self::QUAT_TOL)
    }

    fn observe(
        &mut self,
        p: &Covariance21,
        est: &RobotState,
        quat_norm: Option<f64>,
        eigen: bool,
    ) {
        if !est.is_finite() || p.iter().any(|v| !v.is_finite()) {
            self.non_finite = true;
            return;
        }
        self.max_asymmetry = self.max_asymmetry.max((p - p.transpose()).amax());
        let shifted = p + Covariance21::identity() * 1e-9;
        let psd = shifted.cholesky().is_some();
        if !psd {
            self.psd_violations += 1;
        }
        if eigen || !psd {
            let min = p.symmetric_eigenvalues().min();
            self.min_eigenvalue = self.min_eigenvalue.min(min);
        }
        self.max_orthonormality_error = self
            .max_orthonormality_error
            .max(orthonormality_error(est.rotation()));
        if let Some(n) = quat_norm {
            let e = (n - 1.0).abs();
            self.max_quaternion_norm_error = Some(self.max_quaternion_norm_error.map_or(e, |m| m.max(e)));
        }
    }

    pub fn merge(&mut self, other: &HealthReport) {
        self.min_eigenvalue = self.min_eigenvalue.min(other.min_eigenvalue);
        self.psd_violations += other.psd_violations;
        self.max_asymmetry = self.max_asymmetry.max(other.max_asymmetry);
        self.max_orthonormality_error = self.max_orthonormality_error.max(other.max_orthonormality_error);
        self.max_quaternion_norm_error = match (self.max_quaternion_norm_error, other.max_quaternion_norm_error) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        self.non_finite |= other.non_finite;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions {
    pub integrator: Integrator,
    pub criteria: ConvergenceCriteria,
    pub keep_estimates: bool,
    /// Full eigen-decomposition of P every this many samples (Cholesky check every sample).
    pub eigen_stride: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            integrator: Integrator::ClosedForm,
            criteria: ConvergenceCriteria::default(),
            keep_estimates: true,
            eigen_stride: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub kind: FilterKind,
    pub times: Vec<f64>,
    /// Estimate at every sample (empty unless requested).
    pub estimates: Vec<RobotState>,
    pub mse: BTreeMap<Channel, f64>,
    /// `None` for channels that never settle; only observable channels are listed.
    pub convergence: BTreeMap<Channel, Option<f64>>,
    pub health: HealthReport,
}

impl RunResult {
    pub fn final_position_error(&self, logs: &SimLogs) -> Option<f64> {
        let est = self.estimates.last()?;
        Some((est.position() - logs.truth.last()?.p).norm())
    }
}

fn check_logs(logs: &SimLogs) -> Result<(), HarnessError> {
    let n = logs.truth.len();
    if n == 0 || logs.imu.is_empty() || logs.kin.is_empty() {
        return Err(HarnessError::EmptyLog);
    }
    if logs.imu.len() != n || logs.kin.len() != n {
        return Err(HarnessError::Misaligned(format!(
            "truth has {n} rows, imu {}, kin {}",
            logs.imu.len(),
            logs.kin.len()
        )));
    }
    for (k, ((tr, imu), kin)) in logs.truth.iter().zip(&logs.imu).zip(&logs.kin).enumerate() {
        if tr.t != imu.t || tr.t != kin.t {
            return Err(HarnessError::Misaligned(format!("timestamps differ at row {k}")));
        }
        if k > 0 && !(tr.t > logs.truth[k - 1].t) {
            return Err(HarnessError::Misaligned(format!("time not increasing at row {k}")));
        }
    }
    Ok(())
}

/// Metrics computed from aligned truth and estimate sequences.
pub fn compute_metrics(
    truth: &[RobotState],
    estimates: &[RobotState],
    times: &[f64],
    criteria: &ConvergenceCriteria,
) -> (BTreeMap<Channel, f64>, BTreeMap<Channel, Option<f64>>) {
    let mut series: Vec<Vec<f64>> = vec![Vec::with_capacity(times.len()); 9];
    for (t, e) in truth.iter().zip(estimates) {
        for (c, err) in channel_errors(t, e).into_iter().enumerate() {
            series[c].push(err);
        }
    }
    let n = times.len().max(1) as f64;
    let mse = Channel::ALL
        .iter()
        .map(|&c| (c, series[c.index()].iter().map(|e| e * e).sum::<f64>() / n))
        .collect();
    let convergence = criteria
        .bands
        .iter()
        .map(|(&c, &band)| (c, convergence_time(times, &series[c.index()], band, criteria.hold)))
        .collect();
    (mse, convergence)
}

/// Streams the logs through a filter started at `init`.
///
/// Step `k` predicts with the IMU sample at `t_k` over `t_{k+1} − t_k` and
/// corrects with the kinematics at `t_{k+1}`.
pub fn run_filter(
    kind: FilterKind,
    logs: &SimLogs,
    params: &NoiseParams,
    init: &RobotState,
    opts: &RunOptions,
) -> Result<RunResult, HarnessError> {
    check_logs(logs)?;
    params.validate()?;
    let mut filter = make_filter(kind, init, params, opts.integrator);
    let n = logs.truth.len();
    let times: Vec<f64> = logs.truth.iter().map(|r| r.t).collect();
    let truth: Vec<RobotState> = (0..n).map(|k| logs.truth_state(k)).collect();
    let mut estimates = Vec::with_capacity(n);
    let mut health = HealthReport::default();

    let stride = opts.eigen_stride.max(1);
    let first = filter.estimate();
    health.observe(filter.covariance(), &first, filter.quaternion_norm(), true);
    estimates.push(first);
    for k in 0..n - 1 {
        let dt = times[k + 1] - times[k];
        filter.step(&logs.imu[k], &logs.kin[k + 1], dt)?;
        let est = filter.estimate();
        let eigen = (k + 1) % stride == 0 || k + 2 == n;
        health.observe(filter.covariance(), &est, filter.quaternion_norm(), eigen);
        estimates.push(est);
    }

    let (mse, convergence) = compute_metrics(&truth, &estimates, &times, &opts.criteria);
    Ok(RunResult {
        kind,
        times,
        estimates: if opts.keep_estimates { estimates } else { Vec::new() },
        mse,
        convergence,
        health,
    })
}

/// Whether every Monte-Carlo trial sees the same measurements.
#[derive(Clone, Debug, PartialEq)]
pub enum MeasurementMode {
    Shared,
    /// Fresh measurement noise per trial from the given generator settings.
    PerTrial { gait: GaitConfig, noise: SimNoise },
}

#[derive(Clone, Debug)]
pub struct MonteCarloScenario {
    pub logs: SimLogs,
    pub params: NoiseParams,
    pub options: RunOptions,
    pub mode: MeasurementMode,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    pub init_seed: u64,
    pub mse: BTreeMap<Channel, f64>,
    pub convergence: BTreeMap<Channel, Option<f64>>,
    pub health: HealthReport,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Distribution {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] * (1.0 - w) + sorted[hi] * w
    }
}

impl Distribution {
    /// Summary of `values`; infinities sort last, NaN is not expected.
    pub fn from_values(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Self {
            min: quantile(&v, 0.0),
            q1: quantile(&v, 0.25),
            median: quantile(&v, 0.5),
            q3: quantile(&v, 0.75),
            max: quantile(&v, 1.0),
        }
    }
}

pub fn median(values: &[f64]) -> f64 {
    Distribution::from_values(values).median
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonteCarloResult {
    pub kind: FilterKind,
    pub seed: u64,
    pub trials: Vec<TrialResult>,
    pub mse: BTreeMap<Channel, Distribution>,
    /// Median convergence time per observable channel; non-converged trials count as +∞.
    pub median_convergence: BTreeMap<Channel, f64>,
    pub health: HealthReport,
}

impl MonteCarloResult {
    pub fn aggregate(kind: FilterKind, seed: u64, trials: Vec<TrialResult>) -> Self {
        let mut mse = BTreeMap::new();
        for c in Channel::ALL {
            let vals: Vec<f64> = trials.iter().map(|t| t.mse[&c]).collect();
            mse.insert(c, Distribution::from_values(&vals));
        }
        let mut median_convergence = BTreeMap::new();
        if let Some(first) = trials.first() {
            for &c in first.convergence.keys() {
                let vals: Vec<f64> = trials
                    .iter()
                    .map(|t| t.convergence[&c].unwrap_or(f64::INFINITY))
                    .collect();
                median_convergence.insert(c, median(&vals));
            }
        }
        let mut health = HealthReport::default();
        for t in &trials {
            health.merge(&t.health);
        }
        Self {
            kind,
            seed,
            trials,
            mse,
            median_convergence,
            health,
        }
    }
}

/// Runs one trial: perturbed initialization from the trial's sub-seed.
pub fn run_trial(
    kind: FilterKind,
    scenario: &MonteCarloScenario,
    seed: u64,
    trial: usize,
) -> Result<TrialResult, HarnessError> {
    let init_seed = derive_seed(seed, stream::INIT, trial as u64);
    let owned;
    let logs = match &scenario.mode {
        MeasurementMode::Shared => &scenario.logs,
        MeasurementMode::PerTrial { gait, noise } => {
            let cfg = GaitConfig {
                rng_seed: derive_seed(seed, stream::MEASUREMENT, trial as u64),
                ..*gait
            };
            owned = simulate(&cfg, noise, &scenario.logs.bias)?;
            &owned
        }
    };
    let truth0 = logs.truth_state(0);
    let (init, _) = initial_state(&scenario.params, &truth0, init_seed, true);
    let opts = RunOptions {
        keep_estimates: false,
        ..scenario.options.clone()
    };
    let run = run_filter(kind, logs, &scenario.params, &init, &opts)?;
    Ok(TrialResult {
        trial,
        init_seed,
        mse: run.mse,
        convergence: run.convergence,
        health: run.health,
    })
}

/// Independent trials in parallel; the result does not depend on scheduling.
pub fn monte_carlo(
    kind: FilterKind,
    n_trials: usize,
    scenario: &MonteCarloScenario,
    seed: u64,
) -> Result<MonteCarloResult, HarnessError> {
    if n_trials == 0 {
        return Err(HarnessError::Config(crate::error::ConfigError::Invalid(
            "n_trials must be at least 1".into(),
        )));
    }
    let trials = (0..n_trials)
        .into_par_iter()
        .map(|i| run_trial(kind, scenario, seed, i))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MonteCarloResult::aggregate(kind, seed, trials))
}
