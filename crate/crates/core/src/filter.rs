//! Common driving interface over the two estimators.

use std::fmt;
use std::str::FromStr;

use crate::error::FilterError;
use crate::qekf::Qekf;
use crate::riekf::{Integrator, Riekf};
use crate::state::{Covariance21, ImuSample, KinSample, NoiseParams, RobotState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FilterKind {
    Riekf,
    Qekf,
}

impl FilterKind {
    pub const ALL: [FilterKind; 2] = [FilterKind::Riekf, FilterKind::Qekf];

    pub fn name(self) -> &'static str {
        match self {
            FilterKind::Riekf => "riekf",
            FilterKind::Qekf => "qekf",
        }
    }
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FilterKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "riekf" => Ok(FilterKind::Riekf),
            "qekf" => Ok(FilterKind::Qekf),
            other => Err(format!("unknown filter `{other}` (expected riekf or qekf)")),
        }
    }
}

pub trait Estimator: Send {
    fn kind(&self) -> FilterKind;

    fn step(&mut self, imu: &ImuSample, kin: &KinSample, dt: f64) -> Result<(), FilterError>;

    /// Current estimate expressed in the common `(R, v, p, feet, biases)` form.
    fn estimate(&self) -> RobotState;

    fn covariance(&self) -> &Covariance21;

    /// Norm of the stored attitude quaternion, if the filter keeps one.
    fn quaternion_norm(&self) -> Option<f64> {
        None
    }
}

impl Estimator for Riekf {
    fn kind(&self) -> FilterKind {
        FilterKind::Riekf
    }

    fn step(&mut self, imu: &ImuSample, kin: &KinSample, dt: f64) -> Result<(), FilterError> {
        Riekf::step(self, imu, kin, dt)
    }

    fn estimate(&self) -> RobotState {
        *self.state()
    }

    fn covariance(&self) -> &Covariance21 {
        Riekf::covariance(self)
    }
}

/// Builds a filter of the requested kind from a common initial estimate.
pub fn make_filter(
    kind: FilterKind,
    init: &RobotState,
    params: &NoiseParams,
    integrator: Integrator,
) -> Box<dyn Estimator> {
    match kind {
        FilterKind::Riekf => Box::new(
            Riekf::new(*init, params.initial_covariance(), *params).with_integrator(integrator),
        ),
        FilterKind::Qekf => Box::new(Qekf::from_robot_state(init, params).with_integrator(integrator)),
    }
}
