//! Invariant extended Kalman filtering for legged-robot base state estimation
//! from IMU and leg kinematics, with a quaternion EKF baseline, a bipedal gait
//! simulator and an evaluation harness.

pub mod config;
pub mod error;
pub mod filter;
pub mod gait;
pub mod harness;
pub mod io;
pub mod lie;
pub mod qekf;
pub mod riekf;
pub mod rng;
pub mod state;

pub use error::{ConfigError, DataError, FilterError, HarnessError, LieError};
pub use filter::{make_filter, Estimator, FilterKind};
pub use lie::{SEk3, TangentSEk3, SE43, Tangent43};
pub use qekf::Qekf;
pub use riekf::{Integrator, Riekf};
pub use state::{Foot, ImuSample, KinSample, NoiseParams, RobotState};
