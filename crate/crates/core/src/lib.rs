//! Multi-UAV data harvesting: channel and MIMO throughput models, rotary-wing
//! power model, service-position search, power-constrained trajectory
//! optimization and fleet scheduling.

// `!(x > 0.0)` guards reject NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod channel;
pub mod cluster;
pub mod error;
pub mod mimo;
pub mod pipeline;
pub mod position_opt;
pub mod power;
pub mod rng;
pub mod scenario;
pub mod scheduler;
pub mod trajectory_opt;

pub type Point3 = nalgebra::Vector3<f64>;

pub use error::{Error, Result};
pub use scenario::{load_scenario, load_scenario_file, GroundNode, ScenarioConfig, ScenarioSpec, TrafficClass, UavSpec};
