//! Deterministic multi-agent simulator for prediction-market-based belief
//! aggregation in multi-sensor object classification.
//!
//! Sensor agents perceive noisy signals from buried objects, blend the
//! Bayesian signal posterior with the market's aggregate belief, and submit
//! probability reports. A market maker pays instantaneous rewards, pools the
//! reports into an aggregate via a weighted logarithmic opinion pool, and
//! settles a proper decision-scoring payment when the object's type is
//! revealed. An expected-utility decision maker deploys additional sensors
//! from a bounded fleet each step. Two baseline fusion methods (two-level
//! Dempster-Shafer combination and a Bayesian information filter) run on
//! identical signal sequences for comparison.

pub mod agent;
pub mod baselines;
pub mod decision;
pub mod error;
pub mod export;
pub mod market;
pub mod metrics;
pub mod scenario;
pub mod signal;
pub mod sim;
pub mod types;
pub mod verify;

pub use error::{Error, Result};
pub use types::{FusionMethod, ObjectInstance, SensorType, SensorTypeSpec, TypeDistribution};
