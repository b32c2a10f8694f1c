//! Reward-driven fraud triage: strategies propose which unlabeled
//! transaction an analyst should check next, a reward is earned for every
//! confirmed fraud, and CAFDA mixes strategies by how often they pay off.

pub mod cafda;
pub mod config;
pub mod datapool;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod prepare;
pub mod rng;
pub mod service;
pub mod strategies;
pub mod synthetic;

pub use error::{Error, ErrorCategory, Result};
