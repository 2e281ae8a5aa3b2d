//! Joint per-user power allocation and cooperative-jamming design for a
//! multiuser broadcast channel with a multi-antenna eavesdropper.

pub mod alternating;
pub mod baselines;
pub mod config;
pub mod error;
pub mod experiments;
pub mod feasibility;
pub mod kernel;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod optimal;
pub mod oracle;
pub mod report;

pub use error::{Error, Result};
