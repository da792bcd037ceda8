//! Behavioral benchmarking of trajectory-prediction models against human
//! highway driving.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod events;
pub mod ingest;
pub mod kinematics;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod safety;
pub mod serde_ext;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use model::*;
