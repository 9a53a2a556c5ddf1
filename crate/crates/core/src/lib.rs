// Threshold tests are written `!(x > t)` so that NaN counts as failure.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod downlink;
pub mod equalizers;
pub mod error;
pub mod grid_channel;
pub mod harness;
pub mod linalg;
pub mod rng;
pub mod scheduling;
pub mod stats;
pub mod transforms;
pub mod uplink;

pub use error::{Error, Result};
