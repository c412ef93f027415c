//! Coordinated online multi-task learning.

// `!(x >= 0.0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constraints;
pub mod coordinator;
pub mod error;
pub mod environments;
pub mod harness;
pub mod hemiproj;
pub mod learners;
pub mod losses;
pub mod model;

pub use error::{Error, Result};
