#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod model;
pub mod prior;
pub mod sampler;
pub mod theory;
pub mod wavelet;

pub use error::{Error, Result};
