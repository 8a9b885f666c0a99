//! Spectral tools for loss landscapes of layered networks.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod hessian;
pub mod infogeo;
pub mod net;
pub mod numeric;
pub mod poset;
pub mod report;
pub mod rmt;
pub mod rng;

pub use error::{Error, Result};
