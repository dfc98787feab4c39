//! Bias-corrected inference for generalized linear models when the number of
//! coefficients grows proportionally with the sample size.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod calibrate;
pub mod covariance;
pub mod data;
pub mod error;
pub mod fit;
pub mod inference;
pub(crate) mod linalg;
pub mod link;
pub mod prox;
pub mod response;
pub mod rng;
pub mod se;

pub use error::{Error, Result};
