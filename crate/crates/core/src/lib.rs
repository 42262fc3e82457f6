//! Besov-Lipschitz seminorms on discrete Ahlfors-regular spaces and their
//! heat-kernel characterisations.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bands;
pub mod besov;
pub mod cli;
pub mod error;
pub mod functions;
pub mod hardy;
pub mod kernel;
pub mod linalg;
pub mod space;
pub mod spectral;

pub use error::{Error, Result};
