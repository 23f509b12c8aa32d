// `!(x > 0.0)` style checks reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod config;
pub mod detector;
pub mod dimensioning;
pub mod error;
pub mod exec;
pub mod queueing;
pub mod simulator;
pub mod specfun;
pub mod sweep;
pub mod verify;

pub use error::{Certificate, Error, InfeasibilityKind, Result};
pub use exec::Exec;
