//! Energy-guarded Anderson acceleration: benchmark problems, Anderson mixing
//! and its momentum form, guarded optimizers, continuous-time limits and an
//! experiment runner.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod error;
pub mod history;
pub mod mixing;
pub mod ode;
pub mod optimizers;
pub mod problems;

pub use error::{Error, Result};
