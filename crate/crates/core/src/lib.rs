#![allow(clippy::neg_cmp_op_on_partial_ord)] // negated comparisons also reject NaN

pub mod dynamics;
mod error;
pub mod icpm;
pub mod numerics;
pub mod sim;
pub mod vhc;
pub mod zero_dynamics;

pub use error::{Error, Result};
