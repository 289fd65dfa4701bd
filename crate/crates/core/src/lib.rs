//! Numerical workbench for lower bounds on the aspect ratio of folded
//! Moebius bands, via the capacity of ladders of signed segments.

// guards written as `!(x >= lo)` also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod export;
pub mod family;
pub mod geom;
pub mod ladder;
pub mod optimizer;
pub mod verify;

pub use error::{Error, Result};
