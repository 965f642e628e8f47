#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bandwidth;
pub mod data;
pub mod decomposition;
pub mod density;
pub mod error;
pub mod kernel;
pub mod montecarlo;
pub mod neighbors;
pub mod quadrature;
pub mod smoother;
pub mod summation;

pub use error::{Error, Result};
