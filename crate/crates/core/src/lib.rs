//! Kernel and random-feature adaptive control and prediction.

// `!(x > 0.0)` also rejects NaN; index loops mirror the math.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod adaptation;
pub mod analysis;
pub mod error;
pub mod kernel_rf;
pub mod linalg;
pub mod simulate;
pub mod systems;

pub use error::{Error, Result};
