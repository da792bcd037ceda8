//! Exact statistical primitives.

mod curve;
mod fisher;

pub use curve::{bin_probability, r_squared, r_squared_values, BinnedCurve, CurveBin};
pub use fisher::{fisher_exact_two_sided, Table2x2};
