//! Validation statistics: paired Hotelling T², TOST equivalence, distribution
//! functions and per-point error summaries.

mod errors;
mod hotelling;
pub mod special;
mod tost;

pub use errors::{boxplot_csv, point_errors, summarize, BoxStats, ErrorSummary};
pub use hotelling::{hotelling_paired, hotelling_two_sample, HotellingResult, HotellingVariant};
pub use special::{f_cdf, t_cdf};
pub use tost::{tost, EquivalenceResult};

/// Sample mean and unbiased (1/(n−1)) standard deviation.
pub(crate) fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}
