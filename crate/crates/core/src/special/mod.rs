//! Special functions and the series-summation engine.
//!
//! Everything downstream (densities, moments, information matrices) is
//! assembled from the functions here. Gamma-type quantities are kept in
//! log-space; [`sum_series_log`] accumulates terms given as log-magnitudes
//! so that sums whose individual terms overflow `f64` remain representable.

mod gamma;
mod incgamma;
mod series;

pub use gamma::{digamma, log_beta, log_gamma, trigamma};
pub use incgamma::{
    erf, erf_half_gaussian, erfc, ln_reg_inc_gamma, ln_reg_inc_gamma_upper, normal_cdf,
    normal_quantile, reg_inc_gamma, reg_inc_gamma_upper,
};
pub use series::{log_sum_exp, sum_series, sum_series_log, SeriesControl, SeriesSum, Term};

pub(crate) use gamma::{digamma_unchecked, log_factorial, trigamma_unchecked};
