//! Shared Monte-Carlo helpers for the integration tests.
#![allow(dead_code)]

use bgg_core::gof::{chi_square_two_sample, ks_two_sample};

/// Sample mean and its standard error.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Sample covariance and a standard error from the spread of the centred products.
pub fn cov_se(a: &[f64], b: &[f64]) -> (f64, f64) {
    let (ma, _) = mean_se(a);
    let (mb, _) = mean_se(b);
    let prods: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).collect();
    mean_se(&prods)
}

/// |estimate − target| in standard errors.
pub fn sigmas(estimate: (f64, f64), target: f64) -> f64 {
    (estimate.0 - target).abs() / estimate.1
}

/// Two-sample KS on the continuous parts and chi-square homogeneity on the counts.
pub fn same_law(a: &(Vec<f64>, Vec<u64>), b: &(Vec<f64>, Vec<u64>)) -> (f64, f64) {
    let ks = ks_two_sample(&a.0, &b.0).expect("nonempty samples");
    let chi = chi_square_two_sample(&a.1, &b.1, 5.0).expect("nonempty samples");
    (ks.p_value, chi.p_value)
}

pub fn as_f64(v: &[u64]) -> Vec<f64> {
    v.iter().map(|&k| k as f64).collect()
}
