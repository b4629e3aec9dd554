//! Goodness-of-fit tools: empirical distribution functions, one- and
//! two-sample Kolmogorov-Smirnov tests, Pearson chi-square tests and QQ
//! point export.
//!
//! KS p-values come from the plain asymptotic Kolmogorov law evaluated at
//! λ = √n·D, with no small-sample correction.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::io::format_sig17;
use crate::special::reg_inc_gamma_upper;

/// Outcome of a hypothesis test. `df_or_n` holds the degrees of freedom of
/// chi-square type tests and the (effective) sample size of KS tests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub df_or_n: f64,
}

/// Right-continuous empirical distribution of a sample.
#[derive(Debug, Clone)]
pub struct EmpiricalDistribution {
    sorted: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn new(sample: &[f64]) -> Result<Self> {
        if sample.is_empty() {
            return Err(domain("empirical distribution of an empty sample"));
        }
        if sample.iter().any(|v| v.is_nan()) {
            return Err(domain("sample contains NaN"));
        }
        let mut sorted = sample.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    /// F̂(x) = #{xᵢ ≤ x}/n.
    pub fn cdf(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }

    /// Ŝ(x) = #{xᵢ > x}/n.
    pub fn survival(&self, x: f64) -> f64 {
        1.0 - self.cdf(x)
    }

    /// Type-6 sample quantile, i.e. linear interpolation of the order
    /// statistics placed at k/(n+1).
    pub fn quantile(&self, prob: f64) -> f64 {
        let n = self.sorted.len();
        let h = (n as f64 + 1.0) * prob;
        if h <= 1.0 {
            return self.sorted[0];
        }
        if h >= n as f64 {
            return self.sorted[n - 1];
        }
        let lo = h.floor() as usize;
        let frac = h - lo as f64;
        self.sorted[lo - 1] + frac * (self.sorted[lo] - self.sorted[lo - 1])
    }
}

pub fn empirical_cdf(sample: &[f64]) -> Result<EmpiricalDistribution> {
    EmpiricalDistribution::new(sample)
}

/// Same object as [`empirical_cdf`]; use [`EmpiricalDistribution::survival`].
pub fn empirical_survival(sample: &[f64]) -> Result<EmpiricalDistribution> {
    EmpiricalDistribution::new(sample)
}

/// Q(λ) = P(K > λ) for the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if !(lambda > 0.0) {
        return 1.0;
    }
    if lambda < 1.0 {
        // the alternating series converges slowly here; use the theta-dual form
        if lambda < 0.05 {
            return 1.0;
        }
        let c = PI * PI / (8.0 * lambda * lambda);
        let mut s = 0.0;
        for k in 1..=100 {
            let m = (2 * k - 1) as f64;
            let t = (-m * m * c).exp();
            s += t;
            if t < 1e-16 * s {
                break;
            }
        }
        return (1.0 - (2.0 * PI).sqrt() / lambda * s).clamp(0.0, 1.0);
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let t = (-2.0 * kf * kf * lambda * lambda).exp();
        s += if k % 2 == 1 { t } else { -t };
        if t < 1e-12 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// One-sample KS test against a continuous cdf.
pub fn ks_one_sample<F>(sample: &[f64], cdf: F) -> Result<TestResult>
where
    F: Fn(f64) -> f64,
{
    let ecdf = EmpiricalDistribution::new(sample)?;
    let n = ecdf.len() as f64;
    let mut d: f64 = 0.0;
    let mut prev = 0.0;
    for (i, &x) in ecdf.sorted().iter().enumerate() {
        let f = cdf(x);
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::InvalidCdf(format!("cdf({x}) = {f} lies outside [0, 1]")));
        }
        if f < prev {
            return Err(Error::InvalidCdf(format!("cdf decreases at {x} ({prev} then {f})")));
        }
        prev = f;
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(TestResult { statistic: d, p_value: kolmogorov_survival(n.sqrt() * d), df_or_n: n })
}

/// Two-sample KS test with effective size nₐn_b/(nₐ+n_b).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<TestResult> {
    let ea = EmpiricalDistribution::new(a)?;
    let eb = EmpiricalDistribution::new(b)?;
    let (sa, sb) = (ea.sorted(), eb.sorted());
    let (na, nb) = (sa.len(), sb.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < na && j < nb {
        let x = sa[i].min(sb[j]);
        while i < na && sa[i] <= x {
            i += 1;
        }
        while j < nb && sb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let ne = (na as f64 * nb as f64) / (na + nb) as f64;
    Ok(TestResult { statistic: d, p_value: kolmogorov_survival(ne.sqrt() * d), df_or_n: ne })
}

/// P(χ²_df > x).
pub fn chi_square_survival(x: f64, df: u32) -> Result<f64> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(domain(format!("chi-square statistic must be nonnegative and finite, got {x}")));
    }
    if df == 0 {
        return Err(domain("chi-square degrees of freedom must be positive"));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    reg_inc_gamma_upper(df as f64 / 2.0, x / 2.0)
}

/// Pearson's test of observed cell counts against cell probabilities; the
/// degrees of freedom are cells − 1 − `df_adjust`.
pub fn pearson_chi_square(observed: &[u64], probs: &[f64], df_adjust: u32) -> Result<TestResult> {
    if observed.len() != probs.len() {
        return Err(Error::Precondition(format!(
            "{} observed cells but {} probabilities",
            observed.len(),
            probs.len()
        )));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 || probs.iter().any(|p| !(*p >= 0.0)) {
        return Err(Error::Precondition(format!(
            "cell probabilities must be nonnegative and sum to 1 within 1e-9 (sum = {total})"
        )));
    }
    let cells = observed.len() as i64;
    let df = cells - 1 - df_adjust as i64;
    if df < 1 {
        return Err(Error::Precondition(format!(
            "{cells} cells leave {df} degrees of freedom after adjusting by {df_adjust}"
        )));
    }
    let n: u64 = observed.iter().sum();
    let mut stat = 0.0;
    for (cell, (&o, &p)) in observed.iter().zip(probs).enumerate() {
        let e = n as f64 * p;
        if e < 1e-12 {
            return Err(Error::DegenerateCell { cell, expected: e });
        }
        stat += (o as f64 - e).powi(2) / e;
    }
    let df = df as u32;
    Ok(TestResult { statistic: stat, p_value: chi_square_survival(stat, df)?, df_or_n: df as f64 })
}

/// Cells {start}, {start+1}, …, {last}, {> last} for a count sample under a
/// pmf, where the right tail is pooled so every expected count reaches
/// `min_expected`. Returns (observed, probabilities).
pub fn discrete_cells<F>(
    sample: &[u64],
    support_start: u64,
    pmf: F,
    min_expected: f64,
) -> Result<(Vec<u64>, Vec<f64>)>
where
    F: Fn(u64) -> f64,
{
    if sample.is_empty() {
        return Err(domain("chi-square on an empty sample"));
    }
    let n = sample.len() as f64;
    let mut probs = Vec::new();
    let mut mass = 0.0;
    let mut k = support_start;
    loop {
        let pk = pmf(k);
        let rest = 1.0 - mass - pk;
        if n * pk < min_expected || n * rest < min_expected {
            break;
        }
        probs.push(pk);
        mass += pk;
        k += 1;
    }
    probs.push((1.0 - mass).max(0.0));
    let last = probs.len() - 1;
    let mut observed = vec![0u64; probs.len()];
    for &v in sample {
        if v < support_start {
            return Err(domain(format!("count {v} lies below the support start {support_start}")));
        }
        observed[((v - support_start) as usize).min(last)] += 1;
    }
    Ok((observed, probs))
}

/// Pearson test of a count sample against a pmf with tail pooling.
pub fn chi_square_pmf<F>(
    sample: &[u64],
    support_start: u64,
    pmf: F,
    min_expected: f64,
    df_adjust: u32,
) -> Result<TestResult>
where
    F: Fn(u64) -> f64,
{
    let (observed, mut probs) = discrete_cells(sample, support_start, pmf, min_expected)?;
    // absorb rounding in the pooled tail so the probabilities sum to one
    let head: f64 = probs[..probs.len() - 1].iter().sum();
    *probs.last_mut().expect("at least one cell") = 1.0 - head;
    pearson_chi_square(&observed, &probs, df_adjust)
}

/// Chi-square test of homogeneity for two count samples, on the 2×k table
/// of values with the upper tail pooled until every expected cell count
/// reaches `min_expected`.
pub fn chi_square_two_sample(a: &[u64], b: &[u64], min_expected: f64) -> Result<TestResult> {
    if a.is_empty() || b.is_empty() {
        return Err(domain("two-sample chi-square requires nonempty samples"));
    }
    let max = *a.iter().chain(b).max().expect("nonempty");
    let min = *a.iter().chain(b).min().expect("nonempty");
    let width = (max - min + 1) as usize;
    let mut ca = vec![0u64; width];
    let mut cb = vec![0u64; width];
    for &v in a {
        ca[(v - min) as usize] += 1;
    }
    for &v in b {
        cb[(v - min) as usize] += 1;
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let total = na + nb;
    let small = |col: u64| col as f64 * na.min(nb) / total < min_expected;
    // pool from the right until each column is large enough, then merge any small head
    let mut cells: Vec<(u64, u64)> = Vec::new();
    let mut acc = (0u64, 0u64);
    for i in (0..width).rev() {
        acc.0 += ca[i];
        acc.1 += cb[i];
        if !small(acc.0 + acc.1) {
            cells.push(acc);
            acc = (0, 0);
        }
    }
    if acc.0 + acc.1 > 0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += acc.0;
                last.1 += acc.1;
            }
            None => cells.push(acc),
        }
    }
    if cells.len() < 2 {
        return Ok(TestResult { statistic: 0.0, p_value: 1.0, df_or_n: 0.0 });
    }
    let mut stat = 0.0;
    for &(oa, ob) in &cells {
        let col = (oa + ob) as f64;
        let ea = col * na / total;
        let eb = col * nb / total;
        stat += (oa as f64 - ea).powi(2) / ea + (ob as f64 - eb).powi(2) / eb;
    }
    let df = (cells.len() - 1) as u32;
    Ok(TestResult { statistic: stat, p_value: chi_square_survival(stat, df)?, df_or_n: df as f64 })
}

/// QQ pairs (sample quantile, reference quantile) at k/(m+1), k = 1..m,
/// with m the smaller sample size.
pub fn qq_points(sample: &[f64], reference: &[f64]) -> Result<Vec<(f64, f64)>> {
    let es = EmpiricalDistribution::new(sample)?;
    let er = EmpiricalDistribution::new(reference)?;
    let m = es.len().min(er.len());
    Ok((1..=m)
        .map(|k| {
            let prob = k as f64 / (m as f64 + 1.0);
            (es.quantile(prob), er.quantile(prob))
        })
        .collect())
}

/// QQ pairs against a theoretical quantile function.
pub fn qq_points_quantile<F>(sample: &[f64], quantile: F) -> Result<Vec<(f64, f64)>>
where
    F: Fn(f64) -> f64,
{
    let es = EmpiricalDistribution::new(sample)?;
    let n = es.len() as f64;
    Ok(es
        .sorted()
        .iter()
        .enumerate()
        .map(|(i, &x)| (x, quantile((i + 1) as f64 / (n + 1.0))))
        .collect())
}

/// Writes QQ pairs with header `x,y`.
pub fn write_qq_csv<W: Write>(out: W, points: &[(f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "y"])?;
    for &(x, y) in points {
        w.write_record([format_sig17(x), format_sig17(y)])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ecdf_steps() {
        let e = empirical_cdf(&[1.0]).unwrap();
        assert_eq!(e.cdf(0.5), 0.0);
        assert_eq!(e.cdf(1.0), 1.0);
        let e = empirical_survival(&[3.0, 1.0, 2.0, 2.0]).unwrap();
        assert_eq!(e.survival(1.5), 0.75);
        assert_eq!(e.survival(2.0), 0.25);
        assert!(empirical_cdf(&[]).is_err());
    }

    #[test]
    fn kolmogorov_anchor() {
        // mpmath reference at λ = √549 · 0.0482
        let q = kolmogorov_survival(549f64.sqrt() * 0.0482);
        assert!((q - 0.155_946_05).abs() < 1e-7, "{q}");
        // both branches agree at the switch
        let c = PI * PI / 8.0;
        let dual: f64 = 1.0 - (2.0 * PI).sqrt() * (1..50).map(|k| (-((2 * k - 1) as f64).powi(2) * c).exp()).sum::<f64>();
        assert!((kolmogorov_survival(1.0) - dual).abs() < 1e-12);
        assert!((kolmogorov_survival(1.0 - 1e-12) - kolmogorov_survival(1.0)).abs() < 1e-10);
        assert!(kolmogorov_survival(9.0) < 1e-10);
        assert_eq!(kolmogorov_survival(0.0), 1.0);
    }

    #[test]
    fn ks_detects_bad_cdf() {
        assert!(matches!(ks_one_sample(&[0.1, 0.2], |x| 2.0 * x + 1.0), Err(Error::InvalidCdf(_))));
        assert!(matches!(ks_one_sample(&[0.1, 0.2], |x| 1.0 - x), Err(Error::InvalidCdf(_))));
    }

    #[test]
    fn ks_two_sample_identical() {
        let a = [0.3, 1.2, 0.7, 2.2];
        let r = ks_two_sample(&a, &a).unwrap();
        assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
        let r = ks_two_sample(&[0.0, 1.0], &[2.0, 3.0]).unwrap();
        assert_eq!(r.statistic, 1.0);
        assert_eq!(r.df_or_n, 1.0);
    }

    #[test]
    fn chi_square_survival_values() {
        // mpmath reference
        assert!((chi_square_survival(5.666, 1).unwrap() - 0.017_296_853).abs() < 1e-8);
        assert_eq!(chi_square_survival(0.0, 3).unwrap(), 1.0);
        let mid = chi_square_survival(100.0, 100).unwrap();
        assert!(mid > 0.45 && mid < 0.55);
        assert!(chi_square_survival(-1.0, 1).is_err());
        assert!(chi_square_survival(1.0, 0).is_err());
    }

    #[test]
    fn pearson_basic() {
        let r = pearson_chi_square(&[25, 50, 25], &[0.25, 0.5, 0.25], 0).unwrap();
        assert_eq!((r.statistic, r.p_value, r.df_or_n), (0.0, 1.0, 2.0));
        assert!(matches!(
            pearson_chi_square(&[1, 2], &[0.5, 0.4], 0),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            pearson_chi_square(&[1, 2, 0], &[0.5, 0.5, 0.0], 0),
            Err(Error::DegenerateCell { cell: 2, .. })
        ));
        assert!(pearson_chi_square(&[1, 2], &[0.5, 0.5], 1).is_err());
    }

    #[test]
    fn pearson_permutation_invariant() {
        let a = pearson_chi_square(&[10, 30, 60], &[0.2, 0.3, 0.5], 0).unwrap();
        let b = pearson_chi_square(&[60, 10, 30], &[0.5, 0.2, 0.3], 0).unwrap();
        assert!((a.statistic - b.statistic).abs() < 1e-12);
    }

    #[test]
    fn pooled_cells_meet_minimum() {
        let sample: Vec<u64> = (0..1000).map(|i| 1 + (i % 7) as u64 / 3).collect();
        let pmf = |k: u64| 0.5f64 * 0.5f64.powi(k as i32 - 1);
        let (obs, probs) = discrete_cells(&sample, 1, pmf, 5.0).unwrap();
        assert_eq!(obs.iter().sum::<u64>(), 1000);
        assert!(probs.iter().all(|p| 1000.0 * p >= 5.0));
    }

    #[test]
    fn homogeneity_identical_samples() {
        let a: Vec<u64> = (0..500).map(|i| (i % 9) as u64).collect();
        let r = chi_square_two_sample(&a, &a, 5.0).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn quantiles_and_qq() {
        let e = EmpiricalDistribution::new(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(e.quantile(0.5), 2.5);
        assert_eq!(e.quantile(0.01), 1.0);
        assert_eq!(e.quantile(0.99), 4.0);
        let s = [0.5, 2.0, 1.5, 3.5];
        for (x, y) in qq_points(&s, &s).unwrap() {
            assert_eq!(x, y);
        }
        let scaled: Vec<f64> = s.iter().map(|v| 3.0 * v).collect();
        for (x, y) in qq_points(&s, &scaled).unwrap() {
            assert!((y - 3.0 * x).abs() < 1e-12);
        }
        let mut buf = Vec::new();
        write_qq_csv(&mut buf, &[(1.0, 2.0)]).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("x,y\n"));
    }
}
