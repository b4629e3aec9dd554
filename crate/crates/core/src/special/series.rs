use crate::error::{domain, Error, Result};

/// Truncation policy for every infinite series in the crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_terms: usize,
}

impl Default for SeriesControl {
    fn default() -> Self {
        Self { rel_tol: 1e-12, abs_tol: 1e-300, max_terms: 100_000 }
    }
}

impl SeriesControl {
    pub fn new(rel_tol: f64, abs_tol: f64, max_terms: usize) -> Result<Self> {
        if !(rel_tol > 0.0) || !(abs_tol > 0.0) || max_terms == 0 {
            return Err(domain(format!(
                "series control needs rel_tol > 0, abs_tol > 0, max_terms >= 1 \
                 (got {rel_tol}, {abs_tol}, {max_terms})"
            )));
        }
        Ok(Self { rel_tol, abs_tol, max_terms })
    }
}

/// One series term: natural log of its magnitude and its sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub log_mag: f64,
    pub negative: bool,
}

impl Term {
    pub fn positive(log_mag: f64) -> Self {
        Self { log_mag, negative: false }
    }

    pub fn from_value(v: f64) -> Self {
        Self { log_mag: v.abs().ln(), negative: v < 0.0 }
    }
}

/// Result of a log-space summation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesSum {
    /// ln |S| (−∞ for an exactly zero sum)
    pub log_abs: f64,
    pub negative: bool,
    /// number of terms consumed
    pub terms: usize,
}

impl SeriesSum {
    pub fn value(&self) -> f64 {
        let v = self.log_abs.exp();
        if self.negative {
            -v
        } else {
            v
        }
    }
}

/// Sum stored as `acc · e^{scale}`.
#[derive(Debug, Clone, Copy)]
struct Accumulator {
    scale: f64,
    acc: f64,
}

impl Accumulator {
    fn new() -> Self {
        Self { scale: f64::NEG_INFINITY, acc: 0.0 }
    }

    fn add(&mut self, t: Term) {
        if t.log_mag == f64::NEG_INFINITY {
            return;
        }
        let s = if t.negative { -1.0 } else { 1.0 };
        if self.scale == f64::NEG_INFINITY {
            self.scale = t.log_mag;
            self.acc = s;
        } else if t.log_mag > self.scale {
            self.acc = self.acc * (self.scale - t.log_mag).exp() + s;
            self.scale = t.log_mag;
        } else {
            self.acc += s * (t.log_mag - self.scale).exp();
        }
    }

    fn log_abs(&self) -> f64 {
        if self.scale == f64::NEG_INFINITY || self.acc == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.scale + self.acc.abs().ln()
        }
    }

    fn finish(&self, terms: usize) -> SeriesSum {
        SeriesSum { log_abs: self.log_abs(), negative: self.acc < 0.0, terms }
    }
}

/// Sums a series of log-space terms.
///
/// Stops after the first term (from the second on) that is both no larger
/// than its predecessor and below `max(abs_tol, rel_tol·|partial sum|)`; the
/// decreasing-term condition lets rising initial segments (mixtures peaked
/// away from the first index) pass through untouched. A finite iterator is
/// summed completely.
pub fn sum_series_log<I>(terms: I, ctl: &SeriesControl) -> Result<SeriesSum>
where
    I: IntoIterator<Item = Term>,
{
    let ln_abs = ctl.abs_tol.ln();
    let ln_rel = ctl.rel_tol.ln();
    let mut acc = Accumulator::new();
    let mut prev = f64::INFINITY;
    let mut count = 0usize;
    for t in terms {
        if t.log_mag.is_nan() || t.log_mag == f64::INFINITY {
            return Err(domain(format!("series term {count} is not finite ({})", t.log_mag)));
        }
        acc.add(t);
        count += 1;
        let threshold = ln_abs.max(ln_rel + acc.log_abs());
        if count >= 2 && t.log_mag <= prev && t.log_mag <= threshold {
            return Ok(acc.finish(count));
        }
        prev = t.log_mag;
        if count >= ctl.max_terms {
            return Err(Error::NonConvergence { partial: acc.finish(count).value(), terms: count });
        }
    }
    Ok(acc.finish(count))
}

/// Plain-valued convenience wrapper around [`sum_series_log`].
pub fn sum_series<I>(terms: I, ctl: &SeriesControl) -> Result<f64>
where
    I: IntoIterator<Item = f64>,
{
    sum_series_log(terms.into_iter().map(Term::from_value), ctl).map(|s| s.value())
}

/// ln Σ e^{xᵢ} over a finite collection.
pub fn log_sum_exp<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = Accumulator::new();
    for v in values {
        acc.add(Term::positive(v));
    }
    acc.log_abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_series() {
        let ctl = SeriesControl::default();
        let s = sum_series((0..).map(|k| 0.5f64.powi(k)), &ctl).unwrap();
        assert!((s - 2.0).abs() < 1e-11);
    }

    #[test]
    fn exponential_series_in_log_space() {
        // Σ x^k/k! = e^x, terms rise until k ≈ x
        let ctl = SeriesControl::default();
        let x: f64 = 800.0;
        let terms = (0u64..).map(|k| {
            let lf: f64 = (1..=k).map(|j| (j as f64).ln()).sum();
            Term::positive(k as f64 * x.ln() - lf)
        });
        let s = sum_series_log(terms, &ctl).unwrap();
        assert!((s.log_abs - x).abs() / x < 1e-12);
        assert!(s.value().is_infinite());
    }

    #[test]
    fn all_zero_terms() {
        let ctl = SeriesControl::default();
        assert_eq!(sum_series(std::iter::repeat(0.0), &ctl).unwrap(), 0.0);
    }

    #[test]
    fn alternating_signs() {
        // ln 2 = Σ (−1)^{k+1}/k converges slowly; use e^{-1} = Σ (−1)^k/k!
        let ctl = SeriesControl::default();
        let mut f = 1.0;
        let terms = (0..).map(move |k: i32| {
            if k > 0 {
                f *= k as f64;
            }
            (-1f64).powi(k) / f
        });
        assert!((sum_series(terms, &ctl).unwrap() - (-1f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn exhausting_the_cap_is_an_error() {
        let ctl = SeriesControl::new(1e-12, 1e-300, 50).unwrap();
        let err = sum_series((1..).map(|k| 1.0 / k as f64), &ctl).unwrap_err();
        match err {
            Error::NonConvergence { partial, terms } => {
                assert_eq!(terms, 50);
                assert!(partial > 4.0);
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn control_validation() {
        assert!(SeriesControl::new(0.0, 1e-300, 10).is_err());
        assert!(SeriesControl::new(1e-12, -1.0, 10).is_err());
        assert!(SeriesControl::new(1e-12, 1e-300, 0).is_err());
    }

    #[test]
    fn log_sum_exp_matches_direct() {
        let v = [0.1f64, -3.0, 2.5];
        let direct: f64 = v.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(v) - direct).abs() < 1e-15);
        assert_eq!(log_sum_exp(std::iter::empty()), f64::NEG_INFINITY);
    }
}
