//! The bivariate gamma-geometric law BGG(β, α, p).
//!
//! `(X, N)` where `N ~ Geom(p)` on {1, 2, …} and, given `N = n`, `X` is the
//! sum of `n` iid Γ(α, β) variables (rate parametrization), i.e.
//! `X | N = n ~ Γ(nα, β)`. The α = 1 case is the bivariate
//! exponential-geometric (BEG) law.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::special::{
    erf, ln_reg_inc_gamma, ln_reg_inc_gamma_upper, log_beta, log_gamma, reg_inc_gamma,
    sum_series_log, SeriesControl, Term,
};

pub(crate) fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("{name} must be positive and finite, got {v}")))
    }
}

pub(crate) fn check_probability(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("{name} must lie strictly inside (0, 1), got {v}")))
    }
}

/// θ = (β, α, p): gamma rate, gamma shape per event, geometric success probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBgg")]
pub struct BggParams {
    beta: f64,
    alpha: f64,
    p: f64,
}

#[derive(Deserialize)]
struct RawBgg {
    beta: f64,
    alpha: f64,
    p: f64,
}

impl TryFrom<RawBgg> for BggParams {
    type Error = Error;
    fn try_from(r: RawBgg) -> Result<Self> {
        BggParams::new(r.beta, r.alpha, r.p)
    }
}

/// θ* = (μ, α, p) with μ = α/β, the mean of a single gamma summand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BggParamsOrtho {
    mu: f64,
    alpha: f64,
    p: f64,
}

impl BggParamsOrtho {
    pub fn new(mu: f64, alpha: f64, p: f64) -> Result<Self> {
        check_positive("mu", mu)?;
        check_positive("alpha", alpha)?;
        check_probability("p", p)?;
        Ok(Self { mu, alpha, p })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn to_rate(&self) -> BggParams {
        BggParams { beta: self.alpha / self.mu, alpha: self.alpha, p: self.p }
    }
}

/// Covariance matrix Σ of (X, N).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CovarianceMatrix {
    pub var_x: f64,
    pub var_n: f64,
    pub cov_xn: f64,
}

impl CovarianceMatrix {
    pub fn correlation(&self) -> f64 {
        self.cov_xn / (self.var_x * self.var_n).sqrt()
    }

    pub fn scaled(&self, r: f64) -> Self {
        Self { var_x: r * self.var_x, var_n: r * self.var_n, cov_xn: r * self.cov_xn }
    }
}

fn check_x(x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("x must be positive and finite, got {x}")))
    }
}

fn check_n(n: u64) -> Result<()> {
    if n >= 1 {
        Ok(())
    } else {
        Err(domain("count n must be at least 1 for the BGG law"))
    }
}

impl BggParams {
    pub fn new(beta: f64, alpha: f64, p: f64) -> Result<Self> {
        check_positive("beta", beta)?;
        check_positive("alpha", alpha)?;
        check_probability("p", p)?;
        Ok(Self { beta, alpha, p })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn to_ortho(&self) -> BggParamsOrtho {
        BggParamsOrtho { mu: self.alpha / self.beta, alpha: self.alpha, p: self.p }
    }

    fn ln_q(&self) -> f64 {
        (-self.p).ln_1p()
    }

    /// ln a(x) with a(x) = (1−p)(βx)^α, the power-series parameter of N | X = x.
    fn ln_a(&self, x: f64) -> f64 {
        self.ln_q() + self.alpha * (self.beta * x).ln()
    }

    /// ln f(x, n).
    pub fn ln_joint_pdf(&self, x: f64, n: u64) -> Result<f64> {
        check_x(x)?;
        check_n(n)?;
        let na = n as f64 * self.alpha;
        Ok(na * self.beta.ln() - log_gamma(na)? + (na - 1.0) * x.ln() - self.beta * x
            + self.p.ln()
            + (n - 1) as f64 * self.ln_q())
    }

    /// f(x, n) = β^{nα}/Γ(nα) x^{nα−1} e^{−βx} p(1−p)^{n−1}.
    pub fn joint_pdf(&self, x: f64, n: u64) -> Result<f64> {
        self.ln_joint_pdf(x, n).map(f64::exp)
    }

    /// P(X ≤ x, N ≤ n).
    pub fn joint_cdf(&self, x: f64, n: u64) -> Result<f64> {
        check_x(x)?;
        check_n(n)?;
        let q = 1.0 - self.p;
        let mut sum = 0.0;
        let mut w = self.p;
        for j in 1..=n {
            let pj = reg_inc_gamma(j as f64 * self.alpha, self.beta * x)?;
            sum += w * pj;
            w *= q;
            if w == 0.0 {
                break;
            }
        }
        Ok(sum.min(1.0))
    }

    /// ln Σ_{n≥1} a^n / Γ(nα).
    fn ln_power_series(&self, x: f64, ctl: &SeriesControl) -> Result<f64> {
        let ln_a = self.ln_a(x);
        let alpha = self.alpha;
        let terms = (1u64..).map(|n| {
            Term::positive(n as f64 * ln_a - log_gamma(n as f64 * alpha).unwrap_or(f64::NAN))
        });
        Ok(sum_series_log(terms, ctl)?.log_abs)
    }

    /// ln f_X(x) from the gamma-mixture series.
    pub fn ln_marginal_pdf_x(&self, x: f64, ctl: &SeriesControl) -> Result<f64> {
        check_x(x)?;
        Ok(self.p.ln() - x.ln() - self.beta * x - self.ln_q() + self.ln_power_series(x, ctl)?)
    }

    /// Marginal density of X, an infinite mixture of Γ(nα, β) densities with geometric weights.
    pub fn marginal_pdf_x(&self, x: f64, ctl: &SeriesControl) -> Result<f64> {
        self.ln_marginal_pdf_x(x, ctl).map(f64::exp)
    }

    /// P(X ≤ x) = p Σ_{j≥1} (1−p)^{j−1} P(jα, βx).
    pub fn marginal_cdf_x(&self, x: f64, ctl: &SeriesControl) -> Result<f64> {
        check_x(x)?;
        Ok((self.p.ln() + self.ln_cdf_series(x, ctl)?).exp().min(1.0))
    }

    /// P(X > x), summed directly from upper incomplete gammas.
    pub fn marginal_survival_x(&self, x: f64, ctl: &SeriesControl) -> Result<f64> {
        check_x(x)?;
        let ln_q = self.ln_q();
        let (alpha, bx) = (self.alpha, self.beta * x);
        let terms = (1u64..).map(|j| {
            let v = ln_reg_inc_gamma_upper(j as f64 * alpha, bx).unwrap_or(f64::NAN);
            Term::positive((j - 1) as f64 * ln_q + v)
        });
        // Q(jα, ·) grows in j, so the terms can rise before the geometric decay wins.
        let s = sum_series_log(terms, ctl)?;
        Ok((self.p.ln() + s.log_abs).exp().min(1.0))
    }

    /// ln Σ_{j≥1} (1−p)^{j−1} P(jα, βx).
    fn ln_cdf_series(&self, x: f64, ctl: &SeriesControl) -> Result<f64> {
        let ln_q = self.ln_q();
        let (alpha, bx) = (self.alpha, self.beta * x);
        let terms = (1u64..).map(|j| {
            let v = ln_reg_inc_gamma(j as f64 * alpha, bx).unwrap_or(f64::NAN);
            Term::positive((j - 1) as f64 * ln_q + v)
        });
        Ok(sum_series_log(terms, ctl)?.log_abs)
    }

    /// Closed-form marginal density of X for α ∈ {1/2, 1, 2, 3, 4}.
    pub fn marginal_pdf_x_closed(&self, x: f64) -> Result<f64> {
        check_x(x)?;
        let (beta, p) = (self.beta, self.p);
        let q = 1.0 - p;
        let bx = beta * x;
        let a = q * bx.powf(self.alpha);
        let v = match self.alpha {
            0.5 => {
                // e^{a²} and e^{−βx} are combined before exponentiating
                let core = a * (a * a - bx).exp() * (1.0 + erf(a))
                    + (-bx).exp() / std::f64::consts::PI.sqrt();
                p * beta.sqrt() / x.sqrt() * core
            }
            1.0 => p * beta * (-p * bx).exp(),
            2.0 => {
                let z = bx * q.sqrt();
                let sinh_scaled = 0.5 * ((z - bx).exp() - (-z - bx).exp());
                p * beta * sinh_scaled / q.sqrt()
            }
            3.0 => {
                let b = a.cbrt();
                let inner = (b - bx).exp()
                    - 2.0 * (-0.5 * b - bx).exp()
                        * ((3.0 * 3f64.sqrt() * b + std::f64::consts::PI) / 6.0).sin();
                p / (3.0 * q * x) * b * inner
            }
            4.0 => {
                let b = a.sqrt().sqrt();
                let sinh_scaled = 0.5 * ((b - bx).exp() - (-b - bx).exp());
                p / (2.0 * q * x) * b * (sinh_scaled - (-bx).exp() * b.sin())
            }
            other => {
                return Err(Error::Unsupported(format!(
                    "closed-form marginal exists only for alpha in {{0.5, 1, 2, 3, 4}}, got {other}"
                )))
            }
        };
        Ok(v)
    }

    /// P(N = n | X = x).
    pub fn conditional_pmf_n_given_x(&self, x: f64, n: u64, ctl: &SeriesControl) -> Result<f64> {
        check_x(x)?;
        check_n(n)?;
        let na = n as f64 * self.alpha;
        let ln_num = n as f64 * self.ln_a(x) - log_gamma(na)?;
        Ok((ln_num - self.ln_power_series(x, ctl)?).exp())
    }

    fn partial_cdf_sum(&self, x: f64, m: u64) -> Result<f64> {
        let q = 1.0 - self.p;
        let mut w = 1.0;
        let mut sum = 0.0;
        for j in 1..=m {
            sum += w * reg_inc_gamma(j as f64 * self.alpha, self.beta * x)?;
            w *= q;
            if w == 0.0 {
                break;
            }
        }
        Ok(sum)
    }

    /// P(X ≤ x, N ≤ m | N ≤ n) for m ≤ n.
    pub fn conditional_cdf_given_n_le(&self, x: f64, m: u64, n: u64) -> Result<f64> {
        check_x(x)?;
        check_n(m)?;
        if m > n {
            return Err(domain(format!("conditioning requires m <= n, got m={m}, n={n}")));
        }
        let norm = -((n as f64) * self.ln_q()).exp_m1();
        Ok((self.p * self.partial_cdf_sum(x, m)? / norm).min(1.0))
    }

    /// Precomputes the x-independent denominator for conditioning on X ≤ y.
    pub fn given_x_le(&self, y: f64, ctl: &SeriesControl) -> Result<GivenXLe> {
        check_x(y)?;
        Ok(GivenXLe { params: *self, y, ln_denominator: self.ln_cdf_series(y, ctl)? })
    }

    /// P(X ≤ x, N ≤ n | X ≤ y) for 0 < x ≤ y.
    pub fn conditional_cdf_given_x_le(
        &self,
        x: f64,
        n: u64,
        y: f64,
        ctl: &SeriesControl,
    ) -> Result<f64> {
        self.given_x_le(y, ctl)?.cdf(x, n)
    }

    /// Joint mgf E[e^{tX + sN}], defined for t < β{1 − [(1−p)e^s]^{1/α}}.
    pub fn mgf(&self, t: f64, s: f64) -> Result<f64> {
        let (beta, alpha, p) = (self.beta, self.alpha, self.p);
        let ratio = (1.0 - p) * s.exp();
        let bound = beta * (1.0 - ratio.powf(1.0 / alpha));
        if !(ratio < 1.0) || !(t < bound) {
            return Err(domain(format!(
                "mgf defined only for t < beta*(1 - ((1-p)e^s)^(1/alpha)) = {bound} (t={t}, s={s})"
            )));
        }
        let denom = (beta - t).powf(alpha) - s.exp() * beta.powf(alpha) * (1.0 - p);
        Ok(p * s.exp() * beta.powf(alpha) / denom)
    }

    /// Joint characteristic function E[e^{i(tX + sN)}].
    pub fn cf(&self, t: f64, s: f64) -> Complex64 {
        let (beta, alpha, p) = (self.beta, self.alpha, self.p);
        let eis = Complex64::from_polar(1.0, s);
        let ba = beta.powf(alpha);
        // Re(β − it) = β > 0, so the principal power is the continuous branch.
        let base = Complex64::new(beta, -t).powf(alpha);
        eis * (p * ba) / (base - eis * (ba * (1.0 - p)))
    }

    /// Σ_{n≥1} n^k (1−p)^{n−1} / B(αn, r) on the log scale.
    fn ln_moment_series(&self, r: f64, k: u32, ctl: &SeriesControl) -> Result<f64> {
        let ln_q = self.ln_q();
        let alpha = self.alpha;
        let terms = (1u64..).map(|n| {
            let nf = n as f64;
            let lb = log_beta(alpha * nf, r).unwrap_or(f64::NAN);
            Term::positive(k as f64 * nf.ln() + (nf - 1.0) * ln_q - lb)
        });
        Ok(sum_series_log(terms, ctl)?.log_abs)
    }

    /// E[X^m N^k].
    pub fn product_moment(&self, m: u32, k: u32, ctl: &SeriesControl) -> Result<f64> {
        if m == 0 {
            return Err(domain("product moment requires m >= 1"));
        }
        let mf = m as f64;
        let s = self.ln_moment_series(mf, k, ctl)?;
        Ok((self.p.ln() + log_gamma(mf)? - mf * self.beta.ln() + s).exp())
    }

    /// E[X^r] for real r > 0.
    pub fn marginal_moment_x(&self, r: f64, ctl: &SeriesControl) -> Result<f64> {
        check_positive("moment order r", r)?;
        let s = self.ln_moment_series(r, 0, ctl)?;
        Ok((self.p.ln() + log_gamma(r)? - r * self.beta.ln() + s).exp())
    }

    pub fn mean_x(&self) -> f64 {
        self.alpha / (self.p * self.beta)
    }

    pub fn mean_n(&self) -> f64 {
        1.0 / self.p
    }

    pub fn covariance(&self) -> CovarianceMatrix {
        let (beta, alpha, p) = (self.beta, self.alpha, self.p);
        let q = 1.0 - p;
        CovarianceMatrix {
            var_x: q * alpha * alpha / (p * p * beta * beta) + alpha / (beta * beta * p),
            var_n: q / (p * p),
            cov_xn: q * alpha / (beta * p * p),
        }
    }

    /// ρ = √[(1−p)/(1−p+p/α)].
    pub fn correlation(&self) -> f64 {
        let q = 1.0 - self.p;
        (q / (q + self.p / self.alpha)).sqrt()
    }
}

/// P(· | X ≤ y) with the denominator series evaluated once.
#[derive(Debug, Clone, Copy)]
pub struct GivenXLe {
    params: BggParams,
    y: f64,
    ln_denominator: f64,
}

impl GivenXLe {
    pub fn y(&self) -> f64 {
        self.y
    }

    /// P(X ≤ x, N ≤ n | X ≤ y).
    pub fn cdf(&self, x: f64, n: u64) -> Result<f64> {
        check_x(x)?;
        check_n(n)?;
        if x > self.y {
            return Err(domain(format!("conditioning requires x <= y, got x={x}, y={}", self.y)));
        }
        let num = self.params.partial_cdf_sum(x, n)?;
        Ok((num.ln() - self.ln_denominator).exp().min(1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctl() -> SeriesControl {
        SeriesControl::default()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn parameter_validation() {
        assert!(BggParams::new(1.0, 1.0, 0.0).is_err());
        assert!(BggParams::new(1.0, 1.0, 1.0).is_err());
        assert!(BggParams::new(0.0, 1.0, 0.5).is_err());
        assert!(BggParams::new(1.0, -2.0, 0.5).is_err());
        let th = BggParams::new(2.5, 0.8, 0.3).unwrap();
        let back = th.to_ortho().to_rate();
        assert!(close(back.beta(), 2.5, 1e-15));
        let json = serde_json::to_string(&th).unwrap();
        let de: BggParams = serde_json::from_str(&json).unwrap();
        assert_eq!(de, th);
        assert!(serde_json::from_str::<BggParams>(r#"{"beta":1,"alpha":1,"p":1.5}"#).is_err());
    }

    #[test]
    fn joint_pdf_examples() {
        let th = BggParams::new(1.0, 1.0, 0.5).unwrap();
        assert!(close(th.joint_pdf(1.0, 1).unwrap(), 0.5 * (-1f64).exp(), 1e-15));
        assert!(close(th.joint_pdf(1.0, 2).unwrap(), 0.25 * (-1f64).exp(), 1e-15));
        let th = BggParams::new(2.0, 0.8805, 0.5093).unwrap();
        let v = th.joint_pdf(0.5, 3).unwrap();
        assert!(((v - 0.061_151_788_555_393_46) / v).abs() < 1e-13, "{v}");
        assert!(th.joint_pdf(0.5, 0).is_err());
        assert!(th.joint_pdf(-0.5, 1).is_err());
    }

    #[test]
    fn beg_reduction_is_exact() {
        let th = BggParams::new(1.7, 1.0, 0.35).unwrap();
        for n in 1..30u64 {
            for &x in &[0.05f64, 0.9, 4.0, 17.0] {
                let lf: f64 = (1..n).map(|j| (j as f64).ln()).sum();
                let want = n as f64 * 1.7f64.ln() - lf + (n - 1) as f64 * x.ln() - 1.7 * x
                    + 0.35f64.ln()
                    + (n - 1) as f64 * 0.65f64.ln();
                assert!(close(th.ln_joint_pdf(x, n).unwrap(), want, 1e-11));
            }
        }
    }

    #[test]
    fn joint_cdf_examples() {
        let th = BggParams::new(1.0, 1.0, 0.5).unwrap();
        assert!(close(th.joint_cdf(2f64.ln(), 1).unwrap(), 0.25, 1e-15));
        let th = BggParams::new(1.0, 2.0, 0.5).unwrap();
        assert!(close(th.joint_cdf(1.0, 2).unwrap(), 0.136_867_598_047_596_13, 1e-14));
        for th in [th, BggParams::new(3.0, 0.4, 0.1).unwrap()] {
            let v = th.joint_cdf(1e9 / th.beta(), 2000).unwrap();
            assert!(close(v, 1.0, 1e-9));
        }
    }

    #[test]
    fn joint_cdf_matches_quadrature() {
        // Simpson rule over the joint density, independent of the incomplete gamma path.
        let th = BggParams::new(1.0, 2.0, 0.5).unwrap();
        let steps = 20_000;
        let h = 1.0 / steps as f64;
        let mut total = 0.0;
        for n in 1..=2u64 {
            let f = |x: f64| if x == 0.0 { 0.0 } else { th.joint_pdf(x, n).unwrap() };
            let mut s = f(0.0) + f(1.0);
            for i in 1..steps {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                s += w * f(i as f64 * h);
            }
            total += s * h / 3.0;
        }
        assert!(close(th.joint_cdf(1.0, 2).unwrap(), total, 1e-9));
    }

    #[test]
    fn marginal_examples() {
        let c = ctl();
        let th = BggParams::new(1.0, 1.0, 0.3).unwrap();
        assert!(close(th.marginal_pdf_x(2.0, &c).unwrap(), 0.3 * (-0.6f64).exp(), 1e-14));
        let th = BggParams::new(1.0, 2.0, 0.5).unwrap();
        let v = th.marginal_pdf_x(1.0, &c).unwrap();
        assert!(close(v, 0.199_655_832_207_789_9, 1e-14));
        assert!(close(th.marginal_pdf_x_closed(1.0).unwrap(), v, 1e-14));
        let th = BggParams::new(1.0, 3.0, 0.2).unwrap();
        assert!(close(th.marginal_pdf_x(0.7, &c).unwrap(), 0.024_444_052_246_838_262, 1e-15));
        assert!(close(th.marginal_pdf_x_closed(0.7).unwrap(), 0.024_444_052_246_838_262, 1e-10));
        let th = BggParams::new(1.0, 4.0, 0.5).unwrap();
        assert!(close(th.marginal_pdf_x(1.0, &c).unwrap(), 0.030_674_869_237_810_576, 1e-15));
        assert!(close(th.marginal_pdf_x_closed(1.0).unwrap(), 0.030_674_869_237_810_576, 1e-10));
        let th = BggParams::new(2.0, 1.0, 0.5).unwrap();
        assert!(close(th.marginal_pdf_x_closed(1.0).unwrap(), (-1f64).exp(), 1e-15));
    }

    #[test]
    fn half_alpha_closed_form_uses_conventional_erf() {
        let c = ctl();
        let th = BggParams::new(1.0, 0.5, 0.5).unwrap();
        let series = th.marginal_pdf_x(1.0, &c).unwrap();
        assert!(close(series, 0.283_335_195_786_569_4, 1e-12));
        assert!(close(th.marginal_pdf_x_closed(1.0).unwrap(), series, 1e-12));
        // same closed form with the e^{-t²/2} error-function variant
        let a = 0.5f64;
        let alt = 0.5 * (-1f64).exp()
            * (a * (a * a).exp() * (1.0 + crate::special::erf_half_gaussian(a))
                + 1.0 / std::f64::consts::PI.sqrt());
        assert!((alt - series).abs() > 1e-3);
        assert!(th.with_alpha(1.5).marginal_pdf_x_closed(1.0).is_err());
    }

    #[test]
    fn marginal_is_sum_of_joint() {
        let c = ctl();
        let th = BggParams::new(1.3, 0.7, 0.25).unwrap();
        for i in 1..40 {
            let x = 0.2 * i as f64;
            let direct: f64 = (1..400u64).map(|n| th.joint_pdf(x, n).unwrap()).sum();
            assert!(close(direct, th.marginal_pdf_x(x, &c).unwrap(), 1e-10));
        }
    }

    #[test]
    fn extreme_marginal_arguments_stay_finite() {
        let c = ctl();
        let th = BggParams::new(1.0, 0.3, 0.01).unwrap();
        for &x in &[1e-8, 1e3, 1e4] {
            let v = th.ln_marginal_pdf_x(x, &c).unwrap();
            assert!(v.is_finite(), "x={x}: {v}");
        }
        // the series peaks near n ≈ 1.6e5 here, past the default cap
        let err = th.ln_marginal_pdf_x(5e4, &c).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { terms: 100_000, .. }));
    }

    #[test]
    fn marginal_cdf_and_survival_complement() {
        let c = ctl();
        let th = BggParams::new(1.0, 2.5, 0.4).unwrap();
        for &x in &[0.01, 0.5, 3.0, 10.0, 40.0] {
            let f = th.marginal_cdf_x(x, &c).unwrap();
            let s = th.marginal_survival_x(x, &c).unwrap();
            assert!(close(f + s, 1.0, 1e-11), "x={x}");
        }
    }

    #[test]
    fn conditional_pmf_examples() {
        let c = ctl();
        // α = 1: N − 1 | X = x is Poisson(βx(1−p)), so P(N = 1 | X = 1) = e^{−1/2}
        let th = BggParams::new(1.0, 1.0, 0.5).unwrap();
        let lam = 0.5f64;
        assert!(close(th.conditional_pmf_n_given_x(1.0, 1, &c).unwrap(), (-lam).exp(), 1e-13));
        for n in 1..8u64 {
            let bayes = th.joint_pdf(1.0, n).unwrap() / th.marginal_pdf_x(1.0, &c).unwrap();
            assert!(close(th.conditional_pmf_n_given_x(1.0, n, &c).unwrap(), bayes, 1e-13));
        }
        let th = BggParams::new(1.0, 2.0, 0.75).unwrap();
        let got = th.conditional_pmf_n_given_x(2.0, 1, &c).unwrap();
        assert!(close(got, 1.0 / 1f64.sinh(), 1e-13));
        // sinh form for general n
        let (x, q) = (2.0f64, 0.25f64);
        for n in 1..6u64 {
            let lf: f64 = (1..=2 * n - 1).map(|j| (j as f64).ln()).sum();
            let want = (q.powf(n as f64 - 0.5) * x.powi(2 * n as i32 - 1)).ln()
                - lf
                - (x * q.sqrt()).sinh().ln();
            assert!(close(th.conditional_pmf_n_given_x(x, n, &c).unwrap(), want.exp(), 1e-13));
        }
        let total: f64 = (1..200).map(|n| th.conditional_pmf_n_given_x(3.3, n, &c).unwrap()).sum();
        assert!(close(total, 1.0, 1e-9));
    }

    #[test]
    fn conditional_cdfs() {
        let c = ctl();
        let th = BggParams::new(1.0, 2.0, 0.5).unwrap();
        assert!(close(th.conditional_cdf_given_n_le(1e6, 5, 5).unwrap(), 1.0, 1e-9));
        let x = 0.8;
        assert!(close(
            th.conditional_cdf_given_n_le(x, 1, 1).unwrap(),
            reg_inc_gamma(2.0, x).unwrap(),
            1e-15
        ));
        assert!(th.conditional_cdf_given_n_le(1.0, 3, 2).is_err());

        let g = th.given_x_le(2.0, &c).unwrap();
        assert!(close(g.cdf(2.0, 500).unwrap(), 1.0, 1e-9));
        assert!(g.cdf(2.5, 1).is_err());
        let mut prev = 0.0;
        for n in 1..10 {
            let v = g.cdf(1.5, n).unwrap();
            assert!(v >= prev);
            prev = v;
        }
        // P(N ≤ n | X ≤ y) recovered at x = y
        let y = 2.0;
        let want = th.joint_cdf(y, 3).unwrap() / th.marginal_cdf_x(y, &c).unwrap();
        assert!(close(g.cdf(y, 3).unwrap(), want, 1e-12));
    }

    #[test]
    fn mgf_examples_and_domain() {
        let th = BggParams::new(1.0, 1.0, 0.5).unwrap();
        assert!(close(th.mgf(0.0, 0.0).unwrap(), 1.0, 1e-15));
        assert!(close(th.mgf(0.25, 0.0).unwrap(), 2.0, 1e-14));
        let s = 0.3f64;
        assert!(close(th.mgf(0.0, s).unwrap(), 0.5 * s.exp() / (1.0 - 0.5 * s.exp()), 1e-14));
        assert!(th.mgf(0.6, 0.0).is_err());
        assert!(th.mgf(0.0, 1.0).is_err());
    }

    #[test]
    fn limit_law_of_scaled_mgf() {
        let (beta, alpha) = (2.0, 1.7);
        let th = BggParams::new(beta, alpha, 1e-6).unwrap();
        for &(t, s) in &[(0.3, 0.1), (-1.0, 0.4), (0.5, -0.7)] {
            let p = th.p();
            let got = th.mgf(p * t, p * s).unwrap();
            let want = 1.0 / (1.0 - s - alpha * t / beta);
            assert!(close(got, want, 1e-4), "(t,s)=({t},{s}): {got} vs {want}");
        }
    }

    #[test]
    fn cf_properties() {
        let th = BggParams::new(1.0, 2.0, 0.5).unwrap();
        let one = th.cf(0.0, 0.0);
        assert!(close(one.re, 1.0, 1e-15) && one.im.abs() < 1e-15);
        let th3 = BggParams::new(0.7, 3.4, 0.2).unwrap();
        for i in -20..=20 {
            for j in -10..=10 {
                let v = th3.cf(0.9 * i as f64, 0.45 * j as f64);
                assert!(v.norm() <= 1.0 + 1e-12);
            }
        }
        // cf(t, 0) for the α = 1 case: X ~ Exp(pβ)
        let beg = BggParams::new(2.0, 1.0, 0.25).unwrap();
        let t = 0.9;
        let want = Complex64::new(0.5, 0.0) / Complex64::new(0.5, -t);
        assert!((beg.cf(t, 0.0) - want).norm() < 1e-14);
    }

    #[test]
    fn moments() {
        let c = ctl();
        let th = BggParams::new(1.4, 0.9, 0.3).unwrap();
        assert!(close(th.product_moment(1, 0, &c).unwrap(), th.mean_x(), 1e-10));
        assert!(close(th.marginal_moment_x(1.0, &c).unwrap(), th.mean_x(), 1e-10));
        let beg = BggParams::new(1.0, 1.0, 0.5).unwrap();
        assert!(close(beg.product_moment(1, 1, &c).unwrap(), 6.0, 1e-11));
        let cov = beg.covariance();
        let ex2 = beg.marginal_moment_x(2.0, &c).unwrap();
        assert!(close(ex2, cov.var_x + beg.mean_x().powi(2), 1e-11));
        // E N^2 via k = 2, m = ... use E[X N] against Σ for general α
        let sig = th.covariance();
        let exn = th.product_moment(1, 1, &c).unwrap();
        assert!(close(exn - th.mean_x() * th.mean_n(), sig.cov_xn, 1e-10));
        let ex2 = th.product_moment(2, 0, &c).unwrap();
        assert!(close(ex2 - th.mean_x().powi(2), sig.var_x, 1e-10));
        assert!(th.product_moment(0, 1, &c).is_err());
    }

    #[test]
    fn covariance_and_correlation() {
        let s = BggParams::new(1.0, 1.0, 0.5).unwrap().covariance();
        // α = 1: X ~ Exp(pβ), Var X = 1/(pβ)² = 4
        assert!(close(s.var_x, 4.0, 1e-15) && close(s.var_n, 2.0, 1e-15) && close(s.cov_xn, 2.0, 1e-15));
        let s1 = BggParams::new(7.0, 0.2, 0.3).unwrap().covariance();
        let s2 = BggParams::new(0.1, 5.0, 0.3).unwrap().covariance();
        assert_eq!(s1.var_n, s2.var_n);
        assert!(close(BggParams::new(1.0, 1.0, 0.36).unwrap().correlation(), 0.8, 1e-15));
        let th = BggParams::new(1.0, 0.8805, 0.5093).unwrap();
        assert!(close(th.correlation(), 0.6775, 1e-4));
        assert!(close(th.correlation(), th.covariance().correlation(), 1e-14));
        let big = BggParams::new(1.0, 1e9, 0.3).unwrap();
        // (1−p)/(1−p+p/α) → 1 as α grows
        assert!(close(big.correlation(), 1.0, 1e-9));
    }

    #[test]
    fn correlation_ordering_against_beg() {
        for i in 1..20 {
            let p = i as f64 / 20.0;
            let mut prev = 0.0;
            for j in 1..40 {
                let alpha = 0.1 * j as f64;
                let rho = BggParams::new(1.0, alpha, p).unwrap().correlation();
                assert!(rho > prev);
                prev = rho;
                let beg = (1.0 - p).sqrt();
                assert_eq!(rho <= beg + 1e-15, alpha <= 1.0, "alpha={alpha}, p={p}");
            }
        }
    }

    impl BggParams {
        fn with_alpha(&self, alpha: f64) -> Self {
            BggParams::new(self.beta, alpha, self.p).unwrap()
        }
    }
}
