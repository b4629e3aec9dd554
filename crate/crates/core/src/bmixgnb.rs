//! The BMixGNB(β, α, p, r) law: the value at time r of the bivariate Lévy
//! process `W(r) = (G(r + NB(r)), NB(r))`, where `NB` is a negative binomial
//! process and `G` a gamma process with shape rate α and scale 1/β.
//!
//! At r = 1 the pair `(Y, M + 1)` is BGG(β, α, p), which the tests exploit
//! throughout.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bgg::{check_positive, check_probability, BggParams, CovarianceMatrix};
use crate::error::{domain, Result};
use crate::sample::{check_grid, gamma_unchecked, nb_unchecked};
use crate::special::{
    ln_reg_inc_gamma, log_factorial, log_gamma, reg_inc_gamma, sum_series_log, SeriesControl, Term,
};

/// (β, α, p, r): gamma rate, gamma shape per unit, NB success probability, time index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBmixgnb")]
pub struct BmixgnbParams {
    beta: f64,
    alpha: f64,
    p: f64,
    r: f64,
}

#[derive(Deserialize)]
struct RawBmixgnb {
    beta: f64,
    alpha: f64,
    p: f64,
    r: f64,
}

impl TryFrom<RawBmixgnb> for BmixgnbParams {
    type Error = crate::Error;
    fn try_from(v: RawBmixgnb) -> Result<Self> {
        Self::new(v.beta, v.alpha, v.p, v.r)
    }
}

fn check_y(y: f64) -> Result<()> {
    if y > 0.0 && y.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("y must be positive and finite, got {y}")))
    }
}

/// ln of the NB(r, p) pmf Γ(k+r)/(k!Γ(r)) p^r (1−p)^k; arguments unchecked.
pub(crate) fn ln_nb_pmf_unchecked(r: f64, p: f64, k: u64) -> f64 {
    let kf = k as f64;
    let ln_coef = if k == 0 {
        0.0
    } else {
        log_gamma(kf + r).unwrap_or(f64::NAN) - log_factorial(k) - log_gamma(r).unwrap_or(f64::NAN)
    };
    ln_coef + r * p.ln() + kf * (-p).ln_1p()
}

/// NB(r, p) probability mass at k ∈ {0, 1, …}.
pub fn nb_pmf(r: f64, p: f64, k: u64) -> Result<f64> {
    check_positive("negative binomial r", r)?;
    check_probability("negative binomial p", p)?;
    Ok(ln_nb_pmf_unchecked(r, p, k).exp())
}

/// Success probability p* = pq/(1 − p + pq) of the NB process after a
/// negative binomial time change with parameter q.
pub fn compose_time_change(p: f64, q: f64) -> Result<f64> {
    check_probability("p", p)?;
    check_probability("q", q)?;
    Ok(p * q / (1.0 - p + p * q))
}

impl BmixgnbParams {
    pub fn new(beta: f64, alpha: f64, p: f64, r: f64) -> Result<Self> {
        check_positive("beta", beta)?;
        check_positive("alpha", alpha)?;
        check_probability("p", p)?;
        check_positive("r", r)?;
        Ok(Self { beta, alpha, p, r })
    }

    /// The process law at time r built from BGG parameters.
    pub fn at_time(params: &BggParams, r: f64) -> Result<Self> {
        Self::new(params.beta(), params.alpha(), params.p(), r)
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
    pub fn r(&self) -> f64 {
        self.r
    }

    /// The (β, α, p) part, i.e. the BGG law whose covariance scales by r.
    pub fn bgg(&self) -> BggParams {
        BggParams::new(self.beta, self.alpha, self.p).expect("already validated")
    }

    fn ln_q(&self) -> f64 {
        (-self.p).ln_1p()
    }

    /// ln of the NB weight at count n.
    fn ln_weight(&self, n: u64) -> f64 {
        ln_nb_pmf_unchecked(self.r, self.p, n)
    }

    /// ln g(y; α(r+n), β).
    fn ln_gamma_kernel(&self, y: f64, n: u64) -> f64 {
        let shape = self.alpha * (self.r + n as f64);
        shape * self.beta.ln() - log_gamma(shape).unwrap_or(f64::NAN) + (shape - 1.0) * y.ln()
            - self.beta * y
    }

    /// ln f(y, n).
    pub fn ln_joint_pdf(&self, y: f64, n: u64) -> Result<f64> {
        check_y(y)?;
        Ok(self.ln_weight(n) + self.ln_gamma_kernel(y, n))
    }

    /// f(y, n) = Γ(n+r)p^r(1−p)^n/(n!Γ(r)Γ(α(r+n))) β^{α(r+n)} y^{α(r+n)−1} e^{−βy}.
    pub fn joint_pdf(&self, y: f64, n: u64) -> Result<f64> {
        self.ln_joint_pdf(y, n).map(f64::exp)
    }

    /// Σ_{j=0}^{n} NB weight × P(α(r+j), βx), stopping once the weights underflow past the mode.
    fn partial_cdf_sum(&self, x: f64, n: u64) -> Result<f64> {
        let mode = ((self.r - 1.0) * (1.0 - self.p) / self.p).max(0.0);
        let mut sum = 0.0;
        for j in 0..=n {
            let lw = self.ln_weight(j);
            if lw < -745.0 && j as f64 > mode {
                break;
            }
            sum += lw.exp() * reg_inc_gamma(self.alpha * (self.r + j as f64), self.beta * x)?;
        }
        Ok(sum)
    }

    /// P(Y ≤ y, M ≤ n).
    pub fn joint_cdf(&self, y: f64, n: u64) -> Result<f64> {
        check_y(y)?;
        Ok(self.partial_cdf_sum(y, n)?.min(1.0))
    }

    /// ln Σ_{n≥0} NB weight × g(y; α(r+n), β).
    pub fn ln_marginal_pdf_y(&self, y: f64, ctl: &SeriesControl) -> Result<f64> {
        check_y(y)?;
        let terms = (0u64..).map(|n| Term::positive(self.ln_weight(n) + self.ln_gamma_kernel(y, n)));
        Ok(sum_series_log(terms, ctl)?.log_abs)
    }

    /// Marginal density of Y, a gamma mixture with negative binomial weights.
    pub fn marginal_pdf_y(&self, y: f64, ctl: &SeriesControl) -> Result<f64> {
        self.ln_marginal_pdf_y(y, ctl).map(f64::exp)
    }

    fn ln_cdf_series(&self, y: f64, ctl: &SeriesControl) -> Result<f64> {
        let (alpha, r, by) = (self.alpha, self.r, self.beta * y);
        let terms = (0u64..).map(|n| {
            let v = ln_reg_inc_gamma(alpha * (r + n as f64), by).unwrap_or(f64::NAN);
            Term::positive(self.ln_weight(n) + v)
        });
        Ok(sum_series_log(terms, ctl)?.log_abs)
    }

    /// P(Y ≤ y).
    pub fn marginal_cdf_y(&self, y: f64, ctl: &SeriesControl) -> Result<f64> {
        check_y(y)?;
        Ok(self.ln_cdf_series(y, ctl)?.exp().min(1.0))
    }

    /// ln of the unnormalized conditional weight Γ(n+r)/(n!Γ(α(n+r))) a^n, a = (1−p)(βy)^α.
    fn ln_conditional_term(&self, ln_a: f64, n: u64) -> f64 {
        let nr = n as f64 + self.r;
        log_gamma(nr).unwrap_or(f64::NAN) - log_factorial(n)
            - log_gamma(self.alpha * nr).unwrap_or(f64::NAN)
            + n as f64 * ln_a
    }

    /// P(M = n | Y = y).
    pub fn conditional_pmf_m_given_y(&self, y: f64, n: u64, ctl: &SeriesControl) -> Result<f64> {
        check_y(y)?;
        let ln_a = self.ln_q() + self.alpha * (self.beta * y).ln();
        let terms = (0u64..).map(|j| Term::positive(self.ln_conditional_term(ln_a, j)));
        let ln_norm = sum_series_log(terms, ctl)?.log_abs;
        Ok((self.ln_conditional_term(ln_a, n) - ln_norm).exp())
    }

    /// P(Y ≤ y, M ≤ m | M ≤ n) for m ≤ n.
    pub fn conditional_cdf_given_m_le(&self, y: f64, m: u64, n: u64) -> Result<f64> {
        check_y(y)?;
        if m > n {
            return Err(domain(format!("conditioning requires m <= n, got m={m}, n={n}")));
        }
        let norm: f64 = (0..=n)
            .map(|j| self.ln_weight(j))
            .take_while(|lw| lw.is_finite())
            .map(f64::exp)
            .sum();
        Ok((self.partial_cdf_sum(y, m)? / norm).min(1.0))
    }

    /// Precomputes the x-independent denominator P(Y ≤ y).
    pub fn given_y_le(&self, y: f64, ctl: &SeriesControl) -> Result<GivenYLe> {
        check_y(y)?;
        Ok(GivenYLe { params: *self, y, ln_denominator: self.ln_cdf_series(y, ctl)? })
    }

    /// P(Y ≤ x, M ≤ n | Y ≤ y) for 0 < x ≤ y.
    pub fn conditional_cdf_given_y_le(
        &self,
        x: f64,
        n: u64,
        y: f64,
        ctl: &SeriesControl,
    ) -> Result<f64> {
        self.given_y_le(y, ctl)?.cdf(x, n)
    }

    /// E[exp(itY + isM)] = {pβ^α / [(β − it)^α − e^{is}β^α(1−p)]}^r.
    ///
    /// The power r is taken through the continuous logarithm
    /// −α Log(1 − it/β) + ln p − Log(1 − (1−p)e^{is}(1 − it/β)^{−α}), each
    /// piece on its principal branch, so the result is the actual
    /// characteristic function for every α and r.
    pub fn cf(&self, t: f64, s: f64) -> Complex64 {
        let ln_z = -self.alpha * Complex64::new(1.0, -t / self.beta).ln();
        let z = ln_z.exp();
        let eis = Complex64::from_polar(1.0, s);
        let denom = Complex64::new(1.0, 0.0) - eis * z * (1.0 - self.p);
        (self.r * (ln_z + self.p.ln() - denom.ln())).exp()
    }

    /// E[Y^n M^k] for n ≥ 1.
    pub fn product_moment(&self, n: u32, k: u32, ctl: &SeriesControl) -> Result<f64> {
        if n == 0 {
            return Err(domain("product moment requires n >= 1"));
        }
        let nf = n as f64;
        let (alpha, r) = (self.alpha, self.r);
        let start = u64::from(k > 0);
        let terms = (start..).map(|m| {
            let shape = alpha * (r + m as f64);
            let ratio = log_gamma(shape + nf).unwrap_or(f64::NAN) - log_gamma(shape).unwrap_or(f64::NAN);
            let power = if k == 0 { 0.0 } else { k as f64 * (m as f64).ln() };
            Term::positive(power + self.ln_weight(m) + ratio)
        });
        let s = sum_series_log(terms, ctl)?.log_abs;
        Ok((s - nf * self.beta.ln()).exp())
    }

    pub fn mean_y(&self) -> f64 {
        self.r * self.alpha / (self.p * self.beta)
    }

    pub fn mean_m(&self) -> f64 {
        self.r * (1.0 - self.p) / self.p
    }

    /// Covariance of (Y, M), which is r times the BGG covariance.
    pub fn covariance(&self) -> CovarianceMatrix {
        self.bgg().covariance().scaled(self.r)
    }
}

/// P(· | Y ≤ y) with the denominator series evaluated once.
#[derive(Debug, Clone, Copy)]
pub struct GivenYLe {
    params: BmixgnbParams,
    y: f64,
    ln_denominator: f64,
}

impl GivenYLe {
    pub fn y(&self) -> f64 {
        self.y
    }

    /// P(Y ≤ x, M ≤ n | Y ≤ y).
    pub fn cdf(&self, x: f64, n: u64) -> Result<f64> {
        check_y(x)?;
        if x > self.y {
            return Err(domain(format!("conditioning requires x <= y, got x={x}, y={}", self.y)));
        }
        let num = self.params.partial_cdf_sum(x, n)?;
        Ok((num.ln() - self.ln_denominator).exp().min(1.0))
    }
}

/// Grid values of one simulated path of (G(t + NB(t)), NB(t)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessPath {
    pub times: Vec<f64>,
    pub x_values: Vec<f64>,
    pub n_values: Vec<u64>,
}

impl ProcessPath {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Simulates the process on `times` from independent increments: the count
/// increment over Δt is NB(Δt, p) and the gamma increment, given it, is
/// Γ(α(Δt + ΔNB), β).
pub fn simulate_path<R: Rng + ?Sized>(
    params: &BggParams,
    times: &[f64],
    rng: &mut R,
) -> Result<ProcessPath> {
    check_grid(times)?;
    let (beta, alpha, p) = (params.beta(), params.alpha(), params.p());
    let mut x = 0.0;
    let mut n = 0u64;
    let mut prev = 0.0;
    let mut x_values = Vec::with_capacity(times.len());
    let mut n_values = Vec::with_capacity(times.len());
    for &t in times {
        let dt = t - prev;
        if dt > 0.0 {
            let dn = nb_unchecked(dt, p, rng);
            x += gamma_unchecked(alpha * (dt + dn as f64), beta, rng);
            n += dn;
        }
        x_values.push(x);
        n_values.push(n);
        prev = t;
    }
    Ok(ProcessPath { times: times.to_vec(), x_values, n_values })
}
