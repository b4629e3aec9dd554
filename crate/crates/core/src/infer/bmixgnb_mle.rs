use crate::bgg::check_positive;
use crate::bmixgnb::{ln_nb_pmf_unchecked, BmixgnbParams};
use crate::error::{Error, Result};
use crate::special::{
    digamma_unchecked, log_factorial, log_gamma, sum_series_log, trigamma_unchecked, SeriesControl,
    Term,
};

use super::{
    assemble_report, fd_jacobian, safeguarded_newton, sub_matrix, CountSummary, FitOptions,
    FitReport, InformationKind, ModelKind, PairSample, Parametrization, ReportParts,
};

const RATE_NAMES: [&str; 4] = ["beta", "alpha", "p", "tau"];
const ORTHO_NAMES: [&str; 4] = ["mu", "alpha", "p", "tau"];

/// Optional equality constraints for the BMixGNB fit. Fixing τ = 1 gives
/// the BGG likelihood of the shifted counts; fixing α = 1 the gamma-NB one.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BmixgnbConstraints {
    pub alpha: Option<f64>,
    pub tau: Option<f64>,
}

fn checked_summary(data: &PairSample) -> Result<CountSummary> {
    data.require(ModelKind::Bmixgnb)?;
    Ok(data.summary())
}

fn loglik_from_summary(theta: &BmixgnbParams, s: &CountSummary) -> Result<f64> {
    let (beta, alpha, p, tau) = (theta.beta(), theta.alpha(), theta.p(), theta.r());
    let (ln_beta, ln_p, ln_q) = (beta.ln(), p.ln(), (-p).ln_1p());
    let lg_tau = log_gamma(tau)?;
    let mut ll = -s.sum_ln_x - beta * s.mean_x * s.n_obs;
    for g in &s.groups {
        let sh = g.n + tau;
        let per = log_gamma(sh)? - log_factorial(g.n as u64) - lg_tau + tau * ln_p + g.n * ln_q
            - log_gamma(alpha * sh)?
            + alpha * sh * ln_beta;
        ll += g.count * per + alpha * sh * g.sum_ln_x;
    }
    Ok(ll)
}

/// Exact log-likelihood Σ ln f(yᵢ, mᵢ) with θ† = (β, α, p, τ) and τ = r.
pub fn bmixgnb_loglik(theta: &BmixgnbParams, data: &PairSample) -> Result<f64> {
    loglik_from_summary(theta, &checked_summary(data)?)
}

/// (∂ℓ†/∂β, ∂ℓ†/∂α, ∂ℓ†/∂p, ∂ℓ†/∂τ).
pub fn bmixgnb_score(theta: &BmixgnbParams, data: &PairSample) -> Result<[f64; 4]> {
    let s = checked_summary(data)?;
    let (beta, alpha, p, tau) = (theta.beta(), theta.alpha(), theta.p(), theta.r());
    let n = s.n_obs;
    let shift = tau + s.mean_n;
    let mut d_alpha = n * shift * beta.ln();
    let mut d_tau = n * (p.ln() + alpha * beta.ln() - digamma_unchecked(tau));
    for g in &s.groups {
        let sh = g.n + tau;
        let resid = g.sum_ln_x - g.count * digamma_unchecked(alpha * sh);
        d_alpha += sh * resid;
        d_tau += alpha * resid + g.count * digamma_unchecked(sh);
    }
    Ok([
        n * (alpha * shift / beta - s.mean_x),
        d_alpha,
        -n * s.mean_n / (1.0 - p) + n * tau / p,
        d_tau,
    ])
}

/// Score in (μ, α, p, τ) with β = α/μ.
pub fn bmixgnb_score_ortho(theta: &BmixgnbParams, data: &PairSample) -> Result<[f64; 4]> {
    let [sb, sa, sp, st] = bmixgnb_score(theta, data)?;
    let alpha = theta.alpha();
    let mu = alpha / theta.beta();
    Ok([-sb * alpha / (mu * mu), sa + sb / mu, sp, st])
}

/// Σ_{j≥0} NB(τ, p) weight × h(j), with h positive.
fn nb_expectation<F>(tau: f64, p: f64, ctl: &SeriesControl, ln_h: F) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let terms = (0u64..).map(|j| Term::positive(ln_nb_pmf_unchecked(tau, p, j) + ln_h(j as f64)));
    Ok(sum_series_log(terms, ctl)?.value())
}

struct Kappas {
    aa: f64,
    at: f64,
    tt: f64,
}

fn shape_kappas(theta: &BmixgnbParams, ctl: &SeriesControl) -> Result<Kappas> {
    let (alpha, p, tau) = (theta.alpha(), theta.p(), theta.r());
    let tg = |j: f64| trigamma_unchecked(alpha * (tau + j)).ln();
    let a = nb_expectation(tau, p, ctl, |j| 2.0 * (tau + j).ln() + tg(j))?;
    let b = nb_expectation(tau, p, ctl, |j| (tau + j).ln() + tg(j))?;
    let c = nb_expectation(tau, p, ctl, tg)?;
    let d = nb_expectation(tau, p, ctl, |j| trigamma_unchecked(tau + j).ln())?;
    Ok(Kappas { aa: a, at: alpha * b, tt: trigamma_unchecked(tau) + alpha * alpha * c - d })
}

/// Per-observation expected information J†(θ†) in the order (β, α, p, τ).
pub fn bmixgnb_fisher(theta: &BmixgnbParams, ctl: &SeriesControl) -> Result<[[f64; 4]; 4]> {
    let (beta, alpha, p, tau) = (theta.beta(), theta.alpha(), theta.p(), theta.r());
    let k = shape_kappas(theta, ctl)?;
    let bb = alpha * tau / (beta * beta * p);
    let ba = -tau / (p * beta);
    let bt = -alpha / beta;
    let pp = tau / (p * p * (1.0 - p));
    let pt = -1.0 / p;
    Ok([
        [bb, ba, 0.0, bt],
        [ba, k.aa, 0.0, k.at],
        [0.0, 0.0, pp, pt],
        [bt, k.at, pt, k.tt],
    ])
}

/// Per-observation expected information J⋆ in the order (μ, α, p, τ), μ = α/β.
pub fn bmixgnb_fisher_ortho(theta: &BmixgnbParams, ctl: &SeriesControl) -> Result<[[f64; 4]; 4]> {
    let (alpha, p, tau) = (theta.alpha(), theta.p(), theta.r());
    let mu = alpha / theta.beta();
    let k = shape_kappas(theta, ctl)?;
    let mm = alpha * tau / (mu * mu * p);
    let mt = alpha / mu;
    let aa = k.aa - tau / (alpha * p);
    let at = k.at - 1.0;
    let pp = tau / (p * p * (1.0 - p));
    let pt = -1.0 / p;
    Ok([
        [mm, 0.0, 0.0, mt],
        [0.0, aa, 0.0, at],
        [0.0, 0.0, pp, pt],
        [mt, at, pt, k.tt],
    ])
}

/// Observed information −∇²ℓ/n by differencing the analytic score.
pub fn bmixgnb_observed_information(
    theta: &BmixgnbParams,
    data: &PairSample,
    parametrization: Parametrization,
) -> Result<[[f64; 4]; 4]> {
    let n = data.len() as f64;
    let (beta, alpha, p, tau) = (theta.beta(), theta.alpha(), theta.p(), theta.r());
    let jac = match parametrization {
        Parametrization::Rate => fd_jacobian(
            |v| bmixgnb_score(&BmixgnbParams::new(v[0], v[1], v[2], v[3])?, data),
            [beta, alpha, p, tau],
        )?,
        Parametrization::Orthogonal => fd_jacobian(
            |v| bmixgnb_score_ortho(&BmixgnbParams::new(v[1] / v[0], v[1], v[2], v[3])?, data),
            [alpha / beta, alpha, p, tau],
        )?,
    };
    Ok(jac.map(|row| row.map(|h| -h / n)))
}

/// Per-observation log-likelihood, gradient and Hessian with β and p profiled out.
#[derive(Debug, Clone, Copy)]
struct Profile {
    ll: f64,
    grad: [f64; 2],
    hess: [[f64; 2]; 2],
}

fn profiled_params(alpha: f64, tau: f64, s: &CountSummary) -> Result<BmixgnbParams> {
    let shift = tau + s.mean_n;
    BmixgnbParams::new(alpha * shift / s.mean_x, alpha, tau / shift, tau)
}

fn profile(alpha: f64, tau: f64, s: &CountSummary) -> Result<Profile> {
    let n = s.n_obs;
    let shift = tau + s.mean_n;
    let l = (alpha * shift / s.mean_x).ln();
    let (mut a1, mut a0, mut psi_t, mut h_aa, mut h_at, mut h_tt_a, mut h_tt_t) =
        (0.0, s.sum_ln_x, 0.0, 0.0, 0.0, 0.0, 0.0);
    for g in &s.groups {
        let sh = g.n + tau;
        let psi_a = digamma_unchecked(alpha * sh);
        let tri_a = trigamma_unchecked(alpha * sh);
        a1 += sh * (g.sum_ln_x - g.count * psi_a);
        a0 -= g.count * psi_a;
        psi_t += g.count * digamma_unchecked(sh);
        h_aa += g.count * sh * sh * tri_a;
        h_at += g.count * sh * tri_a;
        h_tt_a += g.count * tri_a;
        h_tt_t += g.count * trigamma_unchecked(sh);
    }
    let (a1, a0) = (a1 / n, a0 / n);
    let grad = [
        shift * l + a1,
        alpha * l + (tau / shift).ln() - digamma_unchecked(tau) + psi_t / n + alpha * a0,
    ];
    let haa = shift / alpha - h_aa / n;
    let hat = l + 1.0 + a0 - alpha * h_at / n;
    let htt = alpha / shift + 1.0 / tau - 1.0 / shift - trigamma_unchecked(tau) + h_tt_t / n
        - alpha * alpha * h_tt_a / n;
    let ll = loglik_from_summary(&profiled_params(alpha, tau, s)?, s)? / n;
    Ok(Profile { ll, grad, hess: [[haa, hat], [hat, htt]] })
}

/// Gradient of the profile log-likelihood per observation, in (α, τ).
pub fn bmixgnb_profile_gradient(alpha: f64, tau: f64, data: &PairSample) -> Result<[f64; 2]> {
    check_positive("alpha", alpha)?;
    check_positive("tau", tau)?;
    Ok(profile(alpha, tau, &checked_summary(data)?)?.grad)
}

fn grad_small(p: &Profile, shift: f64) -> bool {
    p.grad[0].abs() <= 1e-10 * shift.max(1.0) && p.grad[1].abs() <= 1e-10
}

/// Damped Newton ascent on the 2-D profile likelihood.
fn newton_2d(start: [f64; 2], s: &CountSummary, max_iter: usize) -> Result<([f64; 2], usize)> {
    let mut x = start;
    let mut cur = profile(x[0], x[1], s)?;
    for iter in 1..=max_iter {
        if grad_small(&cur, x[1] + s.mean_n) {
            return Ok((x, iter));
        }
        let [[haa, hat], [_, htt]] = cur.hess;
        let det = haa * htt - hat * hat;
        let [ga, gt] = cur.grad;
        let dir = if haa < 0.0 && det > 0.0 {
            [-(htt * ga - hat * gt) / det, -(haa * gt - hat * ga) / det]
        } else {
            // not locally concave: steepest ascent scaled by the curvature magnitude
            let scale = haa.abs().max(htt.abs()).max(1.0);
            [ga / scale, gt / scale]
        };
        let slope = ga * dir[0] + gt * dir[1];
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let cand = [x[0] + t * dir[0], x[1] + t * dir[1]];
            if cand[0] > 0.1 * x[0] && cand[1] > 0.1 * x[1] && cand[0] < 1e7 && cand[1] < 1e7 {
                if let Ok(next) = profile(cand[0], cand[1], s) {
                    let gnorm = |p: &Profile| p.grad[0].abs() + p.grad[1].abs();
                    let armijo = next.ll >= cur.ll + 1e-4 * t * slope;
                    let flat = next.ll >= cur.ll - 1e-13 * cur.ll.abs().max(1.0) && gnorm(&next) < gnorm(&cur);
                    if next.ll.is_finite() && (armijo || flat) {
                        accepted = Some((cand, next));
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some((cand, next)) => {
                let rel = ((cand[0] - x[0]) / x[0]).abs().max(((cand[1] - x[1]) / x[1]).abs());
                x = cand;
                cur = next;
                if rel < 1e-15 && cur.grad[0].abs() + cur.grad[1].abs() < 1e-7 {
                    return Ok((x, iter));
                }
            }
            None => {
                return Err(Error::SolverFailure(format!(
                    "line search failed at alpha={}, tau={} (gradient {:?})",
                    x[0], x[1], cur.grad
                )))
            }
        }
    }
    Err(Error::SolverFailure(format!(
        "no convergence in {max_iter} iterations (alpha={}, tau={}, gradient {:?})",
        x[0], x[1], cur.grad
    )))
}

/// Moment-based starting point (α₀, τ₀).
fn moment_start(data: &PairSample, s: &CountSummary) -> [f64; 2] {
    let n = s.n_obs;
    let var_m = data.ns().iter().map(|&m| (m as f64 - s.mean_n).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let tau = if var_m > s.mean_n {
        let p = s.mean_n / var_m;
        s.mean_n * p / (1.0 - p)
    } else {
        1.0
    };
    let total_shift: f64 = data.ns().iter().map(|&m| tau + m as f64).sum();
    let k = s.mean_x * n / total_shift;
    let c = data
        .xs()
        .iter()
        .zip(data.ns())
        .map(|(&y, &m)| (y - (tau + m as f64) * k).powi(2))
        .sum::<f64>()
        / total_shift;
    let alpha = if c > 0.0 { k * k / c } else { 1.0 };
    [alpha.clamp(1e-3, 1e3), tau.clamp(1e-3, 1e3)]
}

fn estimate(
    data: &PairSample,
    constraints: &BmixgnbConstraints,
    s: &CountSummary,
    opts: &FitOptions,
) -> Result<([f64; 2], usize)> {
    match (constraints.alpha, constraints.tau) {
        (Some(a), Some(t)) => Ok(([a, t], 0)),
        (None, Some(t)) => {
            let sol = safeguarded_newton(
                |a| {
                    let p = profile(a, t, s)?;
                    Ok((-p.grad[0], -p.hess[0][0]))
                },
                1e-3,
                1e3,
                1e-6,
                1e6,
                opts.tol,
                opts.max_iter,
            )?;
            Ok(([sol.root, t], sol.iterations))
        }
        (Some(a), None) => {
            let sol = safeguarded_newton(
                |t| {
                    let p = profile(a, t, s)?;
                    Ok((-p.grad[1], -p.hess[1][1]))
                },
                1e-3,
                1e3,
                1e-6,
                1e6,
                opts.tol,
                opts.max_iter,
            )?;
            Ok(([a, sol.root], sol.iterations))
        }
        (None, None) => {
            let mut starts = vec![moment_start(data, s)];
            for a in [0.5, 1.0, 2.0] {
                for t in [0.5, 1.0, 2.0] {
                    starts.push([a, t]);
                }
            }
            let mut failures = Vec::new();
            for start in starts {
                match newton_2d(start, s, opts.max_iter) {
                    Ok(found) => return Ok(found),
                    Err(e) => failures.push(format!("start {start:?}: {e}")),
                }
            }
            Err(Error::SolverFailure(format!(
                "profile Newton failed from every start; {}",
                failures.join("; ")
            )))
        }
    }
}

/// MLE of θ† = (β, α, p, τ) (or θ⋆ = (μ, α, p, τ)) with optional constraints.
pub fn bmixgnb_fit(
    data: &PairSample,
    parametrization: Parametrization,
    constraints: &BmixgnbConstraints,
    opts: &FitOptions,
) -> Result<FitReport> {
    let s = checked_summary(data)?;
    if data.len() < 2 {
        return Err(Error::DegenerateData("BMixGNB fit needs at least two observations".into()));
    }
    let first = data.xs()[0];
    if data.xs().iter().all(|&x| x == first) {
        return Err(Error::DegenerateData("all magnitudes are equal".into()));
    }
    if s.mean_n == 0.0 {
        return Err(Error::Boundary("every count is zero, so p-hat = 1 is not interior".into()));
    }
    if let Some(a) = constraints.alpha {
        check_positive("fixed alpha", a)?;
    }
    if let Some(t) = constraints.tau {
        check_positive("fixed tau", t)?;
    }
    let ([alpha, tau], iterations) = estimate(data, constraints, &s, opts)?;
    let theta = profiled_params(alpha, tau, &s)?;
    let mut free = vec![0];
    if constraints.alpha.is_none() {
        free.push(1);
    }
    free.push(2);
    if constraints.tau.is_none() {
        free.push(3);
    }
    let info = match (opts.information, parametrization) {
        (InformationKind::Expected, Parametrization::Rate) => bmixgnb_fisher(&theta, &opts.series)?,
        (InformationKind::Expected, Parametrization::Orthogonal) => {
            bmixgnb_fisher_ortho(&theta, &opts.series)?
        }
        (InformationKind::Observed, par) => bmixgnb_observed_information(&theta, data, par)?,
    };
    let (names, first_value) = match parametrization {
        Parametrization::Rate => (&RATE_NAMES, theta.beta()),
        Parametrization::Orthogonal => (&ORTHO_NAMES, alpha / theta.beta()),
    };
    let model = match (constraints.alpha, constraints.tau) {
        (Some(1.0), Some(1.0)) => "BEG",
        (None, Some(1.0)) => "BGG",
        _ => "BMixGNB",
    };
    assemble_report(
        ReportParts {
            model,
            parametrization,
            names,
            values: &[first_value, alpha, theta.p(), tau],
            free: &free,
            info: sub_matrix(&info, &free),
            loglik: loglik_from_summary(&theta, &s)?,
            iterations,
            n_obs: data.len(),
        },
        opts,
    )
}
