use crate::bgg::{check_positive, BggParams, BggParamsOrtho};
use crate::error::{Error, Result};
use crate::special::{
    digamma_unchecked, log_gamma, sum_series_log, trigamma_unchecked, SeriesControl, Term,
};

use super::{
    assemble_report, describe_point, fd_jacobian, safeguarded_newton, sub_matrix, CountSummary,
    FitOptions, FitReport, InformationKind, ModelKind, PairSample, Parametrization, ReportParts,
};

const RATE_NAMES: [&str; 3] = ["beta", "alpha", "p"];
const ORTHO_NAMES: [&str; 3] = ["mu", "alpha", "p"];

fn checked_summary(data: &PairSample) -> Result<CountSummary> {
    data.require(ModelKind::Bgg)?;
    Ok(data.summary())
}

/// Exact log-likelihood Σ ln f(xᵢ, nᵢ), including the −Σ ln xᵢ term.
pub fn bgg_loglik(theta: &BggParams, data: &PairSample) -> Result<f64> {
    let s = checked_summary(data)?;
    let (beta, alpha, p) = (theta.beta(), theta.alpha(), theta.p());
    let (ln_beta, ln_p, ln_q) = (beta.ln(), p.ln(), (-p).ln_1p());
    let mut ll = -s.sum_ln_x - beta * s.mean_x * s.n_obs;
    for g in &s.groups {
        let na = alpha * g.n;
        ll += g.count * (na * ln_beta - log_gamma(na)? + ln_p + (g.n - 1.0) * ln_q) + na * g.sum_ln_x;
    }
    Ok(ll)
}

/// (∂ℓ/∂β, ∂ℓ/∂α, ∂ℓ/∂p).
pub fn bgg_score(theta: &BggParams, data: &PairSample) -> Result<[f64; 3]> {
    let s = checked_summary(data)?;
    Ok(score_from_summary(theta, &s))
}

fn score_from_summary(theta: &BggParams, s: &CountSummary) -> [f64; 3] {
    let (beta, alpha, p) = (theta.beta(), theta.alpha(), theta.p());
    let n = s.n_obs;
    let mut d_alpha = n * s.mean_n * beta.ln();
    for g in &s.groups {
        d_alpha += g.n * (g.sum_ln_x - g.count * digamma_unchecked(alpha * g.n));
    }
    [
        n * (alpha * s.mean_n / beta - s.mean_x),
        d_alpha,
        n / p - n * (s.mean_n - 1.0) / (1.0 - p),
    ]
}

/// Score in the orthogonal parametrization (∂ℓ/∂μ, ∂ℓ/∂α, ∂ℓ/∂p) with β = α/μ.
pub fn bgg_score_ortho(theta: &BggParamsOrtho, data: &PairSample) -> Result<[f64; 3]> {
    let rate = theta.to_rate();
    let [sb, sa, sp] = bgg_score(&rate, data)?;
    let (mu, alpha) = (theta.mu(), theta.alpha());
    Ok([-sb * alpha / (mu * mu), sa + sb / mu, sp])
}

/// g(α) = ΣNᵢΨ(αNᵢ) − nN̄ log(αN̄/X̄) − ΣNᵢ log Xᵢ and g′(α); the MLE α̂ is the root.
pub fn bgg_alpha_equation(alpha: f64, data: &PairSample) -> Result<(f64, f64)> {
    check_positive("alpha", alpha)?;
    let s = checked_summary(data)?;
    Ok(alpha_equation(alpha, &s))
}

fn alpha_equation(alpha: f64, s: &CountSummary) -> (f64, f64) {
    let total_n = s.n_obs * s.mean_n;
    let mut g = -total_n * (alpha * s.mean_n / s.mean_x).ln();
    let mut dg = -total_n / alpha;
    for grp in &s.groups {
        let an = alpha * grp.n;
        g += grp.n * (grp.count * digamma_unchecked(an) - grp.sum_ln_x);
        dg += grp.count * grp.n * grp.n * trigamma_unchecked(an);
    }
    (g, dg)
}

/// κ_αα = p Σ_{j≥1} j²(1−p)^{j−1} Ψ′(jα).
fn kappa_alpha_alpha(alpha: f64, p: f64, ctl: &SeriesControl) -> Result<f64> {
    let ln_q = (-p).ln_1p();
    let terms = (1u64..).map(|j| {
        let jf = j as f64;
        Term::positive(2.0 * jf.ln() + (jf - 1.0) * ln_q + trigamma_unchecked(jf * alpha).ln())
    });
    Ok(p * sum_series_log(terms, ctl)?.value())
}

/// Per-observation expected information J(θ) in the order (β, α, p).
pub fn bgg_fisher(theta: &BggParams, ctl: &SeriesControl) -> Result<[[f64; 3]; 3]> {
    let (beta, alpha, p) = (theta.beta(), theta.alpha(), theta.p());
    let kbb = alpha / (beta * beta * p);
    let kba = -1.0 / (beta * p);
    let kaa = kappa_alpha_alpha(alpha, p, ctl)?;
    let kpp = 1.0 / (p * p * (1.0 - p));
    Ok([[kbb, kba, 0.0], [kba, kaa, 0.0], [0.0, 0.0, kpp]])
}

/// Per-observation expected information J*(θ*) in the order (μ, α, p); diagonal.
pub fn bgg_fisher_ortho(theta: &BggParamsOrtho, ctl: &SeriesControl) -> Result<[[f64; 3]; 3]> {
    let (mu, alpha, p) = (theta.mu(), theta.alpha(), theta.p());
    let kmm = alpha / (mu * mu * p);
    let kaa = kappa_alpha_alpha(alpha, p, ctl)? - 1.0 / (alpha * p);
    let kpp = 1.0 / (p * p * (1.0 - p));
    for (name, v) in [("mu", kmm), ("alpha", kaa), ("p", kpp)] {
        if !(v > 0.0) {
            return Err(Error::DegenerateInformation {
                point: describe_point(&ORTHO_NAMES, &[mu, alpha, p]),
                detail: format!("diagonal entry for {name} is {v}, not positive"),
            });
        }
    }
    Ok([[kmm, 0.0, 0.0], [0.0, kaa, 0.0], [0.0, 0.0, kpp]])
}

/// Observed information −∇²ℓ/n in the order (β, α, p).
pub fn bgg_observed_information(theta: &BggParams, data: &PairSample) -> Result<[[f64; 3]; 3]> {
    let s = checked_summary(data)?;
    let (beta, alpha, p) = (theta.beta(), theta.alpha(), theta.p());
    let n = s.n_obs;
    let mut haa = 0.0;
    for g in &s.groups {
        haa += g.count * g.n * g.n * trigamma_unchecked(alpha * g.n);
    }
    let ibb = alpha * s.mean_n / (beta * beta);
    let iba = -s.mean_n / beta;
    let ipp = 1.0 / (p * p) + (s.mean_n - 1.0) / ((1.0 - p) * (1.0 - p));
    Ok([[ibb, iba, 0.0], [iba, haa / n, 0.0], [0.0, 0.0, ipp]])
}

/// Observed information −∇²ℓ*/n in the order (μ, α, p), by differencing the analytic score.
pub fn bgg_observed_information_ortho(
    theta: &BggParamsOrtho,
    data: &PairSample,
) -> Result<[[f64; 3]; 3]> {
    let n = data.len() as f64;
    let jac = fd_jacobian(
        |v| bgg_score_ortho(&BggParamsOrtho::new(v[0], v[1], v[2])?, data),
        [theta.mu(), theta.alpha(), theta.p()],
    )?;
    Ok(jac.map(|row| row.map(|h| -h / n)))
}

struct BggEstimate {
    theta: BggParams,
    iterations: usize,
    summary: CountSummary,
}

fn estimate(data: &PairSample, opts: &FitOptions) -> Result<BggEstimate> {
    let s = checked_summary(data)?;
    if data.len() < 2 {
        return Err(Error::DegenerateData("BGG fit needs at least two observations".into()));
    }
    if s.mean_n == 1.0 {
        return Err(Error::Boundary("every count equals 1, so p-hat = 1 is not interior".into()));
    }
    let sol = safeguarded_newton(|a| Ok(alpha_equation(a, &s)), 1e-3, 1e3, 1e-6, 1e6, opts.tol, opts.max_iter)
        .map_err(|e| match e {
            Error::SolverFailure(msg) => Error::SolverFailure(format!(
                "alpha equation: {msg}; x/n ratios may be constant (mean x {}, mean n {})",
                s.mean_x, s.mean_n
            )),
            other => other,
        })?;
    let alpha = sol.root;
    let theta = BggParams::new(alpha * s.mean_n / s.mean_x, alpha, 1.0 / s.mean_n)?;
    Ok(BggEstimate { theta, iterations: sol.iterations, summary: s })
}

/// MLE in the rate parametrization (β, α, p).
pub fn bgg_fit(data: &PairSample, opts: &FitOptions) -> Result<FitReport> {
    let est = estimate(data, opts)?;
    let theta = est.theta;
    let info = match opts.information {
        InformationKind::Expected => bgg_fisher(&theta, &opts.series)?,
        InformationKind::Observed => bgg_observed_information(&theta, data)?,
    };
    assemble_report(
        ReportParts {
            model: "BGG",
            parametrization: Parametrization::Rate,
            names: &RATE_NAMES,
            values: &[theta.beta(), theta.alpha(), theta.p()],
            free: &[0, 1, 2],
            info: sub_matrix(&info, &[0, 1, 2]),
            loglik: bgg_loglik(&theta, data)?,
            iterations: est.iterations,
            n_obs: est.summary.n_obs as usize,
        },
        opts,
    )
}

/// MLE in the orthogonal parametrization (μ, α, p), μ̂ = X̄/N̄.
pub fn bgg_fit_ortho(data: &PairSample, opts: &FitOptions) -> Result<FitReport> {
    let est = estimate(data, opts)?;
    let s = &est.summary;
    let alpha = est.theta.alpha();
    let ortho = BggParamsOrtho::new(s.mean_x / s.mean_n, alpha, 1.0 / s.mean_n)?;
    let info = match opts.information {
        InformationKind::Expected => bgg_fisher_ortho(&ortho, &opts.series)?,
        InformationKind::Observed => bgg_observed_information_ortho(&ortho, data)?,
    };
    assemble_report(
        ReportParts {
            model: "BGG",
            parametrization: Parametrization::Orthogonal,
            names: &ORTHO_NAMES,
            values: &[ortho.mu(), alpha, ortho.p()],
            free: &[0, 1, 2],
            info: sub_matrix(&info, &[0, 1, 2]),
            loglik: bgg_loglik(&est.theta, data)?,
            iterations: est.iterations,
            n_obs: s.n_obs as usize,
        },
        opts,
    )
}

/// MLE of (β, p) with α held fixed; α = 1 is the BEG law.
pub fn bgg_fit_fixed_alpha(data: &PairSample, alpha: f64, opts: &FitOptions) -> Result<FitReport> {
    check_positive("fixed alpha", alpha)?;
    let s = checked_summary(data)?;
    if data.len() < 2 {
        return Err(Error::DegenerateData("fit needs at least two observations".into()));
    }
    if s.mean_n == 1.0 {
        return Err(Error::Boundary("every count equals 1, so p-hat = 1 is not interior".into()));
    }
    let theta = BggParams::new(alpha * s.mean_n / s.mean_x, alpha, 1.0 / s.mean_n)?;
    let info = match opts.information {
        InformationKind::Expected => bgg_fisher(&theta, &opts.series)?,
        InformationKind::Observed => bgg_observed_information(&theta, data)?,
    };
    assemble_report(
        ReportParts {
            model: if alpha == 1.0 { "BEG" } else { "BGG" },
            parametrization: Parametrization::Rate,
            names: &RATE_NAMES,
            values: &[theta.beta(), alpha, theta.p()],
            free: &[0, 2],
            info: sub_matrix(&info, &[0, 2]),
            loglik: bgg_loglik(&theta, data)?,
            iterations: 0,
            n_obs: s.n_obs as usize,
        },
        opts,
    )
}
