//! Maximum-likelihood estimation, Fisher information, asymptotic confidence
//! intervals and Wald / likelihood-ratio tests for the BGG law (rate and
//! orthogonal parametrizations) and the BMixGNB law.
//!
//! Standard errors default to the analytic expected information evaluated
//! at the MLE; observed information is available through
//! [`InformationKind::Observed`].

mod bgg_mle;
mod bmixgnb_mle;
mod solve;

pub use bgg_mle::{
    bgg_alpha_equation, bgg_fisher, bgg_fisher_ortho, bgg_fit, bgg_fit_fixed_alpha, bgg_fit_ortho,
    bgg_loglik, bgg_observed_information, bgg_observed_information_ortho, bgg_score,
    bgg_score_ortho,
};
pub use bmixgnb_mle::{
    bmixgnb_fisher, bmixgnb_fisher_ortho, bmixgnb_fit, bmixgnb_loglik,
    bmixgnb_observed_information, bmixgnb_profile_gradient, bmixgnb_score, bmixgnb_score_ortho,
    BmixgnbConstraints,
};
pub use solve::{safeguarded_newton, RootSolution};

use std::collections::BTreeMap;

use indexmap::IndexMap;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::gof::{chi_square_survival, TestResult};
use crate::special::{normal_quantile, SeriesControl};

/// Which law a [`PairSample`] is drawn from; fixes the count support.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    /// counts ≥ 1
    #[serde(rename = "BGG")]
    Bgg,
    /// counts ≥ 0
    #[serde(rename = "BMIXGNB")]
    Bmixgnb,
}

/// iid pairs (xᵢ, nᵢ) with positive magnitudes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairSample {
    xs: Vec<f64>,
    ns: Vec<u64>,
    kind: ModelKind,
}

impl PairSample {
    pub fn new(xs: Vec<f64>, ns: Vec<u64>, kind: ModelKind) -> Result<Self> {
        if xs.len() != ns.len() {
            return Err(domain(format!("magnitudes ({}) and counts ({}) differ in length", xs.len(), ns.len())));
        }
        if xs.is_empty() {
            return Err(domain("sample is empty"));
        }
        if let Some(i) = xs.iter().position(|x| !(*x > 0.0 && x.is_finite())) {
            return Err(domain(format!("magnitude {} at index {i} is not positive and finite", xs[i])));
        }
        if kind == ModelKind::Bgg {
            if let Some(i) = ns.iter().position(|&n| n == 0) {
                return Err(domain(format!("BGG counts must be at least 1, index {i} has 0")));
            }
        }
        Ok(Self { xs, ns, kind })
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }
    pub fn ns(&self) -> &[u64] {
        &self.ns
    }
    pub fn kind(&self) -> ModelKind {
        self.kind
    }
    pub fn len(&self) -> usize {
        self.xs.len()
    }
    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// X̄ₙ
    pub fn mean_x(&self) -> f64 {
        self.xs.iter().sum::<f64>() / self.len() as f64
    }

    /// N̄ₙ (or M̄ₙ for BMixGNB samples)
    pub fn mean_n(&self) -> f64 {
        self.ns.iter().map(|&n| n as f64).sum::<f64>() / self.len() as f64
    }

    /// BGG pairs (x, n) seen as BMixGNB pairs (x, n − 1) at r = 1, or the reverse.
    pub fn shifted(&self) -> Self {
        match self.kind {
            ModelKind::Bgg => Self {
                xs: self.xs.clone(),
                ns: self.ns.iter().map(|n| n - 1).collect(),
                kind: ModelKind::Bmixgnb,
            },
            ModelKind::Bmixgnb => Self {
                xs: self.xs.clone(),
                ns: self.ns.iter().map(|n| n + 1).collect(),
                kind: ModelKind::Bgg,
            },
        }
    }

    pub(crate) fn require(&self, kind: ModelKind) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(domain(format!("expected a {kind:?} sample, got {:?}", self.kind)))
        }
    }

    /// Per-count aggregates: count value → (multiplicity, Σ ln x), plus Σ x and Σ ln x.
    pub(crate) fn summary(&self) -> CountSummary {
        let mut groups: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
        let mut sum_x = 0.0;
        let mut sum_ln_x = 0.0;
        for (&x, &n) in self.xs.iter().zip(&self.ns) {
            let e = groups.entry(n).or_insert((0.0, 0.0));
            e.0 += 1.0;
            e.1 += x.ln();
            sum_x += x;
            sum_ln_x += x.ln();
        }
        let len = self.len() as f64;
        CountSummary {
            groups: groups.into_iter().map(|(n, (c, l))| Group { n: n as f64, count: c, sum_ln_x: l }).collect(),
            n_obs: len,
            mean_x: sum_x / len,
            mean_n: self.mean_n(),
            sum_ln_x,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Group {
    pub n: f64,
    pub count: f64,
    pub sum_ln_x: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct CountSummary {
    pub groups: Vec<Group>,
    pub n_obs: f64,
    pub mean_x: f64,
    pub mean_n: f64,
    pub sum_ln_x: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parametrization {
    /// (β, α, p[, τ])
    Rate,
    /// (μ, α, p[, τ]) with μ = α/β
    Orthogonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InformationKind {
    #[default]
    Expected,
    Observed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// relative tolerance on the iterates of the root solves
    pub tol: f64,
    pub max_iter: usize,
    pub confidence: f64,
    pub information: InformationKind,
    pub series: SeriesControl,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tol: 1e-13,
            max_iter: 200,
            confidence: 0.95,
            information: InformationKind::Expected,
            series: SeriesControl::default(),
        }
    }
}

/// Parameter name → value, in the model's canonical order.
pub type ParamVector = IndexMap<String, f64>;

/// Outcome of a maximum-likelihood fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: String,
    pub parametrization: Parametrization,
    pub estimates: ParamVector,
    /// free parameters only
    pub std_errors: ParamVector,
    /// Wald interval [lower, upper] per free parameter
    pub ci: IndexMap<String, [f64; 2]>,
    pub confidence_level: f64,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    pub information: InformationKind,
    /// per-observation information over the free parameters, in `std_errors` order
    pub information_matrix: Vec<Vec<f64>>,
    pub n_obs: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fixed: Vec<String>,
}

impl FitReport {
    pub fn estimate(&self, name: &str) -> Option<f64> {
        self.estimates.get(name).copied()
    }

    pub fn std_error(&self, name: &str) -> Option<f64> {
        self.std_errors.get(name).copied()
    }
}

/// Everything needed to assemble a [`FitReport`] once the estimate is known.
pub(crate) struct ReportParts<'a> {
    pub model: &'a str,
    pub parametrization: Parametrization,
    pub names: &'a [&'a str],
    pub values: &'a [f64],
    /// indices into `names` of the free parameters
    pub free: &'a [usize],
    /// per-observation information over the free parameters
    pub info: Vec<Vec<f64>>,
    pub loglik: f64,
    pub iterations: usize,
    pub n_obs: usize,
}

pub(crate) fn assemble_report(parts: ReportParts<'_>, opts: &FitOptions) -> Result<FitReport> {
    if !(opts.confidence > 0.0 && opts.confidence < 1.0) {
        return Err(domain(format!("confidence level must lie in (0, 1), got {}", opts.confidence)));
    }
    let k = parts.free.len();
    let point = describe_point(parts.names, parts.values);
    let m = DMatrix::from_fn(k, k, |i, j| parts.info[i][j]);
    let inv = m.clone().try_inverse().ok_or_else(|| Error::DegenerateInformation {
        point: point.clone(),
        detail: "information matrix is singular".into(),
    })?;
    let z = normal_quantile(0.5 + opts.confidence / 2.0)?;
    let mut estimates = ParamVector::new();
    for (name, v) in parts.names.iter().zip(parts.values) {
        estimates.insert((*name).to_string(), *v);
    }
    let mut std_errors = ParamVector::new();
    let mut ci = IndexMap::new();
    for (row, &idx) in parts.free.iter().enumerate() {
        let var = inv[(row, row)] / parts.n_obs as f64;
        if !(var > 0.0) || !var.is_finite() {
            return Err(Error::DegenerateInformation {
                point,
                detail: format!("nonpositive asymptotic variance for {}", parts.names[idx]),
            });
        }
        let se = var.sqrt();
        let est = parts.values[idx];
        std_errors.insert(parts.names[idx].to_string(), se);
        ci.insert(parts.names[idx].to_string(), [est - z * se, est + z * se]);
    }
    let fixed = (0..parts.names.len())
        .filter(|i| !parts.free.contains(i))
        .map(|i| parts.names[i].to_string())
        .collect();
    Ok(FitReport {
        model: parts.model.to_string(),
        parametrization: parts.parametrization,
        estimates,
        std_errors,
        ci,
        confidence_level: opts.confidence,
        loglik: parts.loglik,
        converged: true,
        iterations: parts.iterations,
        information: opts.information,
        information_matrix: parts.info,
        n_obs: parts.n_obs,
        fixed,
    })
}

pub(crate) fn describe_point(names: &[&str], values: &[f64]) -> String {
    names
        .iter()
        .zip(values)
        .map(|(n, v)| format!("{n}={v}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Restricts a square matrix to the rows and columns in `idx`.
pub(crate) fn sub_matrix<const N: usize>(m: &[[f64; N]; N], idx: &[usize]) -> Vec<Vec<f64>> {
    idx.iter().map(|&i| idx.iter().map(|&j| m[i][j]).collect()).collect()
}

/// Central-difference Jacobian of a vector function, column j from steps in coordinate j.
#[allow(clippy::needless_range_loop)]
pub(crate) fn fd_jacobian<const N: usize, F>(f: F, at: [f64; N]) -> Result<[[f64; N]; N]>
where
    F: Fn([f64; N]) -> Result<[f64; N]>,
{
    let mut jac = [[0.0; N]; N];
    for j in 0..N {
        let h = 1e-5 * at[j].abs().max(1e-8);
        let mut up = at;
        let mut down = at;
        up[j] += h;
        down[j] -= h;
        let (fu, fd) = (f(up)?, f(down)?);
        for i in 0..N {
            jac[i][j] = (fu[i] - fd[i]) / (2.0 * h);
        }
    }
    // symmetrize
    for i in 0..N {
        for j in 0..i {
            let s = 0.5 * (jac[i][j] + jac[j][i]);
            jac[i][j] = s;
            jac[j][i] = s;
        }
    }
    Ok(jac)
}

/// Wald test of `component = null_value` using the report's standard error.
pub fn wald_test(report: &FitReport, component: &str, null_value: f64) -> Result<TestResult> {
    if !report.converged {
        return Err(Error::Precondition("Wald test needs a converged fit".into()));
    }
    let (Some(est), Some(se)) = (report.estimate(component), report.std_error(component)) else {
        return Err(Error::Precondition(format!("no free parameter named {component} in the report")));
    };
    let stat = ((est - null_value) / se).powi(2);
    Ok(TestResult { statistic: stat, p_value: chi_square_survival(stat, 1)?, df_or_n: 1.0 })
}

/// Likelihood-ratio test 2(ℓ_full − ℓ_restricted) against χ²_df.
pub fn lr_test(loglik_full: f64, loglik_restricted: f64, df: u32) -> Result<TestResult> {
    if df == 0 {
        return Err(Error::Precondition("LR test needs df >= 1".into()));
    }
    let raw = 2.0 * (loglik_full - loglik_restricted);
    if raw < -1e-6 * loglik_full.abs().max(1.0) {
        return Err(Error::Precondition(format!(
            "restricted log-likelihood {loglik_restricted} exceeds the full one {loglik_full}"
        )));
    }
    let stat = raw.max(0.0);
    Ok(TestResult { statistic: stat, p_value: chi_square_survival(stat, df)?, df_or_n: df as f64 })
}

/// LR test between two reports, restricted one first fitted under fixed parameters.
pub fn lr_test_reports(full: &FitReport, restricted: &FitReport) -> Result<TestResult> {
    if !full.converged || !restricted.converged {
        return Err(Error::Precondition("LR test needs converged fits".into()));
    }
    let df = full.std_errors.len().checked_sub(restricted.std_errors.len()).filter(|d| *d >= 1);
    let Some(df) = df else {
        return Err(Error::Precondition("restricted fit must have fewer free parameters".into()));
    };
    lr_test(full.loglik, restricted.loglik, df as u32)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_validation() {
        assert!(PairSample::new(vec![1.0], vec![0], ModelKind::Bgg).is_err());
        assert!(PairSample::new(vec![1.0], vec![0], ModelKind::Bmixgnb).is_ok());
        assert!(PairSample::new(vec![1.0, -1.0], vec![1, 1], ModelKind::Bgg).is_err());
        assert!(PairSample::new(vec![1.0], vec![1, 2], ModelKind::Bgg).is_err());
        assert!(PairSample::new(vec![], vec![], ModelKind::Bgg).is_err());
        let s = PairSample::new(vec![1.0, 3.0], vec![1, 3], ModelKind::Bgg).unwrap();
        assert_eq!((s.mean_x(), s.mean_n()), (2.0, 2.0));
        assert_eq!(s.shifted().ns(), &[0, 2]);
        assert_eq!(s.shifted().shifted(), s);
    }

    #[test]
    fn lr_and_wald_trivia() {
        let r = lr_test(-10.0, -10.0, 1).unwrap();
        assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
        let r = lr_test(0.0, -2.833, 1).unwrap();
        assert!((r.p_value - 0.0173).abs() < 5e-4);
        assert!(lr_test(1.0, 0.0, 0).is_err());
        assert!(lr_test(0.0, 5.0, 1).is_err());
    }

    #[test]
    fn report_json_field_names() {
        let opts = FitOptions::default();
        let parts = ReportParts {
            model: "BGG",
            parametrization: Parametrization::Rate,
            names: &["beta", "alpha", "p"],
            values: &[2.0, 1.0, 0.5],
            free: &[0, 2],
            info: vec![vec![4.0, 0.0], vec![0.0, 8.0]],
            loglik: -3.0,
            iterations: 0,
            n_obs: 100,
        };
        let rep = assemble_report(parts, &opts).unwrap();
        assert_eq!(rep.fixed, vec!["alpha".to_string()]);
        assert!((rep.std_errors["beta"] - 0.05).abs() < 1e-15);
        let w = wald_test(&rep, "beta", 2.0).unwrap();
        assert_eq!((w.statistic, w.p_value), (0.0, 1.0));
        assert!(wald_test(&rep, "alpha", 1.0).is_err());
        let v: serde_json::Value = serde_json::to_value(&rep).unwrap();
        for key in ["model", "parametrization", "estimates", "std_errors", "ci", "loglik", "converged", "iterations"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        let text = serde_json::to_string(&rep).unwrap();
        let pos = |k: &str| text.find(&format!("\"{k}\":")).unwrap();
        assert!(pos("beta") < pos("alpha") && pos("alpha") < pos("p"));
        let back: FitReport = serde_json::from_value(v).unwrap();
        assert_eq!(back, rep);
        let mut bad = rep.clone();
        bad.converged = false;
        assert!(matches!(wald_test(&bad, "beta", 1.0), Err(Error::Precondition(_))));
    }
}
