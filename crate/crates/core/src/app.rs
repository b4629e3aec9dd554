//! Exchange-rate pipeline: load a `date,rate` series, turn it into
//! (magnitude, duration) pairs of maximal runs of positive log-returns, fit
//! the BGG and BEG models, and write the analysis tables.

use std::fmt::Write as _;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDate};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bgg::BggParams;
use crate::error::{domain, Error, Result};
use crate::gof::{
    ks_one_sample, ks_two_sample, pearson_chi_square, qq_points, write_qq_csv, EmpiricalDistribution,
    TestResult,
};
use crate::infer::{
    bgg_fit, bgg_fit_fixed_alpha, bgg_fit_ortho, lr_test_reports, wald_test, FitOptions, FitReport,
    ModelKind, PairSample,
};
use crate::io::format_sig17;
use crate::sample::{gamma_unchecked, sample_geometric};
use crate::special::{reg_inc_gamma, SeriesControl};

const DATE_FORMAT: &str = "%Y-%m-%d";

/// Daily quotes with strictly increasing dates and positive rates.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSeries {
    dates: Vec<NaiveDate>,
    rates: Vec<f64>,
}

impl RateSeries {
    pub fn new(dates: Vec<NaiveDate>, rates: Vec<f64>) -> Result<Self> {
        if dates.len() != rates.len() {
            return Err(Error::Validation(format!("{} dates but {} rates", dates.len(), rates.len())));
        }
        if let Some(i) = rates.iter().position(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(Error::Validation(format!("rate {} at index {i} is not positive", rates[i])));
        }
        if let Some(i) = dates.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Validation(format!(
                "dates not strictly increasing at index {} ({} then {})",
                i + 1,
                dates[i],
                dates[i + 1]
            )));
        }
        Ok(Self { dates, rates })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }
    pub fn rates(&self) -> &[f64] {
        &self.rates
    }
    pub fn len(&self) -> usize {
        self.rates.len()
    }
    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }
}

/// Reads a `date,rate` CSV with ISO-8601 dates. Line numbers in errors count the header as line 1.
pub fn read_rates_csv<R: Read>(input: R) -> Result<RateSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let (Some(id), Some(ir)) = (col("date"), col("rate")) else {
        return Err(Error::Parse { lines: vec![1], message: "header must contain columns date and rate".into() });
    };
    let mut dates = Vec::new();
    let mut rates = Vec::new();
    let mut malformed = Vec::new();
    let mut nonpositive = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let Ok(rec) = rec else {
            malformed.push(line);
            continue;
        };
        let date = rec.get(id).and_then(|d| NaiveDate::parse_from_str(d, DATE_FORMAT).ok());
        let rate = rec.get(ir).and_then(|r| r.parse::<f64>().ok()).filter(|r| r.is_finite());
        match (date, rate) {
            (Some(d), Some(r)) if r > 0.0 => {
                dates.push(d);
                rates.push(r);
            }
            (Some(_), Some(_)) => nonpositive.push(line),
            _ => malformed.push(line),
        }
    }
    if !malformed.is_empty() {
        return Err(Error::Parse { lines: malformed, message: "unparseable date or rate".into() });
    }
    if !nonpositive.is_empty() {
        return Err(Error::Validation(format!("non-positive rate on line(s) {nonpositive:?}")));
    }
    RateSeries::new(dates, rates)
}

pub fn load_rates_csv(path: &Path) -> Result<RateSeries> {
    read_rates_csv(fs::File::open(path)?)
}

pub fn write_rates_csv<W: std::io::Write>(out: W, series: &RateSeries) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["date", "rate"])?;
    for (d, r) in series.dates.iter().zip(&series.rates) {
        w.write_record([d.format(DATE_FORMAT).to_string(), format_sig17(*r)])?;
    }
    w.flush()?;
    Ok(())
}

/// rᵢ = ln(rateᵢ₊₁ / rateᵢ).
pub fn log_returns(series: &RateSeries) -> Result<Vec<f64>> {
    if series.len() < 2 {
        return Err(domain("log-returns need at least two rates"));
    }
    Ok(series.rates.windows(2).map(|w| (w[1] / w[0]).ln()).collect())
}

/// Runs of strictly positive returns and the individual positive returns.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunExtraction {
    pub magnitudes: Vec<f64>,
    pub durations: Vec<u64>,
    pub one_day_positive: Vec<f64>,
    /// the series ended inside a positive run, which was kept as a full observation
    pub trailing_run_open: bool,
}

impl RunExtraction {
    pub fn is_empty(&self) -> bool {
        self.magnitudes.is_empty()
    }

    pub fn len(&self) -> usize {
        self.magnitudes.len()
    }

    /// The runs as a BGG sample; fails when no run was found.
    pub fn pairs(&self) -> Result<PairSample> {
        if self.is_empty() {
            return Err(Error::DegenerateData("no positive return in the series, nothing to fit".into()));
        }
        PairSample::new(self.magnitudes.clone(), self.durations.clone(), ModelKind::Bgg)
    }
}

/// Maximal runs of consecutive strictly positive returns become (sum, length) pairs; zero and
/// negative returns end a run.
pub fn extract_positive_runs(returns: &[f64]) -> Result<RunExtraction> {
    if returns.is_empty() {
        return Err(domain("no returns to extract runs from"));
    }
    if let Some(i) = returns.iter().position(|r| !r.is_finite()) {
        return Err(domain(format!("return at index {i} is not finite")));
    }
    let mut ext = RunExtraction::default();
    let mut run: Option<(f64, u64)> = None;
    for &r in returns {
        if r > 0.0 {
            ext.one_day_positive.push(r);
            let (s, n) = run.get_or_insert((0.0, 0));
            *s += r;
            *n += 1;
        } else if let Some((s, n)) = run.take() {
            ext.magnitudes.push(s);
            ext.durations.push(n);
        }
    }
    if let Some((s, n)) = run {
        ext.magnitudes.push(s);
        ext.durations.push(n);
        ext.trailing_run_open = true;
    }
    Ok(ext)
}

/// Two-sample comparison of the run magnitudes with the rescaled one-day returns D/p̂.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityCheck {
    pub test: TestResult,
    /// slope 1/p̂ of the reference line through the QQ points
    pub slope: f64,
    /// (one-day quantile, magnitude quantile) pairs
    pub qq: Vec<(f64, f64)>,
}

pub fn stability_check(extraction: &RunExtraction, p_hat: f64) -> Result<StabilityCheck> {
    if extraction.is_empty() || extraction.one_day_positive.is_empty() {
        return Err(domain("stability check needs runs and positive one-day returns"));
    }
    if !(p_hat > 0.0 && p_hat < 1.0) {
        return Err(domain(format!("p-hat must lie in (0, 1), got {p_hat}")));
    }
    let scaled: Vec<f64> = extraction.one_day_positive.iter().map(|d| d / p_hat).collect();
    Ok(StabilityCheck {
        test: ks_two_sample(&extraction.magnitudes, &scaled)?,
        slope: 1.0 / p_hat,
        qq: qq_points(&extraction.one_day_positive, &extraction.magnitudes)?,
    })
}

/// Return sequence made of Geom(p)-long runs of Γ(α, β) positive returns,
/// each closed by one negative return of Γ(α, β) size. Returns the series
/// and the generating (magnitude, duration) pairs.
pub fn synthetic_returns<R: Rng + ?Sized>(
    params: &BggParams,
    n_pairs: usize,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>, Vec<u64>)> {
    let (beta, alpha) = (params.beta(), params.alpha());
    let mut returns = Vec::new();
    let mut xs = Vec::with_capacity(n_pairs);
    let mut ns = Vec::with_capacity(n_pairs);
    for _ in 0..n_pairs {
        let n = sample_geometric(params.p(), rng)?;
        let mut x = 0.0;
        for _ in 0..n {
            // a zero draw would end the run early, so redraw
            let mut v = 0.0;
            while v <= 0.0 {
                v = gamma_unchecked(alpha, beta, rng);
            }
            returns.push(v);
            x += v;
        }
        let mut down = 0.0;
        while down <= 0.0 {
            down = gamma_unchecked(alpha, beta, rng);
        }
        returns.push(-down);
        xs.push(x);
        ns.push(n);
    }
    Ok((returns, xs, ns))
}

/// Daily rate series whose log-returns follow [`synthetic_returns`].
pub fn synthetic_rates<R: Rng + ?Sized>(
    params: &BggParams,
    n_pairs: usize,
    start: NaiveDate,
    start_rate: f64,
    rng: &mut R,
) -> Result<RateSeries> {
    if !(start_rate > 0.0) {
        return Err(domain("starting rate must be positive"));
    }
    let (returns, _, _) = synthetic_returns(params, n_pairs, rng)?;
    let mut rates = Vec::with_capacity(returns.len() + 1);
    let mut level = start_rate.ln();
    rates.push(start_rate);
    for r in &returns {
        level += r;
        rates.push(level.exp());
    }
    let dates = (0..rates.len()).map(|i| start + Duration::days(i as i64)).collect();
    RateSeries::new(dates, rates)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisConfig {
    pub fit: FitOptions,
    pub histogram_bins: usize,
    /// durations 1..cells−1 get their own row; the last row pools ≥ cells
    pub duration_cells: usize,
    /// conditional KS of X | N = k for k = 1..=this
    pub conditional_max_n: u64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self { fit: FitOptions::default(), histogram_bins: 30, duration_cells: 7, conditional_max_n: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityRow {
    pub left: f64,
    pub right: f64,
    pub empirical: f64,
    pub fitted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRow {
    pub x: f64,
    pub empirical: f64,
    pub fitted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationRow {
    /// "1", "2", …, or "≥7" style label for the pooled cell
    pub duration: String,
    pub absolute: u64,
    pub relative: f64,
    pub fitted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalKsRow {
    pub n: u64,
    pub count: usize,
    pub result: Option<TestResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlations {
    pub empirical: f64,
    pub fitted: f64,
}

/// Everything produced by [`run_full_analysis`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisBundle {
    pub n_pairs: usize,
    pub trailing_run_open: bool,
    pub fit_rate: FitReport,
    pub fit_ortho: Option<FitReport>,
    pub fit_beg: Option<FitReport>,
    pub lr_alpha_one: Option<TestResult>,
    pub wald_alpha_one: Option<TestResult>,
    pub density: Vec<DensityRow>,
    pub survival: Vec<SurvivalRow>,
    pub durations: Vec<DurationRow>,
    pub duration_chi_square: Option<TestResult>,
    pub conditional_ks: Vec<ConditionalKsRow>,
    pub stability: Option<StabilityCheck>,
    pub correlation: Correlations,
    /// steps that failed without invalidating the main fit
    pub failures: Vec<String>,
    pub notes: Vec<String>,
}

/// Geometric duration table: cells 1..k−1 and a pooled ≥ k cell.
pub fn duration_table(durations: &[u64], p_hat: f64, cells: usize) -> Result<Vec<DurationRow>> {
    if cells < 2 {
        return Err(domain("duration table needs at least two cells"));
    }
    if durations.is_empty() {
        return Err(domain("duration table of an empty sample"));
    }
    let total = durations.len() as f64;
    let q = 1.0 - p_hat;
    let mut rows = Vec::with_capacity(cells);
    for k in 1..cells as u64 {
        let count = durations.iter().filter(|&&n| n == k).count() as u64;
        rows.push(DurationRow {
            duration: k.to_string(),
            absolute: count,
            relative: count as f64 / total,
            fitted: p_hat * q.powi(k as i32 - 1),
        });
    }
    let last = cells as u64;
    let count = durations.iter().filter(|&&n| n >= last).count() as u64;
    rows.push(DurationRow {
        duration: format!(">={last}"),
        absolute: count,
        relative: count as f64 / total,
        fitted: q.powi(last as i32 - 1),
    });
    Ok(rows)
}

fn keep<T>(failures: &mut Vec<String>, step: &str, r: Result<T>) -> Option<T> {
    match r {
        Ok(v) => Some(v),
        Err(e) => {
            failures.push(format!("{step}: {e}"));
            None
        }
    }
}

fn pearson_correlation(xs: &[f64], ns: &[u64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let mn = ns.iter().map(|&v| v as f64).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &k) in xs.iter().zip(ns) {
        let (dx, dy) = (x - mx, k as f64 - mn);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    sxy / (sxx * syy).sqrt()
}

fn params_of(report: &FitReport) -> Result<BggParams> {
    BggParams::new(report.estimates["beta"], report.estimates["alpha"], report.estimates["p"])
}

fn density_rows(xs: &[f64], theta: &BggParams, bins: usize, ctl: &SeriesControl) -> Result<Vec<DensityRow>> {
    let bins = bins.max(1);
    let max = xs.iter().copied().fold(0.0, f64::max);
    let width = max / bins as f64;
    let n = xs.len() as f64;
    let mut counts = vec![0usize; bins];
    for &x in xs {
        counts[((x / width) as usize).min(bins - 1)] += 1;
    }
    let mut rows = Vec::with_capacity(bins);
    let mut prev_cdf = 0.0;
    for (i, &c) in counts.iter().enumerate() {
        let right = if i + 1 == bins { max } else { (i + 1) as f64 * width };
        let cdf = theta.marginal_cdf_x(right, ctl)?;
        rows.push(DensityRow {
            left: i as f64 * width,
            right,
            empirical: c as f64 / (n * width),
            fitted: (cdf - prev_cdf) / width,
        });
        prev_cdf = cdf;
    }
    Ok(rows)
}

fn survival_rows(xs: &[f64], theta: &BggParams, ctl: &SeriesControl) -> Result<Vec<SurvivalRow>> {
    let ecdf = EmpiricalDistribution::new(xs)?;
    let mut points = ecdf.sorted().to_vec();
    points.dedup();
    points
        .into_iter()
        .map(|x| {
            Ok(SurvivalRow { x, empirical: ecdf.survival(x), fitted: theta.marginal_survival_x(x, ctl)? })
        })
        .collect()
}

fn conditional_rows(data: &PairSample, theta: &BggParams, max_n: u64) -> Result<Vec<ConditionalKsRow>> {
    (1..=max_n)
        .map(|k| {
            let subset: Vec<f64> = data
                .xs()
                .iter()
                .zip(data.ns())
                .filter(|(_, &n)| n == k)
                .map(|(&x, _)| x)
                .collect();
            let shape = k as f64 * theta.alpha();
            let result = if subset.is_empty() {
                None
            } else {
                Some(ks_one_sample(&subset, |x| reg_inc_gamma(shape, theta.beta() * x).unwrap_or(f64::NAN))?)
            };
            Ok(ConditionalKsRow { n: k, count: subset.len(), result })
        })
        .collect()
}

/// Fits and tables for a run extraction. Fails without side effects when
/// the extraction is empty or the main BGG fit fails; secondary failures are
/// collected in `failures`.
pub fn analyze_extraction(extraction: &RunExtraction, config: &AnalysisConfig) -> Result<AnalysisBundle> {
    let data = extraction.pairs()?;
    let fit_rate = bgg_fit(&data, &config.fit)?;
    let theta = params_of(&fit_rate)?;
    let ctl = config.fit.series;
    let mut failures = Vec::new();
    let fit_ortho = keep(&mut failures, "orthogonal fit", bgg_fit_ortho(&data, &config.fit));
    let fit_beg = keep(&mut failures, "BEG fit", bgg_fit_fixed_alpha(&data, 1.0, &config.fit));
    let lr_alpha_one = fit_beg.as_ref().and_then(|beg| keep(&mut failures, "LR test", lr_test_reports(&fit_rate, beg)));
    let wald_alpha_one = keep(&mut failures, "Wald test", wald_test(&fit_rate, "alpha", 1.0));
    let durations = duration_table(data.ns(), theta.p(), config.duration_cells)?;
    let duration_chi_square = {
        let observed: Vec<u64> = durations.iter().map(|r| r.absolute).collect();
        let probs: Vec<f64> = durations.iter().map(|r| r.fitted).collect();
        keep(&mut failures, "duration chi-square", pearson_chi_square(&observed, &probs, 1))
    };
    let stability = keep(&mut failures, "stability check", stability_check(extraction, theta.p()));
    let bundle = AnalysisBundle {
        n_pairs: data.len(),
        trailing_run_open: extraction.trailing_run_open,
        density: density_rows(data.xs(), &theta, config.histogram_bins, &ctl)?,
        survival: survival_rows(data.xs(), &theta, &ctl)?,
        conditional_ks: conditional_rows(&data, &theta, config.conditional_max_n)?,
        correlation: Correlations {
            empirical: pearson_correlation(data.xs(), data.ns()),
            fitted: theta.correlation(),
        },
        fit_rate,
        fit_ortho,
        fit_beg,
        lr_alpha_one,
        wald_alpha_one,
        durations,
        duration_chi_square,
        stability,
        failures,
        notes: vec![
            "runs consist of strictly positive log-returns; zero returns end a run".into(),
            "a run still open at the end of the series is kept as a complete observation".into(),
            "standard errors use the expected information at the estimate".into(),
        ],
    };
    Ok(bundle)
}

fn csv_text<F>(header: &[&str], rows: usize, mut row: F) -> String
where
    F: FnMut(usize) -> Vec<String>,
{
    let mut out = header.join(",");
    out.push('\n');
    for i in 0..rows {
        let _ = writeln!(out, "{}", row(i).join(","));
    }
    out
}

fn opt_num(v: Option<f64>) -> String {
    v.map(format_sig17).unwrap_or_default()
}

/// Rendered output files, name → contents.
pub fn render_bundle(bundle: &AnalysisBundle) -> Result<Vec<(String, String)>> {
    let mut files = Vec::new();
    files.push(("summary.json".into(), json(bundle)?));
    files.push(("fit_bgg_rate.json".into(), json(&bundle.fit_rate)?));
    if let Some(r) = &bundle.fit_ortho {
        files.push(("fit_bgg_ortho.json".into(), json(r)?));
    }
    if let Some(r) = &bundle.fit_beg {
        files.push(("fit_beg.json".into(), json(r)?));
    }
    files.push((
        "marginal_x_density.csv".into(),
        csv_text(&["left", "right", "empirical", "fitted"], bundle.density.len(), |i| {
            let r = &bundle.density[i];
            vec![format_sig17(r.left), format_sig17(r.right), format_sig17(r.empirical), format_sig17(r.fitted)]
        }),
    ));
    files.push((
        "survival_x.csv".into(),
        csv_text(&["x", "empirical", "fitted"], bundle.survival.len(), |i| {
            let r = &bundle.survival[i];
            vec![format_sig17(r.x), format_sig17(r.empirical), format_sig17(r.fitted)]
        }),
    ));
    files.push((
        "duration_table.csv".into(),
        csv_text(&["duration", "absolute", "relative", "fitted"], bundle.durations.len(), |i| {
            let r = &bundle.durations[i];
            vec![r.duration.clone(), r.absolute.to_string(), format_sig17(r.relative), format_sig17(r.fitted)]
        }),
    ));
    files.push((
        "conditional_ks.csv".into(),
        csv_text(&["n", "count", "statistic", "p_value"], bundle.conditional_ks.len(), |i| {
            let r = &bundle.conditional_ks[i];
            vec![
                r.n.to_string(),
                r.count.to_string(),
                opt_num(r.result.map(|t| t.statistic)),
                opt_num(r.result.map(|t| t.p_value)),
            ]
        }),
    ));
    if let Some(st) = &bundle.stability {
        let mut buf = Vec::new();
        write_qq_csv(&mut buf, &st.qq)?;
        files.push(("stability_qq.csv".into(), String::from_utf8(buf).expect("csv output is utf-8")));
    }
    Ok(files)
}

fn json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)?)
}

/// Runs the analysis on an extraction and writes every output file into
/// `outdir`. Nothing is written unless the whole computation succeeds.
pub fn run_full_analysis(
    extraction: &RunExtraction,
    config: &AnalysisConfig,
    outdir: &Path,
) -> Result<(AnalysisBundle, Vec<PathBuf>)> {
    let bundle = analyze_extraction(extraction, config)?;
    let files = render_bundle(&bundle)?;
    fs::create_dir_all(outdir)?;
    let mut written = Vec::with_capacity(files.len());
    for (name, body) in files {
        let path = outdir.join(name);
        fs::write(&path, body)?;
        written.push(path);
    }
    Ok((bundle, written))
}

/// [`run_full_analysis`] starting from a rate series.
pub fn run_full_analysis_series(
    series: &RateSeries,
    config: &AnalysisConfig,
    outdir: &Path,
) -> Result<(AnalysisBundle, Vec<PathBuf>)> {
    let extraction = extract_positive_runs(&log_returns(series)?)?;
    run_full_analysis(&extraction, config, outdir)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::RandomStream;

    fn day(i: i64) -> NaiveDate {
        NaiveDate::from_ymd_opt(2000, 1, 3).unwrap() + Duration::days(i)
    }

    #[test]
    fn series_validation() {
        assert!(RateSeries::new(vec![day(0), day(1)], vec![1.0, 2.0]).is_ok());
        assert!(RateSeries::new(vec![day(1), day(0)], vec![1.0, 2.0]).is_err());
        assert!(RateSeries::new(vec![day(0), day(1)], vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn csv_parsing_reports_rows() {
        let s = read_rates_csv("date,rate\n2000-01-03,1.0\n2000-01-04,2.0\n".as_bytes()).unwrap();
        assert_eq!(s.len(), 2);
        match read_rates_csv("date,rate\n2000-01-03,1.0\n2000-01-04,0\n".as_bytes()) {
            Err(Error::Validation(msg)) => assert!(msg.contains('3'), "{msg}"),
            other => panic!("{other:?}"),
        }
        match read_rates_csv("date,rate\n2000-01-03,x\nbad,1\n2000-01-05,1\n".as_bytes()) {
            Err(Error::Parse { lines, .. }) => assert_eq!(lines, vec![2, 3]),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            read_rates_csv("date,rate\n2000-01-04,1.0\n2000-01-03,2.0\n".as_bytes()),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn returns_and_runs() {
        let s = RateSeries::new(vec![day(0), day(1)], vec![1.0, std::f64::consts::E]).unwrap();
        assert!((log_returns(&s).unwrap()[0] - 1.0).abs() < 1e-15);
        let ext = extract_positive_runs(&[0.1, 0.2, -0.3, 0.4]).unwrap();
        assert_eq!(ext.durations, vec![2, 1]);
        assert!((ext.magnitudes[0] - 0.3).abs() < 1e-15);
        assert_eq!(ext.one_day_positive, vec![0.1, 0.2, 0.4]);
        assert!(ext.trailing_run_open);
        let ext = extract_positive_runs(&[-0.1, 0.0, -0.2]).unwrap();
        assert!(ext.is_empty());
        assert!(ext.pairs().is_err());
        let ext = extract_positive_runs(&[0.1, 0.0, 0.2]).unwrap();
        assert_eq!(ext.durations, vec![1, 1]);
        assert!(extract_positive_runs(&[]).is_err());
    }

    #[test]
    fn synthetic_extraction_recovers_pairs() {
        let th = BggParams::new(100.0, 0.8805, 0.5093).unwrap();
        let mut rng = RandomStream::new(3, 0);
        let (returns, xs, ns) = synthetic_returns(&th, 500, &mut rng).unwrap();
        let ext = extract_positive_runs(&returns).unwrap();
        assert_eq!(ext.durations, ns);
        assert_eq!(ext.magnitudes, xs);
        assert!(!ext.trailing_run_open);
    }

    #[test]
    fn table_two_row() {
        let rows = duration_table(&[1, 2, 3, 7, 9], 0.50928, 7).unwrap();
        let want = [0.50928, 0.24991, 0.12264, 0.06018, 0.02953, 0.01449, 0.01396];
        for (r, w) in rows.iter().zip(want) {
            assert!((r.fitted - w).abs() < 2e-5, "{} {}", r.fitted, w);
        }
        assert_eq!(rows[6].absolute, 2);
        assert_eq!(rows[6].duration, ">=7");
    }

    #[test]
    fn stability_slope_and_identity() {
        let ext = RunExtraction {
            magnitudes: vec![0.2, 0.4, 0.6],
            durations: vec![1, 1, 1],
            one_day_positive: vec![0.1, 0.2, 0.3],
            trailing_run_open: false,
        };
        let st = stability_check(&ext, 0.5).unwrap();
        assert_eq!(st.test.p_value, 1.0);
        assert_eq!(st.slope, 2.0);
        // 1.9636 is 1/p-hat at the unrounded estimate 0.50928; 1/0.5093 rounds to 1.9635
        let st = stability_check(&ext, 0.50928).unwrap();
        assert!((st.slope - 1.9636).abs() < 5e-5);
        let st = stability_check(&ext, 0.5093).unwrap();
        assert!((st.slope - 1.9636).abs() < 2e-4);
        assert!(stability_check(&RunExtraction::default(), 0.5).is_err());
    }
}
