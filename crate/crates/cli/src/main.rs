//! `bgg`: batch front end for fitting, sampling and the log-return workflow.
//!
//! Exit status is 0 on success, 3 when an iterative procedure fails to
//! converge and 2 for every other failure (bad input, domain errors).

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bgg_core::app::{self, AnalysisConfig};
use bgg_core::bgg::{BggParams, BggParamsOrtho};
use bgg_core::bmixgnb::{simulate_path, BmixgnbParams};
use bgg_core::gof::{chi_square_pmf, ks_one_sample, TestResult};
use bgg_core::infer::{
    bgg_fit, bgg_fit_fixed_alpha, bgg_fit_ortho, bmixgnb_fit, lr_test_reports, wald_test,
    BmixgnbConstraints, FitOptions, FitReport, InformationKind, ModelKind, PairSample,
    Parametrization,
};
use bgg_core::io::{read_pairs_csv, write_pairs_csv, write_path_csv, write_paths_csv};
use bgg_core::sample::{self, par_collect_pairs, RandomStream, SumMethod};
use bgg_core::special::SeriesControl;
use bgg_core::{Error, Result};
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "bgg", version, about = "Bivariate gamma-geometric modelling toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Maximum-likelihood fit of a pairs CSV (`x,n`)
    Fit(FitArgs),
    /// Draw pairs from a model and write them as CSV
    Sample(SampleArgs),
    /// Turn a `date,rate` series into run (magnitude, duration) pairs
    Extract(ExtractArgs),
    /// Full log-return analysis, one file per table
    Analyze(AnalyzeArgs),
    /// Likelihood-ratio or Wald test of a parameter value
    Test(TestArgs),
    /// Simulate paths of the bivariate Lévy process on a time grid
    SimulatePath(PathArgs),
    /// Goodness of fit of the X marginal (KS) or the N marginal (chi-square)
    Gof(GofArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Bgg,
    Beg,
    Bmixgnb,
}

#[derive(Clone, Copy, ValueEnum)]
enum ParamArg {
    Rate,
    Ortho,
}

#[derive(Clone, Copy, ValueEnum)]
enum InfoArg {
    Expected,
    Observed,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    /// X | N as one Γ(Nα, β) draw
    Gamma,
    /// X | N as a literal sum of N gamma draws
    Literal,
    /// compound Poisson with logarithmic jumps
    CompoundPoisson,
    /// BMixGNB only: negative binomial count plus a gamma sum
    GammaSum,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long, value_enum, default_value = "bgg")]
    model: ModelArg,
    #[arg(long, value_enum, default_value = "rate")]
    parametrization: ParamArg,
    /// pairs CSV with header `x,n` (n ≥ 1 for bgg/beg, n ≥ 0 for bmixgnb)
    #[arg(long)]
    input: PathBuf,
    /// report path; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "expected")]
    information: InfoArg,
    #[arg(long, default_value_t = 0.95)]
    confidence: f64,
    /// bmixgnb: hold α at this value
    #[arg(long)]
    fix_alpha: Option<f64>,
    /// bmixgnb: hold τ at this value
    #[arg(long)]
    fix_tau: Option<f64>,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long, value_enum, default_value = "bgg")]
    model: ModelArg,
    /// `beta=1,alpha=2,p=0.5` (add `r=` for bmixgnb; `mu=` may replace `beta`) or a JSON object
    #[arg(long)]
    params: String,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "gamma")]
    method: MethodArg,
    /// CSV path; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExtractArgs {
    /// rates CSV with header `date,rate`
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true).args(["input", "synthetic"])))]
struct AnalyzeArgs {
    /// rates CSV with header `date,rate`
    #[arg(long)]
    input: Option<PathBuf>,
    /// run on a generated series drawn with this seed instead of a file
    #[arg(long)]
    synthetic: Option<u64>,
    /// number of runs in the generated series
    #[arg(long, default_value_t = 549)]
    synthetic_pairs: usize,
    /// generating parameters of the synthetic series
    #[arg(long, default_value = "mu=0.0082,alpha=0.8805,p=0.5093")]
    synthetic_params: String,
    #[arg(long)]
    outdir: PathBuf,
    #[arg(long, default_value_t = 30)]
    bins: usize,
    #[arg(long, default_value_t = 7)]
    duration_cells: usize,
}

#[derive(Args)]
#[command(group(ArgGroup::new("kind").required(true).args(["lr", "wald"])))]
struct TestArgs {
    #[arg(long)]
    lr: bool,
    #[arg(long)]
    wald: bool,
    /// pairs CSV; fits BGG and the model with the parameter held at `--null`
    #[arg(long, conflicts_with_all = ["full", "restricted", "report"])]
    input: Option<PathBuf>,
    /// LR: unrestricted fit report (JSON)
    #[arg(long, requires = "restricted")]
    full: Option<PathBuf>,
    /// LR: restricted fit report (JSON)
    #[arg(long, requires = "full")]
    restricted: Option<PathBuf>,
    /// Wald: fit report (JSON)
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value = "alpha")]
    param: String,
    #[arg(long, default_value_t = 1.0)]
    null: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PathArgs {
    /// `beta=…,alpha=…,p=…`
    #[arg(long)]
    params: String,
    /// comma separated increasing times, e.g. `0,0.5,1`
    #[arg(long, value_delimiter = ',', required = true)]
    grid: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    paths: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(group(ArgGroup::new("kind").required(true).args(["ks", "chi2"])))]
struct GofArgs {
    /// KS test of the magnitudes against the BGG X marginal
    #[arg(long)]
    ks: bool,
    /// Pearson test of the durations against the geometric law
    #[arg(long)]
    chi2: bool,
    #[arg(long)]
    input: PathBuf,
    /// `beta=…,alpha=…,p=…`; the BGG MLE of the input when absent
    #[arg(long)]
    params: Option<String>,
    #[arg(long, default_value_t = 5.0)]
    min_expected: f64,
    /// estimated parameters subtracted from the chi-square df (default 1 when fitted, 0 otherwise)
    #[arg(long)]
    df_adjust: Option<u32>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Fit(a) => fit(a),
        Command::Sample(a) => sample_cmd(a),
        Command::Extract(a) => extract(a),
        Command::Analyze(a) => analyze(a),
        Command::Test(a) => test_cmd(a),
        Command::SimulatePath(a) => simulate(a),
        Command::Gof(a) => gof(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_non_convergence() { 3 } else { 2 })
        }
    }
}

/// `beta=1,alpha=2` or `{"beta": 1, "alpha": 2}` into ordered (name, value) pairs.
fn parse_params(spec: &str) -> Result<Vec<(String, f64)>> {
    let spec = spec.trim();
    if spec.starts_with('{') {
        let map: serde_json::Map<String, serde_json::Value> = serde_json::from_str(spec)?;
        return map
            .into_iter()
            .map(|(k, v)| match v.as_f64() {
                Some(x) => Ok((k, x)),
                None => Err(Error::Validation(format!("parameter {k} is not a number"))),
            })
            .collect();
    }
    spec.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|kv| {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Validation(format!("expected name=value, got `{kv}`")))?;
            let x = v
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::Validation(format!("parameter {} is not a number: `{v}`", k.trim())))?;
            Ok((k.trim().to_string(), x))
        })
        .collect()
}

fn lookup(params: &[(String, f64)], name: &str) -> Option<f64> {
    params.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
}

fn check_names(params: &[(String, f64)], allowed: &[&str]) -> Result<()> {
    for (k, _) in params {
        if !allowed.contains(&k.as_str()) {
            return Err(Error::Validation(format!("unknown parameter `{k}` (expected one of {allowed:?})")));
        }
    }
    Ok(())
}

fn require(params: &[(String, f64)], name: &str) -> Result<f64> {
    lookup(params, name).ok_or_else(|| Error::Validation(format!("missing parameter `{name}`")))
}

/// BGG parameters from `beta` or `mu`, with α defaulting to 1 when `beg` is set.
fn bgg_params(spec: &str, beg: bool) -> Result<BggParams> {
    let kv = parse_params(spec)?;
    check_names(&kv, &["beta", "mu", "alpha", "p"])?;
    let alpha = match (lookup(&kv, "alpha"), beg) {
        (Some(a), true) if a != 1.0 => {
            return Err(Error::Validation(format!("the BEG model has alpha = 1, got {a}")))
        }
        (Some(a), _) => a,
        (None, true) => 1.0,
        (None, false) => require(&kv, "alpha")?,
    };
    let p = require(&kv, "p")?;
    match (lookup(&kv, "beta"), lookup(&kv, "mu")) {
        (Some(b), None) => BggParams::new(b, alpha, p),
        (None, Some(mu)) => Ok(BggParamsOrtho::new(mu, alpha, p)?.to_rate()),
        _ => Err(Error::Validation("give exactly one of `beta` and `mu`".into())),
    }
}

fn bmixgnb_params(spec: &str) -> Result<BmixgnbParams> {
    let kv = parse_params(spec)?;
    check_names(&kv, &["beta", "alpha", "p", "r", "tau"])?;
    let r = match (lookup(&kv, "r"), lookup(&kv, "tau")) {
        (Some(r), None) | (None, Some(r)) => r,
        _ => return Err(Error::Validation("give exactly one of `r` and `tau`".into())),
    };
    BmixgnbParams::new(require(&kv, "beta")?, require(&kv, "alpha")?, require(&kv, "p")?, r)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let mut out = output(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn load_pairs(path: &Path, kind: ModelKind) -> Result<PairSample> {
    let (xs, ns) = read_pairs_csv(File::open(path)?)?;
    PairSample::new(xs, ns, kind)
}

fn status(report: &FitReport) -> ExitCode {
    if report.converged {
        ExitCode::SUCCESS
    } else {
        eprintln!("error: fit did not converge after {} iterations", report.iterations);
        ExitCode::from(3)
    }
}

fn fit(a: FitArgs) -> Result<ExitCode> {
    let opts = FitOptions {
        confidence: a.confidence,
        information: match a.information {
            InfoArg::Expected => InformationKind::Expected,
            InfoArg::Observed => InformationKind::Observed,
        },
        ..FitOptions::default()
    };
    let parametrization = match a.parametrization {
        ParamArg::Rate => Parametrization::Rate,
        ParamArg::Ortho => Parametrization::Orthogonal,
    };
    if !matches!(a.model, ModelArg::Bmixgnb) && (a.fix_alpha.is_some() || a.fix_tau.is_some()) {
        return Err(Error::Validation("--fix-alpha/--fix-tau apply to --model bmixgnb only".into()));
    }
    let report = match a.model {
        ModelArg::Bgg => {
            let data = load_pairs(&a.input, ModelKind::Bgg)?;
            match parametrization {
                Parametrization::Rate => bgg_fit(&data, &opts)?,
                Parametrization::Orthogonal => bgg_fit_ortho(&data, &opts)?,
            }
        }
        ModelArg::Beg => {
            if parametrization == Parametrization::Orthogonal {
                return Err(Error::Validation("the BEG fit is reported in the rate parametrization".into()));
            }
            bgg_fit_fixed_alpha(&load_pairs(&a.input, ModelKind::Bgg)?, 1.0, &opts)?
        }
        ModelArg::Bmixgnb => {
            let data = load_pairs(&a.input, ModelKind::Bmixgnb)?;
            let constraints = BmixgnbConstraints { alpha: a.fix_alpha, tau: a.fix_tau };
            bmixgnb_fit(&data, parametrization, &constraints, &opts)?
        }
    };
    write_json(a.out.as_deref(), &report)?;
    Ok(status(&report))
}

fn sample_cmd(a: SampleArgs) -> Result<ExitCode> {
    if a.n == 0 {
        return Err(Error::Validation("--n must be at least 1".into()));
    }
    let (xs, ns) = match a.model {
        ModelArg::Bgg | ModelArg::Beg => {
            let params = bgg_params(&a.params, matches!(a.model, ModelArg::Beg))?;
            let method = match a.method {
                MethodArg::Gamma => Some(SumMethod::GammaShortcut),
                MethodArg::Literal => Some(SumMethod::LiteralSum),
                MethodArg::CompoundPoisson => None,
                MethodArg::GammaSum => {
                    return Err(Error::Validation("--method gamma-sum applies to bmixgnb".into()))
                }
            };
            par_collect_pairs(a.n, a.seed, |rng| match method {
                Some(m) => sample::sample_bgg_with(&params, m, rng),
                None => sample::sample_bgg_compound_poisson(&params, rng),
            })
        }
        ModelArg::Bmixgnb => {
            let params = bmixgnb_params(&a.params)?;
            let draw: fn(&BmixgnbParams, &mut RandomStream) -> (f64, u64) = match a.method {
                MethodArg::Gamma => sample::sample_bmixgnb,
                MethodArg::GammaSum => sample::sample_bmixgnb_gamma_sum,
                MethodArg::CompoundPoisson => sample::sample_bmixgnb_compound_poisson,
                MethodArg::Literal => {
                    return Err(Error::Validation("--method literal applies to bgg/beg".into()))
                }
            };
            par_collect_pairs(a.n, a.seed, |rng| draw(&params, rng))
        }
    };
    let mut out = output(a.out.as_deref())?;
    write_pairs_csv(&mut out, &xs, &ns)?;
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn extract(a: ExtractArgs) -> Result<ExitCode> {
    let series = app::load_rates_csv(&a.input)?;
    let ext = app::extract_positive_runs(&app::log_returns(&series)?)?;
    if ext.is_empty() {
        return Err(Error::DegenerateData("the series has no positive log-return".into()));
    }
    if ext.trailing_run_open {
        eprintln!("note: the series ends inside a positive run; it was kept as a full observation");
    }
    let mut out = output(a.out.as_deref())?;
    write_pairs_csv(&mut out, &ext.magnitudes, &ext.durations)?;
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn analyze(a: AnalyzeArgs) -> Result<ExitCode> {
    let config = AnalysisConfig {
        histogram_bins: a.bins,
        duration_cells: a.duration_cells,
        ..AnalysisConfig::default()
    };
    let (series, synthetic) = match (&a.input, a.synthetic) {
        (Some(path), None) => (app::load_rates_csv(path)?, false),
        (None, Some(seed)) => {
            let params = bgg_params(&a.synthetic_params, false)?;
            let start = chrono::NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date");
            let mut rng = RandomStream::new(seed, 0);
            (app::synthetic_rates(&params, a.synthetic_pairs, start, 1.0, &mut rng)?, true)
        }
        _ => unreachable!("clap enforces exactly one source"),
    };
    let (bundle, mut written) = app::run_full_analysis_series(&series, &config, &a.outdir)?;
    if synthetic {
        let path = a.outdir.join("rates.csv");
        app::write_rates_csv(BufWriter::new(File::create(&path)?), &series)?;
        written.push(path);
    }
    for f in &bundle.failures {
        eprintln!("warning: {f}");
    }
    for p in &written {
        println!("{}", p.display());
    }
    Ok(status(&bundle.fit_rate))
}

fn read_report(path: &Path) -> Result<FitReport> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

fn test_cmd(a: TestArgs) -> Result<ExitCode> {
    let result: TestResult = if let Some(input) = &a.input {
        if a.param != "alpha" {
            return Err(Error::Validation("with --input only the alpha hypothesis is available".into()));
        }
        let data = load_pairs(input, ModelKind::Bgg)?;
        let opts = FitOptions::default();
        if a.lr {
            let full = bgg_fit(&data, &opts)?;
            let restricted = bgg_fit_fixed_alpha(&data, a.null, &opts)?;
            lr_test_reports(&full, &restricted)?
        } else {
            wald_test(&bgg_fit_ortho(&data, &opts)?, "alpha", a.null)?
        }
    } else if a.lr {
        let (Some(full), Some(restricted)) = (&a.full, &a.restricted) else {
            return Err(Error::Validation("--lr needs --input or both --full and --restricted".into()));
        };
        lr_test_reports(&read_report(full)?, &read_report(restricted)?)?
    } else {
        let Some(report) = &a.report else {
            return Err(Error::Validation("--wald needs --input or --report".into()));
        };
        wald_test(&read_report(report)?, &a.param, a.null)?
    };
    write_json(a.out.as_deref(), &result)?;
    Ok(ExitCode::SUCCESS)
}

fn simulate(a: PathArgs) -> Result<ExitCode> {
    if a.paths == 0 {
        return Err(Error::Validation("--paths must be at least 1".into()));
    }
    let params = bgg_params(&a.params, false)?;
    let paths = (0..a.paths)
        .map(|k| simulate_path(&params, &a.grid, &mut RandomStream::new(a.seed, k as u64)))
        .collect::<Result<Vec<_>>>()?;
    let mut out = output(a.out.as_deref())?;
    if a.paths == 1 {
        write_path_csv(&mut out, &paths[0])?;
    } else {
        write_paths_csv(&mut out, &paths)?;
    }
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn gof(a: GofArgs) -> Result<ExitCode> {
    let data = load_pairs(&a.input, ModelKind::Bgg)?;
    let (params, fitted) = match &a.params {
        Some(spec) => (bgg_params(spec, false)?, false),
        None => {
            let r = bgg_fit(&data, &FitOptions::default())?;
            let est = |k: &str| r.estimate(k).expect("BGG report has beta, alpha, p");
            (BggParams::new(est("beta"), est("alpha"), est("p"))?, true)
        }
    };
    let result = if a.ks {
        let ctl = SeriesControl::default();
        ks_one_sample(data.xs(), |x| params.marginal_cdf_x(x, &ctl).unwrap_or(f64::NAN))?
    } else {
        let p = params.p();
        let df_adjust = a.df_adjust.unwrap_or(u32::from(fitted));
        chi_square_pmf(
            data.ns(),
            1,
            |k| p * (1.0 - p).powi((k - 1) as i32),
            a.min_expected,
            df_adjust,
        )?
    };
    write_json(a.out.as_deref(), &result)?;
    Ok(ExitCode::SUCCESS)
}
