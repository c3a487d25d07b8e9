//! `glshrink`: estimation, testing and simulation with global-local
//! shrinkage priors.
//!
//! Settings resolve with precedence flags > environment > config file.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use glshrink::config::{parse_config_str, ConfigOverrides};
use glshrink::eb::{eb_estimate, estimate_tau, moments_at_tau};
use glshrink::experiments::{run_experiment, ExperimentConfig, Runtime, Scenario};
use glshrink::fb::FullBayes;
use glshrink::manifest::RunManifest;
use glshrink::plot::write_plots;
use glshrink::report::{read_risk_csv, write_risk_csv};
use glshrink::testing::{bayes_oracle, rule_eb, rule_fb, rule_fixed_tau, DecisionSet};
use glshrink::verify::run_verify;
use glshrink::Error;
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "glshrink", version, about = "Global-local shrinkage for sparse normal means")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML experiment configuration.
    #[arg(long, global = true, env = "GLSHRINK_CONFIG")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "GLSHRINK_OUT", default_value = ".")]
    out: PathBuf,
    /// Root seed; overrides the config file.
    #[arg(long, global = true, env = "GLSHRINK_SEED")]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "GLSHRINK_THREADS")]
    threads: Option<usize>,
    /// Scenario name; overrides the config file.
    #[arg(long, global = true, env = "GLSHRINK_SCENARIO")]
    scenario: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Posterior means and variances for an observation file.
    Estimate {
        /// Observations: one number per line, or a CSV with an `x` column.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::Eb)]
        method: Method,
    },
    /// Signal/noise decisions for an observation file.
    Test {
        /// Observations, as for `estimate`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Rule::Fb)]
        rule: Rule,
        /// Global scale for `--rule fixed-tau`.
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Run a simulation scenario and write its report and manifest.
    Simulate,
    /// Run the built-in property suite.
    Verify,
    /// Line charts of report metrics against n.
    Plot {
        /// Report CSV written by `simulate`.
        #[arg(long)]
        input: PathBuf,
        /// Metrics to plot (default: aggregate risks and ratios).
        #[arg(long)]
        metric: Vec<String>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum Method {
    Eb,
    Fb,
    Both,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum Rule {
    Eb,
    Fb,
    Oracle,
    FixedTau,
}

/// Failure reported on stderr as one JSON object.
#[derive(Debug)]
struct Failure {
    kind: &'static str,
    message: String,
    details: Vec<String>,
}

impl Failure {
    fn new(kind: &'static str, message: impl Into<String>) -> Self {
        Failure {
            kind,
            message: message.into(),
            details: Vec::new(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let kind = match &e {
            Error::Domain(_) | Error::InvalidParameter { .. } | Error::LengthMismatch { .. } => "domain",
            Error::Quadrature { .. } | Error::Truncation { .. } => "numerics",
            Error::Assumption(_) => "assumption",
            Error::PosteriorUnderflow { .. } | Error::NegativeThreshold { .. } => "numerics",
            Error::Config(_) => "config",
            Error::Csv { .. } => "csv",
            Error::Io(_) => "io",
        };
        let details = match &e {
            Error::Config(v) => v.clone(),
            _ => Vec::new(),
        };
        let message = match &e {
            Error::Config(_) => "configuration invalid".to_string(),
            other => other.to_string(),
        };
        Failure { kind, message, details }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e).into()
    }
}

type CliResult<T> = Result<T, Failure>;

fn parse_scenario(name: &str) -> CliResult<Scenario> {
    Scenario::parse(name).ok_or_else(|| {
        let names: Vec<&str> = Scenario::ALL.iter().map(|s| s.name()).collect();
        Failure::new("usage", format!("unknown scenario `{name}` (expected one of {})", names.join(", ")))
    })
}

/// Loads the config with overrides applied. Returns the file text too, for the
/// manifest hash.
fn load_config(common: &Common, fallback: Option<Scenario>) -> CliResult<(ExperimentConfig, String)> {
    let overrides = ConfigOverrides {
        scenario: common.scenario.as_deref().map(parse_scenario).transpose()?,
        seed: common.seed,
        fallback_scenario: fallback,
    };
    let text = match &common.config {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| Failure::new("io", format!("cannot read config {}: {e}", path.display())))?,
        None => String::new(),
    };
    Ok((parse_config_str(&text, &overrides)?, text))
}

fn read_observations(path: &Path) -> CliResult<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::new("io", format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).peekable();
    let mut column = None;
    if let Some((_, first)) = lines.peek() {
        if first.trim().parse::<f64>().is_err() {
            let pos = first.split(',').position(|h| h.trim() == "x").ok_or_else(|| {
                Failure::new("csv", format!("{}:1: header has no `x` column", path.display()))
            })?;
            column = Some(pos);
            lines.next();
        }
    }
    let mut x = Vec::new();
    for (i, line) in lines {
        let cell = match column {
            Some(c) => line.split(',').nth(c).unwrap_or(""),
            None => line,
        };
        let v: f64 = cell
            .trim()
            .parse()
            .map_err(|_| Failure::new("csv", format!("{}:{}: cannot parse `{}`", path.display(), i + 1, cell.trim())))?;
        if !v.is_finite() {
            return Err(Failure::new("csv", format!("{}:{}: non-finite observation", path.display(), i + 1)));
        }
        x.push(v);
    }
    if x.len() < 2 {
        return Err(Failure::new("domain", "need at least 2 observations"));
    }
    Ok(x)
}

fn write_output(dir: &Path, name: &str, text: &str) -> CliResult<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, text)?;
    Ok(path)
}

fn estimate(common: &Common, input: &Path, method: Method) -> CliResult<Vec<PathBuf>> {
    let (cfg, _) = load_config(common, Some(Scenario::MseEb))?;
    let x = read_observations(input)?;
    let spec = cfg.prior.build()?;
    let mut out = String::from("index,x,method,tau,mean,variance,weight\n");
    if matches!(method, Method::Eb | Method::Both) {
        let tau = estimate_tau(&x, &cfg.eb)?;
        let moments = moments_at_tau(&x, tau, &spec, &cfg.quadrature)?;
        let mean = eb_estimate(&x, &spec, &cfg.eb, &cfg.quadrature)?;
        for (i, (m, xi)) in moments.iter().zip(&x).enumerate() {
            let _ = writeln!(
                out,
                "{i},{xi:.16e},eb,{tau:.16e},{:.16e},{:.16e},{:.16e}",
                mean[i],
                m.posterior_var(*xi),
                m.w
            );
        }
    }
    if matches!(method, Method::Fb | Method::Both) {
        let prior = cfg.tau_prior_for(x.len())?;
        let fb = FullBayes::for_data(&x, prior, &spec, &cfg.quadrature, &cfg.fb)?;
        let fit = fb.fit(&x)?;
        let tau = fit.posterior.mean();
        for (i, xi) in x.iter().enumerate() {
            let _ = writeln!(
                out,
                "{i},{xi:.16e},fb,{tau:.16e},{:.16e},{:.16e},{:.16e}",
                fit.mean[i], fit.variance[i], fit.weight[i]
            );
        }
    }
    Ok(vec![write_output(&common.out, "estimates.csv", &out)?])
}

fn test(common: &Common, input: &Path, rule: Rule, tau: Option<f64>) -> CliResult<Vec<PathBuf>> {
    let (cfg, _) = load_config(common, Some(Scenario::Abos))?;
    let x = read_observations(input)?;
    let spec = cfg.prior.build()?;
    let decisions: DecisionSet = match rule {
        Rule::Eb => rule_eb(&x, &spec, &cfg.eb, &cfg.quadrature)?,
        Rule::Fb => {
            let prior = cfg.tau_prior_for(x.len())?;
            rule_fb(&x, &FullBayes::for_data(&x, prior, &spec, &cfg.quadrature, &cfg.fb)?)?
        }
        Rule::FixedTau => {
            let tau = tau.ok_or_else(|| Failure::new("usage", "--rule fixed-tau needs --tau"))?;
            rule_fixed_tau(&x, tau, &spec, &cfg.quadrature)?
        }
        Rule::Oracle => {
            let models = cfg.models(x.len())?;
            let model = models
                .first()
                .ok_or_else(|| Failure::new("config", "testing section defines no two-groups model"))?;
            if models.len() > 1 {
                log::warn!("testing section defines {} models; using the first", models.len());
            }
            bayes_oracle(&x, model)?
        }
    };
    let rule_name = serde_json::to_value(decisions.rule)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default();
    let mut out = String::from("index,x,rule,rejected\n");
    for (i, (xi, r)) in x.iter().zip(&decisions.rejections).enumerate() {
        let _ = writeln!(out, "{i},{xi:.16e},{rule_name},{}", u8::from(*r));
    }
    log::info!("{} of {} hypotheses rejected", decisions.rejected(), decisions.len());
    Ok(vec![write_output(&common.out, "decisions.csv", &out)?])
}

fn simulate(common: &Common) -> CliResult<Vec<PathBuf>> {
    let (cfg, text) = load_config(common, None)?;
    let start = Instant::now();
    let mut report = run_experiment(&cfg)?;
    report.runtimes.push(Runtime {
        label: "total".into(),
        seconds: start.elapsed().as_secs_f64(),
    });
    std::fs::create_dir_all(&common.out)?;
    let csv = common.out.join("report.csv");
    write_risk_csv(&report, &csv)?;
    let manifest_path = common.out.join("manifest.json");
    RunManifest::new(&text, cfg.seed, vec![csv.clone()], report.runtimes)?.write(&manifest_path)?;
    Ok(vec![csv, manifest_path])
}

fn verify(common: &Common) -> CliResult<Vec<PathBuf>> {
    let quad = match &common.config {
        Some(_) => load_config(common, Some(Scenario::MseEb))?.0.quadrature,
        None => Default::default(),
    };
    let report = run_verify(&quad);
    println!("{report}");
    let mut written = Vec::new();
    if common.out != Path::new(".") {
        let text = serde_json::to_string_pretty(&report).unwrap_or_default();
        written.push(write_output(&common.out, "verify.json", &(text + "\n"))?);
    }
    if report.all_passed() {
        Ok(written)
    } else {
        let mut f = Failure::new("verify", "property suite failed");
        f.details = report
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{}: {}", c.name, c.detail))
            .collect();
        Err(f)
    }
}

fn plot(common: &Common, input: &Path, metrics: &[String]) -> CliResult<Vec<PathBuf>> {
    let report = read_risk_csv(input)?;
    Ok(write_plots(&report, metrics, &common.out)?)
}

fn run(cli: Cli) -> CliResult<Vec<PathBuf>> {
    if let Some(threads) = cli.common.threads {
        if threads == 0 {
            return Err(Failure::new("usage", "--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure::new("usage", e.to_string()))?;
    }
    let c = &cli.common;
    match &cli.command {
        Command::Estimate { input, method } => estimate(c, input, *method),
        Command::Test { input, rule, tau } => test(c, input, *rule, *tau),
        Command::Simulate => simulate(c),
        Command::Verify => verify(c),
        Command::Plot { input, metric } => plot(c, input, metric),
    }
}

fn fail(f: Failure) -> ExitCode {
    let body = json!({ "error": { "kind": f.kind, "message": f.message, "details": f.details } });
    eprintln!("{body}");
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.kind().to_string();
            let mut f = Failure::new("usage", message);
            f.details = vec![e.to_string().trim().to_string()];
            return fail(f);
        }
    };
    match run(cli) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(f) => fail(f),
    }
}
