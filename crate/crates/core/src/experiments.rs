//! Data generators, seeding, and the end-to-end experiment drivers.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use std::time::Instant;

use crate::eb::{estimate_tau, exceedance_fraction, moments_at_tau, EbConfig};
use crate::error::{Error, Result};
use crate::fb::{alpha_n, FbConfig, FullBayes, TauPrior, TauPriorChoice};
use crate::kernel::KappaGrid;
use crate::prior::{PriorChoice, PriorSpec};
use crate::quadrature::QuadratureConfig;
use crate::special::{median, pairwise_sum};
use crate::testing::{
    bayes_oracle, mc_bayes_risk, oracle_optimal_risk, rule_fb, type1_bound_thm6, type2_bound_thm7, RiskEstimate,
    TestingBoundParams, TwoGroupsModel,
};

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the stream for one `(n, replicate)` cell under a root seed.
pub fn derive_seed(root: u64, n: u64, replicate: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(root) ^ n) ^ replicate)
}

pub fn stream_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Magnitude of the nonzero means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignalRule {
    Fixed(f64),
    /// `multiple · √(2 log n)`
    UniversalMultiple(f64),
}

impl Default for SignalRule {
    fn default() -> Self {
        SignalRule::UniversalMultiple(5.0)
    }
}

impl SignalRule {
    pub fn value(&self, n: usize) -> f64 {
        match *self {
            SignalRule::Fixed(v) => v,
            SignalRule::UniversalMultiple(m) => m * (2.0 * (n as f64).ln()).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector {
    pub theta0: Vec<f64>,
    pub q_n: usize,
    /// Set when `q_n = ⌈n^β⌉`.
    pub beta: Option<f64>,
}

/// `⌈n^β⌉`
pub fn support_size(n: usize, beta: f64) -> usize {
    (n as f64).powf(beta).ceil() as usize
}

/// `q_n` coordinates chosen uniformly at random set to the signal value,
/// the rest zero.
pub fn gen_nearly_black<R: Rng + ?Sized>(
    n: usize,
    q_n: usize,
    signal: SignalRule,
    rng: &mut R,
) -> Result<SparseVector> {
    if q_n > n {
        return Err(Error::domain(format!("q_n = {q_n} exceeds n = {n}")));
    }
    let value = signal.value(n);
    let mut theta0 = vec![0.0; n];
    for i in sample(rng, n, q_n) {
        theta0[i] = value;
    }
    Ok(SparseVector {
        theta0,
        q_n,
        beta: None,
    })
}

/// `ν_i ~ Bernoulli(p)`, `θ_i ~ N(0, ψ²)` where `ν_i = 1` and 0 otherwise.
pub fn gen_two_groups<R: Rng + ?Sized>(model: &TwoGroupsModel, rng: &mut R) -> (Vec<f64>, Vec<bool>) {
    gen_mixture(model.n(), model.p(), model.psi2(), rng)
}

/// The same mixture without the sparsity requirements of
/// [`TwoGroupsModel`], so `p` may be 0 or 1.
pub fn gen_mixture<R: Rng + ?Sized>(n: usize, p: f64, psi2: f64, rng: &mut R) -> (Vec<f64>, Vec<bool>) {
    let psi = psi2.sqrt();
    let mut theta = Vec::with_capacity(n);
    let mut nu = Vec::with_capacity(n);
    for _ in 0..n {
        let signal = rng.random::<f64>() < p;
        let z: f64 = rng.sample(StandardNormal);
        theta.push(if signal { psi * z } else { 0.0 });
        nu.push(signal);
    }
    (theta, nu)
}

/// `X = θ + ε` with standard normal noise.
pub fn observe<R: Rng + ?Sized>(theta: &[f64], rng: &mut R) -> Vec<f64> {
    theta
        .iter()
        .map(|&t| t + rng.sample::<f64, _>(StandardNormal))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    MseEb,
    MseFb,
    VarianceEb,
    VarianceFb,
    Contraction,
    Abos,
    Type1,
    OracleCheck,
}

impl Scenario {
    pub const ALL: [Scenario; 8] = [
        Scenario::MseEb,
        Scenario::MseFb,
        Scenario::VarianceEb,
        Scenario::VarianceFb,
        Scenario::Contraction,
        Scenario::Abos,
        Scenario::Type1,
        Scenario::OracleCheck,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::MseEb => "mse_eb",
            Scenario::MseFb => "mse_fb",
            Scenario::VarianceEb => "variance_eb",
            Scenario::VarianceFb => "variance_fb",
            Scenario::Contraction => "contraction",
            Scenario::Abos => "abos",
            Scenario::Type1 => "type1",
            Scenario::OracleCheck => "oracle_check",
        }
    }

    pub fn parse(name: &str) -> Option<Scenario> {
        Scenario::ALL.into_iter().find(|s| s.name() == name)
    }

    /// Testing scenarios draw from the two-groups model; the others from a
    /// nearly black truth.
    pub fn is_testing(&self) -> bool {
        matches!(self, Scenario::Abos | Scenario::Type1 | Scenario::OracleCheck)
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Two-groups settings for the testing scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TestingConfig {
    /// Signal proportions; ignored when `eps` is set.
    pub p: Vec<f64>,
    /// Sparsity exponents, `p = n^(-eps)`.
    pub eps: Option<Vec<f64>>,
    /// Targets for `log v / u`, each solved for `ψ²`.
    pub c: Vec<f64>,
    /// Fixes `ψ²` directly instead of solving from `c`.
    pub psi2: Option<f64>,
    /// Upper end of the testing prior's support; defaults to the `α_n`
    /// schedule.
    pub alpha: Option<f64>,
    pub bound_eta: f64,
    pub bound_delta: f64,
    pub bound_rho: f64,
}

impl Default for TestingConfig {
    fn default() -> Self {
        TestingConfig {
            p: vec![0.01, 0.02],
            eps: None,
            c: vec![2.0, 4.0],
            psi2: None,
            alpha: None,
            bound_eta: 0.5,
            bound_delta: 0.5,
            bound_rho: 8.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub n: Vec<usize>,
    /// Fixed support size; otherwise `⌈n^beta⌉`.
    pub q_n: Option<usize>,
    pub beta: f64,
    pub signal: SignalRule,
    pub replicates: usize,
    pub seed: u64,
    pub prior: PriorChoice,
    /// Prior on `τ` for the full-Bayes scenarios. Defaults to the truncated
    /// half-Cauchy on `[1/n, 1]` for estimation and the truncated uniform on
    /// `[1/n, α_n]` for testing.
    pub tau_prior: Option<TauPriorChoice>,
    pub eb: EbConfig,
    pub fb: FbConfig,
    pub quadrature: QuadratureConfig,
    pub radius_multipliers: Vec<f64>,
    pub draws: usize,
    pub testing: TestingConfig,
}

impl ExperimentConfig {
    /// Desk-scale defaults for a scenario.
    pub fn new(scenario: Scenario) -> Self {
        let testing = scenario.is_testing();
        ExperimentConfig {
            scenario,
            n: if testing { vec![10_000] } else { vec![500, 2000, 8000] },
            q_n: None,
            beta: 0.4,
            signal: SignalRule::default(),
            replicates: if testing { 100 } else { 20 },
            seed: 1,
            prior: PriorChoice::Horseshoe,
            tau_prior: None,
            eb: EbConfig::default(),
            fb: FbConfig::default(),
            quadrature: QuadratureConfig::default(),
            radius_multipliers: vec![20.0],
            draws: 1000,
            testing: TestingConfig::default(),
        }
    }

    /// Every range violation, not just the first.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.n.is_empty() {
            v.push("n: need at least one sample size".to_string());
        }
        if let Some(&bad) = self.n.iter().find(|&&n| n < 16) {
            v.push(format!("n: every sample size must be at least 16, got {bad}"));
        }
        if let Some(q) = self.q_n {
            if let Some(&n) = self.n.iter().find(|&&n| q > n) {
                v.push(format!("q_n: {q} exceeds n = {n}"));
            }
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            v.push(format!("beta: must lie in (0, 1), got {}", self.beta));
        }
        if self.replicates == 0 {
            v.push("replicates: must be at least 1".to_string());
        }
        match self.signal {
            SignalRule::Fixed(s) if !s.is_finite() => v.push("signal: must be finite".to_string()),
            SignalRule::UniversalMultiple(m) if !(m >= 0.0 && m.is_finite()) => {
                v.push("signal: multiple must be finite and non-negative".to_string())
            }
            _ => {}
        }
        if let Err(e) = self.prior.build() {
            v.push(format!("prior: {e}"));
        }
        if let Err(e) = self.eb.validate() {
            v.push(format!("eb: {e}"));
        }
        if let Err(e) = self.fb.validate() {
            v.push(format!("fb: {e}"));
        }
        if let Err(e) = self.quadrature.validate() {
            v.push(format!("quadrature: {e}"));
        }
        if let Some(tp) = &self.tau_prior {
            for &n in &self.n {
                if let Err(e) = tp.build(n, self.default_tau_hi(n).unwrap_or(1.0)) {
                    v.push(format!("tau_prior: {e} (n = {n})"));
                    break;
                }
            }
        }
        if self.radius_multipliers.iter().any(|m| !(*m >= 0.0)) {
            v.push("radius_multipliers: must be non-negative".to_string());
        }
        if self.draws < 1000 {
            v.push(format!("draws: must be at least 1000, got {}", self.draws));
        }
        let t = &self.testing;
        if t.eps.is_none() && t.p.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
            v.push("testing.p: every value must lie in (0, 1)".to_string());
        }
        if let Some(eps) = &t.eps {
            if eps.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
                v.push("testing.eps: every value must lie in (0, 1]".to_string());
            }
        }
        if t.psi2.is_none() && t.c.iter().any(|c| !(*c > 0.0)) {
            v.push("testing.c: every value must be positive".to_string());
        }
        if let Some(psi2) = t.psi2 {
            if !(psi2 > 0.0) {
                v.push("testing.psi2: must be positive".to_string());
            }
        }
        if let Some(alpha) = t.alpha {
            if !(alpha > 0.0 && alpha < 1.0) {
                v.push("testing.alpha: must lie in (0, 1)".to_string());
            }
        }
        if let Err(e) = TestingBoundParams::new(t.bound_eta, t.bound_delta, t.bound_rho) {
            v.push(format!("testing.bound_*: {e}"));
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }

    fn default_tau_hi(&self, n: usize) -> Result<f64> {
        if self.scenario.is_testing() {
            match self.testing.alpha {
                Some(a) => Ok(a),
                None => alpha_n(n),
            }
        } else {
            Ok(1.0)
        }
    }

    pub fn q_n(&self, n: usize) -> usize {
        self.q_n.unwrap_or_else(|| support_size(n, self.beta))
    }

    pub fn tau_prior_for(&self, n: usize) -> Result<TauPrior> {
        let hi = self.default_tau_hi(n)?;
        let choice = self.tau_prior.clone().unwrap_or(if self.scenario.is_testing() {
            TauPriorChoice::TruncatedUniform { lo: None, hi: None }
        } else {
            TauPriorChoice::TruncatedHalfCauchy { lo: None, hi: None }
        });
        choice.build(n, hi)
    }

    /// The two-groups models of a testing scenario at one `n`.
    pub fn models(&self, n: usize) -> Result<Vec<TwoGroupsModel>> {
        let t = &self.testing;
        let mut out = Vec::new();
        let sparsities: Vec<(f64, Option<f64>)> = match &t.eps {
            Some(eps) => eps.iter().map(|&e| ((n as f64).powf(-e), Some(e))).collect(),
            None => t.p.iter().map(|&p| (p, None)).collect(),
        };
        for (p, eps) in sparsities {
            if let Some(psi2) = t.psi2 {
                out.push(TwoGroupsModel::new(n, p, psi2)?);
                continue;
            }
            for &c in &t.c {
                out.push(match eps {
                    Some(e) => TwoGroupsModel::assumption2(n, e, c)?,
                    None => TwoGroupsModel::with_signal_constant(n, p, c)?,
                });
            }
        }
        Ok(out)
    }
}

/// One line of the long-format report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub scenario: String,
    pub n: usize,
    pub q_n: Option<usize>,
    pub p: Option<f64>,
    pub psi2: Option<f64>,
    #[serde(rename = "C")]
    pub c: Option<f64>,
    /// `None` for rows that aggregate over replicates.
    pub replicate: Option<usize>,
    pub seed: u64,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Runtime {
    pub label: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RiskReport {
    pub rows: Vec<ReportRow>,
    /// Wall-clock timings; kept out of the data file so reruns compare equal.
    pub runtimes: Vec<Runtime>,
}

impl RiskReport {
    /// Values of `metric`, optionally restricted to one `n`, in row order.
    pub fn values(&self, metric: &str, n: Option<usize>) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.metric == metric && n.is_none_or(|n| r.n == n))
            .map(|r| r.value)
            .collect()
    }

    pub fn value(&self, metric: &str, n: usize) -> Option<f64> {
        self.values(metric, Some(n)).first().copied()
    }

    pub fn extend(&mut self, other: RiskReport) {
        self.rows.extend(other.rows);
        self.runtimes.extend(other.runtimes);
    }
}

/// Row builder sharing the key columns of one cell.
#[derive(Clone)]
struct RowKey {
    scenario: String,
    n: usize,
    q_n: Option<usize>,
    p: Option<f64>,
    psi2: Option<f64>,
    c: Option<f64>,
}

impl RowKey {
    fn nearly_black(scenario: Scenario, n: usize, q_n: usize) -> Self {
        RowKey {
            scenario: scenario.name().to_string(),
            n,
            q_n: Some(q_n),
            p: None,
            psi2: None,
            c: None,
        }
    }

    fn two_groups(scenario: Scenario, model: &TwoGroupsModel) -> Self {
        RowKey {
            scenario: scenario.name().to_string(),
            n: model.n(),
            q_n: None,
            p: Some(model.p()),
            psi2: Some(model.psi2()),
            c: Some(model.c()),
        }
    }

    fn row(&self, replicate: Option<usize>, seed: u64, metric: impl Into<String>, value: f64) -> ReportRow {
        ReportRow {
            scenario: self.scenario.clone(),
            n: self.n,
            q_n: self.q_n,
            p: self.p,
            psi2: self.psi2,
            c: self.c,
            replicate,
            seed,
            metric: metric.into(),
            value,
        }
    }
}

/// `2 q_n log(n/q_n)`
pub fn minimax_benchmark(n: usize, q_n: usize) -> f64 {
    if q_n == 0 {
        return 0.0;
    }
    2.0 * q_n as f64 * (n as f64 / q_n as f64).ln()
}

/// `q_n log n`
pub fn near_minimax_benchmark(n: usize, q_n: usize) -> f64 {
    q_n as f64 * (n as f64).ln()
}

fn squared_error(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).collect();
    pairwise_sum(&d)
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        f64::NAN
    }
}

struct Replicate {
    seed: u64,
    truth: SparseVector,
    x: Vec<f64>,
}

fn nearly_black_replicate(cfg: &ExperimentConfig, n: usize, r: usize) -> Result<Replicate> {
    let seed = derive_seed(cfg.seed, n as u64, r as u64);
    let mut rng = stream_rng(seed);
    let mut truth = gen_nearly_black(n, cfg.q_n(n), cfg.signal, &mut rng)?;
    if cfg.q_n.is_none() {
        truth.beta = Some(cfg.beta);
    }
    let x = observe(&truth.theta0, &mut rng);
    Ok(Replicate { seed, truth, x })
}

/// Squared error and total posterior variance of the EB or FB estimator
/// against `2 q_n log(n/q_n)` and `q_n log n`.
fn run_rates(cfg: &ExperimentConfig) -> Result<RiskReport> {
    let full_bayes = matches!(cfg.scenario, Scenario::MseFb | Scenario::VarianceFb);
    let spec = cfg.prior.build()?;
    let mut report = RiskReport::default();
    for &n in &cfg.n {
        let start = Instant::now();
        let q = cfg.q_n(n);
        let key = RowKey::nearly_black(cfg.scenario, n, q);
        let fb = if full_bayes {
            Some(FullBayes::new(cfg.tau_prior_for(n)?, &spec, &cfg.quadrature, &cfg.fb)?)
        } else {
            None
        };
        let (bench, near) = (minimax_benchmark(n, q), near_minimax_benchmark(n, q));
        let per_rep: Vec<Vec<ReportRow>> = (0..cfg.replicates)
            .map(|r| -> Result<Vec<ReportRow>> {
                let rep = nearly_black_replicate(cfg, n, r)?;
                let tau_hat = estimate_tau(&rep.x, &cfg.eb)?;
                let eb_m = moments_at_tau(&rep.x, tau_hat, &spec, &cfg.quadrature)?;
                let eb_est: Vec<f64> = rep.x.iter().zip(&eb_m).map(|(&x, m)| m.posterior_mean(x)).collect();
                let row = |metric: &str, value: f64| key.row(Some(r), rep.seed, metric, value);
                let mut rows = vec![row("benchmark_minimax", bench), row("benchmark_near_minimax", near)];
                let eb_mse = squared_error(&eb_est, &rep.truth.theta0);
                match &fb {
                    None => {
                        let vars: Vec<f64> = rep.x.iter().zip(&eb_m).map(|(&x, m)| m.posterior_var(x)).collect();
                        let total = pairwise_sum(&vars);
                        rows.push(row("tau", tau_hat));
                        rows.push(row("mse", eb_mse));
                        rows.push(row("mse_ratio", ratio(eb_mse, bench)));
                        rows.push(row("total_variance", total));
                        rows.push(row("variance_ratio", ratio(total, near)));
                    }
                    Some(fb) => {
                        let fit = fb.fit(&rep.x)?;
                        let mse = squared_error(&fit.mean, &rep.truth.theta0);
                        let total = pairwise_sum(&fit.variance);
                        rows.push(row("tau", fit.posterior.mean()));
                        rows.push(row("mse", mse));
                        rows.push(row("mse_ratio", ratio(mse, bench)));
                        rows.push(row("total_variance", total));
                        rows.push(row("variance_ratio", ratio(total, near)));
                        rows.push(row("mse_eb", eb_mse));
                        rows.push(row("fb_eb_distance", squared_error(&fit.mean, &eb_est)));
                    }
                }
                Ok(rows)
            })
            .collect::<Result<_>>()?;
        let rows: Vec<ReportRow> = per_rep.into_iter().flatten().collect();
        let med = |metric: &str| median(&rows.iter().filter(|r| r.metric == metric).map(|r| r.value).collect::<Vec<_>>());
        let summary = [
            ("median_mse_ratio", med("mse_ratio")),
            ("median_variance_ratio", med("variance_ratio")),
        ];
        report.rows.extend(rows);
        for (metric, value) in summary {
            report.rows.push(key.row(None, cfg.seed, metric, value));
        }
        report.runtimes.push(Runtime {
            label: format!("{} n={n}", cfg.scenario),
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(report)
}

pub fn run_mse_experiment(cfg: &ExperimentConfig) -> Result<RiskReport> {
    if !matches!(cfg.scenario, Scenario::MseEb | Scenario::MseFb) {
        return Err(Error::domain(format!("{} is not an MSE scenario", cfg.scenario)));
    }
    run_rates(cfg)
}

pub fn run_variance_experiment(cfg: &ExperimentConfig) -> Result<RiskReport> {
    if !matches!(cfg.scenario, Scenario::VarianceEb | Scenario::VarianceFb) {
        return Err(Error::domain(format!("{} is not a variance scenario", cfg.scenario)));
    }
    run_rates(cfg)
}

/// `‖θ^(r) - c‖²` for each draw row and each center.
fn distances_to(draws: &[Vec<f64>], centers: &[&[f64]]) -> Vec<Vec<f64>> {
    centers
        .iter()
        .map(|c| draws.iter().map(|row| squared_error(row, c)).collect())
        .collect()
}

/// Posterior mass outside radius `M q_n log n` around the truth and around
/// the posterior mean, for both the EB and FB posteriors.
pub fn run_contraction_experiment(cfg: &ExperimentConfig) -> Result<RiskReport> {
    if cfg.scenario != Scenario::Contraction {
        return Err(Error::domain(format!("{} is not the contraction scenario", cfg.scenario)));
    }
    if cfg.radius_multipliers.is_empty() {
        return Err(Error::domain("contraction needs at least one radius multiplier"));
    }
    let spec = cfg.prior.build()?;
    let mut report = RiskReport::default();
    for &n in &cfg.n {
        let start = Instant::now();
        let q = cfg.q_n(n);
        let key = RowKey::nearly_black(cfg.scenario, n, q);
        let fb = FullBayes::new(cfg.tau_prior_for(n)?, &spec, &cfg.quadrature, &cfg.fb)?;
        let scale = near_minimax_benchmark(n, q);
        let mut rows = Vec::new();
        for r in 0..cfg.replicates {
            let rep = nearly_black_replicate(cfg, n, r)?;
            // draws use their own stream so the data match the other scenarios
            let mut rng = stream_rng(derive_seed(rep.seed, 0x5eed, r as u64));
            let tau_hat = estimate_tau(&rep.x, &cfg.eb)?;
            let eb_est = moments_at_tau(&rep.x, tau_hat, &spec, &cfg.quadrature)?
                .iter()
                .zip(&rep.x)
                .map(|(m, &x)| m.posterior_mean(x))
                .collect::<Vec<_>>();
            let eb_draws = sample_rows(&rep.x, tau_hat, &spec, &cfg.quadrature, &mut rng, cfg.draws)?;
            let fit = fb.fit(&rep.x)?;
            let fb_draws = fb.sample_theta(&rep.x, &fit.posterior, &mut rng, cfg.draws)?;
            let posteriors = [
                ("eb", distances_to(&eb_draws, &[&rep.truth.theta0, &eb_est])),
                ("fb", distances_to(&fb_draws, &[&rep.truth.theta0, &fit.mean])),
            ];
            for (label, dist) in &posteriors {
                for &m in &cfg.radius_multipliers {
                    let radius = m * scale;
                    for (center, d) in ["truth", "estimate"].iter().zip(dist) {
                        rows.push(key.row(
                            Some(r),
                            rep.seed,
                            format!("{label}_mass_outside_{center}[M={m}]"),
                            exceedance_fraction(d, radius),
                        ));
                    }
                }
            }
        }
        let mut metrics: Vec<String> = rows.iter().map(|r| r.metric.clone()).collect();
        metrics.sort();
        metrics.dedup();
        for metric in metrics {
            let v: Vec<f64> = rows.iter().filter(|r| r.metric == metric).map(|r| r.value).collect();
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            rows.push(key.row(None, cfg.seed, format!("mean_{metric}"), mean));
        }
        report.rows.extend(rows);
        report.runtimes.push(Runtime {
            label: format!("{} n={n}", cfg.scenario),
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(report)
}

/// Joint draws at a fixed `τ`, `draws × n`.
fn sample_rows<R: Rng + ?Sized>(
    x: &[f64],
    tau: f64,
    spec: &PriorSpec,
    quad: &QuadratureConfig,
    rng: &mut R,
    draws: usize,
) -> Result<Vec<Vec<f64>>> {
    let grid = KappaGrid::build(tau, spec, quad, x)?;
    let mut out = vec![vec![0.0; x.len()]; draws];
    for (i, &xi) in x.iter().enumerate() {
        let sampler = grid.sampler(xi);
        for row in out.iter_mut() {
            row[i] = sampler.draw_theta(rng);
        }
    }
    Ok(out)
}

fn risk_rows(key: &RowKey, prefix: &str, est: &RiskEstimate, root: u64) -> Vec<ReportRow> {
    let mut rows = Vec::new();
    for (r, c) in est.replicates.iter().enumerate() {
        rows.push(key.row(Some(r), c.seed, format!("{prefix}_false_positives"), c.false_positives as f64));
        rows.push(key.row(Some(r), c.seed, format!("{prefix}_false_negatives"), c.false_negatives as f64));
        rows.push(key.row(Some(r), c.seed, format!("{prefix}_misclassified"), c.misclassified() as f64));
        rows.push(key.row(Some(r), c.seed, "signals", c.signals as f64));
    }
    rows.push(key.row(None, root, format!("{prefix}_t1_hat"), est.t1_hat));
    rows.push(key.row(None, root, format!("{prefix}_t1_se"), est.t1_se));
    if let (Some(t2), Some(se)) = (est.t2_hat, est.t2_se) {
        rows.push(key.row(None, root, format!("{prefix}_t2_hat"), t2));
        rows.push(key.row(None, root, format!("{prefix}_t2_se"), se));
    }
    rows.push(key.row(None, root, format!("{prefix}_risk_hat"), est.risk_hat));
    rows.push(key.row(None, root, format!("{prefix}_risk_se"), est.risk_se));
    rows
}

/// Standard error of `mean(a)/mean(b)` for paired replicates, by the delta
/// method.
pub fn paired_ratio_se(a: &[f64], b: &[f64]) -> f64 {
    let k = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / k, b.iter().sum::<f64>() / k);
    if a.len() < 2 || mb == 0.0 {
        return f64::NAN;
    }
    let r = ma / mb;
    let resid: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - r * y).collect();
    let var = resid.iter().map(|v| v * v).sum::<f64>() / (k - 1.0);
    (var / k).sqrt() / mb
}

/// Misclassification risk of the full-Bayes rule against the Bayes oracle
/// on common data, with the theoretical envelopes.
pub fn run_abos_experiment(cfg: &ExperimentConfig) -> Result<RiskReport> {
    if cfg.scenario != Scenario::Abos {
        return Err(Error::domain(format!("{} is not the abos scenario", cfg.scenario)));
    }
    let spec = cfg.prior.build()?;
    let t = &cfg.testing;
    let mut report = RiskReport::default();
    for &n in &cfg.n {
        let prior = cfg.tau_prior_for(n)?;
        let alpha = prior.support().1;
        let fb = FullBayes::new(prior, &spec, &cfg.quadrature, &cfg.fb)?;
        for model in cfg.models(n)? {
            let start = Instant::now();
            let key = RowKey::two_groups(cfg.scenario, &model);
            let fb_risk = mc_bayes_risk(|x| rule_fb(x, &fb), &model, cfg.replicates, cfg.seed)?;
            let oracle = mc_bayes_risk(|x| bayes_oracle(x, &model), &model, cfg.replicates, cfg.seed)?;
            let mut rows = risk_rows(&key, "fb", &fb_risk, cfg.seed);
            rows.extend(risk_rows(&key, "oracle", &oracle, cfg.seed));
            let a: Vec<f64> = fb_risk.replicates.iter().map(|c| c.misclassified() as f64).collect();
            let b: Vec<f64> = oracle.replicates.iter().map(|c| c.misclassified() as f64).collect();
            let agg = |metric: &str, value: f64| key.row(None, cfg.seed, metric, value);
            rows.push(agg("risk_ratio", ratio(fb_risk.risk_hat, oracle.risk_hat)));
            rows.push(agg("risk_ratio_se", paired_ratio_se(&a, &b)));
            rows.push(agg("oracle_risk_formula", oracle_optimal_risk(n, model.p(), model.c())?));
            rows.push(agg("alpha_n", alpha));
            rows.push(agg("eps", model.eps()));
            rows.push(agg("type1_bound", type1_bound_thm6(alpha, spec.a().min(0.999_999))?));
            rows.push(agg("type2_bound", type2_bound_thm7(spec.a(), t.bound_rho, model.c(), model.eps())?));
            report.rows.extend(rows);
            report.runtimes.push(Runtime {
                label: format!("abos n={n} p={} C={}", model.p(), model.c()),
                seconds: start.elapsed().as_secs_f64(),
            });
        }
    }
    Ok(report)
}

/// Per-test type-I rate of the full-Bayes rule on all-null data.
pub fn run_type1_experiment(cfg: &ExperimentConfig) -> Result<RiskReport> {
    if cfg.scenario != Scenario::Type1 {
        return Err(Error::domain(format!("{} is not the type1 scenario", cfg.scenario)));
    }
    let spec = cfg.prior.build()?;
    let mut report = RiskReport::default();
    for &n in &cfg.n {
        let start = Instant::now();
        let prior = cfg.tau_prior_for(n)?;
        let alpha = prior.support().1;
        let fb = FullBayes::new(prior, &spec, &cfg.quadrature, &cfg.fb)?;
        let key = RowKey {
            scenario: cfg.scenario.name().to_string(),
            n,
            q_n: Some(0),
            p: Some(0.0),
            psi2: None,
            c: None,
        };
        let mut rates = Vec::with_capacity(cfg.replicates);
        for r in 0..cfg.replicates {
            let seed = derive_seed(cfg.seed, n as u64, r as u64);
            let mut rng = stream_rng(seed);
            let x = observe(&vec![0.0; n], &mut rng);
            let d = rule_fb(&x, &fb)?;
            let rate = d.rejected() as f64 / n as f64;
            report.rows.push(key.row(Some(r), seed, "false_positives", d.rejected() as f64));
            rates.push(rate);
        }
        let mean = rates.iter().sum::<f64>() / rates.len() as f64;
        report.rows.push(key.row(None, cfg.seed, "t1_hat", mean));
        report.rows.push(key.row(None, cfg.seed, "alpha_n", alpha));
        report.rows.push(key.row(None, cfg.seed, "type1_bound", type1_bound_thm6(alpha, spec.a().min(0.999_999))?));
        report.runtimes.push(Runtime {
            label: format!("type1 n={n}"),
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(report)
}

/// Monte Carlo risk of the Bayes oracle under its own model against the
/// asymptotic formula.
pub fn run_oracle_experiment(cfg: &ExperimentConfig) -> Result<RiskReport> {
    if cfg.scenario != Scenario::OracleCheck {
        return Err(Error::domain(format!("{} is not the oracle_check scenario", cfg.scenario)));
    }
    let mut report = RiskReport::default();
    for &n in &cfg.n {
        for model in cfg.models(n)? {
            let start = Instant::now();
            let key = RowKey::two_groups(cfg.scenario, &model);
            let est = mc_bayes_risk(|x| bayes_oracle(x, &model), &model, cfg.replicates, cfg.seed)?;
            report.rows.extend(risk_rows(&key, "oracle", &est, cfg.seed));
            let formula = oracle_optimal_risk(n, model.p(), model.c())?;
            report.rows.push(key.row(None, cfg.seed, "oracle_risk_formula", formula));
            report.rows.push(key.row(None, cfg.seed, "risk_to_formula", est.risk_hat / formula));
            report.runtimes.push(Runtime {
                label: format!("oracle n={n} p={} C={}", model.p(), model.c()),
                seconds: start.elapsed().as_secs_f64(),
            });
        }
    }
    Ok(report)
}

/// Dispatches on the configured scenario. Rows whose value is undefined
/// (a ratio against a zero benchmark, say) are dropped with a warning.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RiskReport> {
    cfg.validate()?;
    let mut report = match cfg.scenario {
        Scenario::MseEb | Scenario::MseFb => run_mse_experiment(cfg),
        Scenario::VarianceEb | Scenario::VarianceFb => run_variance_experiment(cfg),
        Scenario::Contraction => run_contraction_experiment(cfg),
        Scenario::Abos => run_abos_experiment(cfg),
        Scenario::Type1 => run_type1_experiment(cfg),
        Scenario::OracleCheck => run_oracle_experiment(cfg),
    }?;
    report.rows.retain(|r| {
        let keep = r.value.is_finite();
        if !keep {
            log::warn!("dropping undefined {} at n = {}", r.metric, r.n);
        }
        keep
    });
    Ok(report)
}
