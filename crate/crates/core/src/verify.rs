//! Quick property suite behind the `verify` subcommand.
//!
//! Each check is small enough to run in seconds even in a debug build; the
//! exhaustive versions live in the test suites.

use std::fmt;

use rand::Rng;
use serde::Serialize;

use crate::eb::{estimate_tau, EbConfig};
use crate::error::{Error, Result};
use crate::experiments::{stream_rng, ReportRow, RiskReport};
use crate::fb::{check_c2, C2Params, TauPrior};
use crate::kernel::{kappa_moments, lemma1_upper_bound, sample_theta};
use crate::prior::{validate_spec, PriorSpec, ValidationGrid};
use crate::quadrature::QuadratureConfig;
use crate::report::{read_risk_csv_from, write_risk_csv_to};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<PropertyCheck>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
        }
        let passed = self.checks.iter().filter(|c| c.passed).count();
        write!(f, "{passed}/{} checks passed", self.checks.len())
    }
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::domain(msg()))
    }
}

fn shipped_specs() -> Result<Vec<PriorSpec>> {
    Ok(vec![
        PriorSpec::horseshoe(),
        PriorSpec::three_parameter_beta(1.0, 1.0)?,
        PriorSpec::three_parameter_beta(2.0, 0.5)?,
        PriorSpec::generalized_double_pareto(1.0, 1.0)?,
    ])
}

fn builtin_specs(_: &QuadratureConfig) -> Result<String> {
    let specs = shipped_specs()?;
    for spec in &specs {
        validate_spec(spec, &ValidationGrid::default())?;
    }
    Ok(format!("{} built-in priors satisfy positivity, A1, A2 and normalization", specs.len()))
}

fn moment_identities(quad: &QuadratureConfig) -> Result<String> {
    let mut count = 0;
    for spec in [PriorSpec::horseshoe(), PriorSpec::three_parameter_beta(1.0, 1.0)?] {
        for tau in [1e-3, 1e-2, 0.1, 1.0] {
            for x in [0.0, 1.0, 3.0, 6.0, 10.0] {
                let m = kappa_moments(x, tau, &spec, quad)?;
                let neg = kappa_moments(-x, tau, &spec, quad)?;
                let var = m.posterior_var(x);
                ensure((m.m1 + m.w - 1.0).abs() <= 1e-12, || format!("m1 + w != 1 at x = {x}, tau = {tau}"))?;
                ensure(m.m1 * m.m1 <= m.m2 * (1.0 + 1e-12) && m.m2 <= m.m1, || {
                    format!("kappa moment ordering fails at x = {x}, tau = {tau}")
                })?;
                ensure(var > 0.0 && var <= 1.0 + x * x * m.m2 + 1e-12, || {
                    format!("posterior variance bound fails at x = {x}, tau = {tau}")
                })?;
                ensure((neg.m1 - m.m1).abs() <= 1e-14, || format!("moments not even in x at x = {x}"))?;
                count += 1;
            }
        }
    }
    Ok(format!("{count} (x, tau, prior) points"))
}

fn monotone_in_tau(quad: &QuadratureConfig) -> Result<String> {
    let spec = PriorSpec::horseshoe();
    let taus: Vec<f64> = (0..12).map(|k| 10f64.powf(-3.0 + 3.0 * k as f64 / 11.0)).collect();
    for x in [0.0, 1.0, 3.0, 6.0] {
        let ms = taus
            .iter()
            .map(|&t| kappa_moments(x, t, &spec, quad))
            .collect::<Result<Vec<_>>>()?;
        for (k, pair) in ms.windows(2).enumerate() {
            ensure(pair[1].w >= pair[0].w - 1e-10, || {
                format!("w decreases between tau = {} and {} at x = {x}", taus[k], taus[k + 1])
            })?;
            ensure(pair[1].m2 <= pair[0].m2 + 1e-10, || {
                format!("E(kappa^2) increases between tau = {} and {} at x = {x}", taus[k], taus[k + 1])
            })?;
        }
    }
    Ok("w non-decreasing and E(kappa^2) non-increasing on 12-point tau grids".into())
}

fn weight_bound(quad: &QuadratureConfig) -> Result<String> {
    let mut worst: f64 = 0.0;
    for a in [1.0, 2.0] {
        let spec = PriorSpec::three_parameter_beta(a, 1.0)?;
        for tau in [1e-2, 1e-3] {
            for x in [0.0, 2.0] {
                let w = kappa_moments(x, tau, &spec, quad)?.w;
                let bound = lemma1_upper_bound(x, tau, &spec, quad)?;
                worst = worst.max(w / bound);
                ensure(w <= 1.1 * bound, || format!("w = {w:e} exceeds 1.1 x {bound:e} at a = {a}, x = {x}, tau = {tau}"))?;
            }
        }
    }
    Ok(format!("largest w / bound = {worst:.3}"))
}

fn sampler_mean(quad: &QuadratureConfig) -> Result<String> {
    let spec = PriorSpec::horseshoe();
    let (x, tau, count) = (5.0, 0.1, 20_000);
    let draws = sample_theta(x, tau, &spec, quad, &mut stream_rng(11), count)?;
    let n = count as f64;
    let mean = draws.values.iter().sum::<f64>() / n;
    let var = draws.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let exact = kappa_moments(x, tau, &spec, quad)?.posterior_mean(x);
    let z = (mean - exact) / (var / n).sqrt();
    ensure(z.abs() < 4.0, || format!("sample mean {mean} vs {exact} (z = {z:.2})"))?;
    Ok(format!("z = {z:.2} over {count} draws"))
}

fn tau_hat_range(_: &QuadratureConfig) -> Result<String> {
    let mut rng = stream_rng(5);
    let cfg = EbConfig::default();
    for n in [2usize, 10, 100, 1000] {
        for _ in 0..20 {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-8.0..8.0)).collect();
            let t = estimate_tau(&x, &cfg)?;
            ensure(t >= 1.0 / n as f64 && t <= 1.0, || format!("tau hat {t} outside [1/n, 1] at n = {n}"))?;
        }
    }
    Ok("tau hat within [1/n, 1] for 80 random vectors".into())
}

fn c2_example(_: &QuadratureConfig) -> Result<String> {
    let r = check_c2(&TauPrior::uniform(1e-3, 1.0)?, &C2Params::new(100, 1000))?;
    ensure(r.satisfied && (r.lhs - 0.0423).abs() <= 0.01 * 0.0423, || {
        format!("lhs = {} (expected about 0.0423)", r.lhs)
    })?;
    Ok(format!("lhs = {:.5} >= rhs = {:.3e}", r.lhs, r.rhs))
}

fn csv_round_trip(_: &QuadratureConfig) -> Result<String> {
    let mut rng = stream_rng(3);
    let rows = (0..50)
        .map(|i| ReportRow {
            scenario: "abos".into(),
            n: 10_000,
            q_n: (i % 2 == 0).then_some(i),
            p: Some(rng.random()),
            psi2: None,
            c: Some(4.0),
            replicate: Some(i),
            seed: rng.random(),
            metric: "risk".into(),
            value: rng.random::<f64>() * 10f64.powi(rng.random_range(-300..300)),
        })
        .collect();
    let report = RiskReport { rows, runtimes: vec![] };
    let mut buf = Vec::new();
    write_risk_csv_to(&report, &mut buf)?;
    let back = read_risk_csv_from(&buf[..], "memory")?;
    ensure(back == report, || "CSV round trip changed the report".into())?;
    Ok("50 random rows survive the CSV round trip exactly".into())
}

type Check = fn(&QuadratureConfig) -> Result<String>;

const CHECKS: [(&str, Check); 8] = [
    ("built-in priors", builtin_specs),
    ("moment identities", moment_identities),
    ("monotonicity in tau", monotone_in_tau),
    ("small-tau weight bound", weight_bound),
    ("sampler mean", sampler_mean),
    ("tau hat range", tau_hat_range),
    ("tau-prior mass condition example", c2_example),
    ("CSV round trip", csv_round_trip),
];

pub fn run_verify(quad: &QuadratureConfig) -> VerifyReport {
    let checks = CHECKS
        .iter()
        .map(|(name, check)| match check(quad) {
            Ok(detail) => PropertyCheck { name, passed: true, detail },
            Err(e) => PropertyCheck { name, passed: false, detail: e.to_string() },
        })
        .collect();
    VerifyReport { checks }
}
