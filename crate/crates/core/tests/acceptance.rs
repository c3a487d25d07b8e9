//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Runs without the libtest harness so every criterion reports even when an
//! earlier one fails. Expect several minutes in an optimized test build.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use glshrink::experiments::{run_experiment, stream_rng, ExperimentConfig, RiskReport, Scenario};
use glshrink::fb::{check_c2, C2Params, TauPrior};
use glshrink::kernel::{kappa_moments, lemma1_upper_bound};
use glshrink::testing::type1_bound_thm6;
use glshrink::{validate_spec, PriorSpec, QuadratureConfig, ValidationGrid};
use rand::Rng;
use rayon::prelude::*;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

// ---- independent brute-force oracle ------------------------------------

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

struct Brute {
    m1: f64,
    m2: f64,
    w: f64,
    mean: f64,
    var: f64,
}

/// Posterior moments of κ for the three-parameter beta family
/// (`L(t) = (t/(1+t))^(a+b)`; b = a = 1/2 is the horseshoe) by a 10⁶-cell
/// midpoint sum in y = logit κ over [-200, 200], accumulated with
/// log-sum-exp. κ-form log density:
/// (a - 1/2) ln κ - (a + 1) ln(1-κ) + ln L(t) - κ x²/2, t = (1/κ - 1)/τ²,
/// plus the Jacobian ln κ + ln(1-κ).
fn brute_force(a: f64, b: f64, x: f64, tau: f64) -> Brute {
    const CELLS: usize = 1_000_000;
    let (lo, hi) = (-200.0, 200.0);
    let h = (hi - lo) / CELLS as f64;
    let log_f = |y: f64| {
        let ln_k = -softplus(-y);
        let ln_1mk = -softplus(y);
        let ln_t = -y - 2.0 * tau.ln();
        let ln_l = (a + b) * -softplus(-ln_t);
        (a + 0.5) * ln_k - a * ln_1mk + ln_l - ln_k.exp() * x * x / 2.0
    };
    let peak = (0..CELLS).map(|k| log_f(lo + (k as f64 + 0.5) * h)).fold(f64::NEG_INFINITY, f64::max);
    let (mut z, mut s1, mut s2, mut sw) = (0.0, 0.0, 0.0, 0.0);
    for k in 0..CELLS {
        let y = lo + (k as f64 + 0.5) * h;
        let e = (log_f(y) - peak).exp();
        let kappa = 1.0 / (1.0 + (-y).exp());
        let one_minus = 1.0 / (1.0 + y.exp());
        z += e;
        s1 += e * kappa;
        s2 += e * kappa * kappa;
        sw += e * one_minus;
    }
    let (m1, m2, w) = (s1 / z, s2 / z, sw / z);
    // central second moment in a second pass for accuracy
    let mut sv = 0.0;
    for k in 0..CELLS {
        let y = lo + (k as f64 + 0.5) * h;
        let e = (log_f(y) - peak).exp();
        let kappa = 1.0 / (1.0 + (-y).exp());
        let d = if m1 < 0.5 { kappa - m1 } else { w - 1.0 / (1.0 + y.exp()) };
        sv += e * d * d;
    }
    let var_kappa = sv / z;
    Brute {
        m1,
        m2,
        w,
        mean: w * x,
        var: w + x * x * var_kappa,
    }
}

fn rel_err(got: f64, want: f64) -> f64 {
    if want == 0.0 {
        got.abs()
    } else {
        ((got - want) / want).abs()
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let quad = QuadratureConfig::default();
    let mut cases = Vec::new();
    for (a, b) in [(0.5, 0.5), (0.5, 0.5), (1.0, 0.5), (2.0, 0.5)] {
        for tau in [1e-3, 1e-2, 1e-1, 1.0] {
            for x in [0.0, 1.0, 3.0, 6.0, 10.0] {
                cases.push((a, b, tau, x));
            }
        }
    }
    // the first block is evaluated with the horseshoe spec, the rest with TPB
    let results: Vec<(f64, String)> = cases
        .par_iter()
        .enumerate()
        .map(|(k, &(a, b, tau, x))| {
            let spec = if k < 20 {
                PriorSpec::horseshoe()
            } else {
                PriorSpec::three_parameter_beta(a, b).unwrap()
            };
            let m = kappa_moments(x, tau, &spec, &quad).unwrap();
            let o = brute_force(a, b, x, tau);
            let worst = [
                rel_err(m.m1, o.m1),
                rel_err(m.m2, o.m2),
                rel_err(m.w, o.w),
                rel_err(m.posterior_mean(x), o.mean),
                rel_err(m.posterior_var(x), o.var),
            ]
            .into_iter()
            .fold(0.0, f64::max);
            (worst, format!("{} x={x} tau={tau}", spec.name()))
        })
        .collect();
    let (worst, at) = results.iter().max_by(|p, q| p.0.total_cmp(&q.0)).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    outcome(
        *worst < 1e-6 && elapsed < 120.0,
        format!(
            "{} cases, max relative error {worst:.2e} at {at} (limit 1e-6); {elapsed:.0} s (budget 120 s)",
            results.len()
        ),
    )
}

fn criterion_2() -> Outcome {
    let quad = QuadratureConfig::default();
    let taus: Vec<f64> = (0..50).map(|k| 10f64.powf(-3.0 + 3.0 * k as f64 / 49.0)).collect();
    let specs = [
        PriorSpec::horseshoe(),
        PriorSpec::three_parameter_beta(1.0, 0.5).unwrap(),
        PriorSpec::three_parameter_beta(2.0, 0.5).unwrap(),
    ];
    let mut violations = Vec::new();
    let mut checked = 0;
    for spec in &specs {
        for x in [0.0, 1.0, 3.0, 6.0, 10.0] {
            let ms: Vec<_> = taus.iter().map(|&t| kappa_moments(x, t, spec, &quad).unwrap()).collect();
            for (k, p) in ms.windows(2).enumerate() {
                checked += 3;
                let gap = |m: &glshrink::kernel::KappaMoments| (m.posterior_mean(x) - x).abs();
                if p[1].w < p[0].w - 1e-10 {
                    violations.push(format!("w at {} x={x} tau={:.3e}", spec.name(), taus[k]));
                }
                if p[1].m2 > p[0].m2 + 1e-10 {
                    violations.push(format!("E k^2 at {} x={x} tau={:.3e}", spec.name(), taus[k]));
                }
                if gap(&p[1]) > gap(&p[0]) + 1e-10 {
                    violations.push(format!("|T-x| at {} x={x} tau={:.3e}", spec.name(), taus[k]));
                }
            }
        }
    }
    outcome(
        violations.is_empty(),
        format!("{checked} adjacent comparisons on 50-point tau grids, {} violations {violations:?}", violations.len()),
    )
}

fn criterion_3() -> Outcome {
    let quad = QuadratureConfig::default();
    let mut points = Vec::new();
    for a in [1.0, 2.0] {
        for tau in [1e-2, 1e-3, 1e-4] {
            for x in [0.0, 1.0, 2.0, 3.0] {
                points.push((a, tau, x));
            }
        }
    }
    // plus random points across the same ranges
    let mut rng = stream_rng(2024);
    for _ in 0..40 {
        let a = if rng.random::<bool>() { 1.0 } else { 2.0 };
        points.push((a, 10f64.powf(rng.random_range(-4.0..-2.0)), rng.random_range(0.0..3.0)));
    }
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for &(a, tau, x) in &points {
        let spec = PriorSpec::three_parameter_beta(a, 1.0).unwrap();
        let w = kappa_moments(x, tau, &spec, &quad).unwrap().w;
        let bound = lemma1_upper_bound(x, tau, &spec, &quad).unwrap();
        worst = worst.max(w / bound);
        if w > 1.1 * bound {
            failures.push(format!("a={a} tau={tau:.2e} x={x:.3}"));
        }
    }
    outcome(
        failures.is_empty(),
        format!("{} points, max w / bound = {worst:.4} (limit 1.1) {failures:?}", points.len()),
    )
}

fn medians(report: &RiskReport, metric: &str, ns: &[usize]) -> Vec<f64> {
    ns.iter().map(|&n| report.value(metric, n).unwrap()).collect()
}

fn window(values: &[f64], lo: f64, hi: f64) -> bool {
    let (min, max) = values.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    values.iter().all(|&v| v >= lo && v <= hi) && max / min < 2.0
}

fn rate_criterion(scenario: Scenario, budget_s: Option<f64>) -> (Outcome, RiskReport) {
    let start = Instant::now();
    let cfg = ExperimentConfig::new(scenario);
    let report = run_experiment(&cfg).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let mse = medians(&report, "median_mse_ratio", &cfg.n);
    let var = medians(&report, "median_variance_ratio", &cfg.n);
    let ok = window(&mse, 0.05, 3.0) && window(&var, 0.02, 3.0) && budget_s.is_none_or(|b| elapsed < b);
    let mut detail = format!(
        "n = {:?}: median MSE ratio {mse:.3?} in [0.05, 3], variance ratio {var:.3?} in [0.02, 3], each within a factor 2; {elapsed:.0} s",
        cfg.n
    );
    if let Some(b) = budget_s {
        detail += &format!(" (budget {b:.0} s)");
    }
    (outcome(ok, detail), report)
}

fn criterion_4() -> Outcome {
    rate_criterion(Scenario::MseEb, Some(600.0)).0
}

fn criterion_5() -> Outcome {
    let (mut out, report) = rate_criterion(Scenario::MseFb, None);
    let dist = report.values("fb_eb_distance", None);
    let eb = report.values("mse_eb", None);
    let exceed = dist.iter().zip(&eb).filter(|(d, e)| d > e).count();
    if exceed > 0 {
        println!("  warning: ||FB - EB||^2 exceeded ||EB - truth||^2 in {exceed} of {} replicates", dist.len());
    }
    out.detail += &format!("; ||FB - EB||^2 <= ||EB - truth||^2 in {}/{} replicates", dist.len() - exceed, dist.len());
    out
}

fn criterion_6() -> Outcome {
    let mut cfg = ExperimentConfig::new(Scenario::Contraction);
    cfg.n = vec![2000];
    cfg.radius_multipliers = vec![20.0];
    cfg.draws = 1000;
    let report = run_experiment(&cfg).unwrap();
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for post in ["eb", "fb"] {
        for center in ["truth", "estimate"] {
            let v = report.values(&format!("{post}_mass_outside_{center}[M=20]"), Some(2000));
            assert_eq!(v.len(), cfg.replicates);
            let max = v.iter().copied().fold(0.0, f64::max);
            worst = worst.max(max);
            parts.push(format!("{post}/{center} {max:.3}"));
        }
    }
    outcome(
        worst < 0.05,
        format!(
            "n = 2000, {} replicates x {} draws, largest mass outside 20 q_n log n: {} (limit 0.05)",
            cfg.replicates,
            cfg.draws,
            parts.join(", ")
        ),
    )
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let mut cfg = ExperimentConfig::new(Scenario::OracleCheck);
    cfg.n = vec![10_000];
    cfg.testing.p = vec![0.01];
    cfg.testing.c = vec![4.0];
    cfg.replicates = 100;
    let report = run_experiment(&cfg).unwrap();
    let risk = report.value("oracle_risk_hat", 10_000).unwrap();
    let formula = report.value("oracle_risk_formula", 10_000).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let rel = (risk / formula - 1.0).abs();
    outcome(
        rel <= 0.15 && elapsed < 300.0,
        format!("risk_hat {risk:.2} vs n p (2 Phi(sqrt C) - 1) = {formula:.2}: off by {:.1}% (limit 15%); {elapsed:.1} s", 100.0 * rel),
    )
}

fn criterion_8() -> Outcome {
    let mut cfg = ExperimentConfig::new(Scenario::Type1);
    cfg.n = vec![10_000];
    cfg.replicates = 100;
    let report = run_experiment(&cfg).unwrap();
    let t1 = report.value("t1_hat", 10_000).unwrap();
    let alpha = report.value("alpha_n", 10_000).unwrap();
    let bound = type1_bound_thm6(alpha, 0.5).unwrap();
    outcome(
        t1 <= 3.0 * bound,
        format!("per-test type-I rate {t1:.3e} <= 3 x {bound:.3e} (alpha_n = {alpha:.4e}, 100 replicates)"),
    )
}

fn criterion_9() -> Outcome {
    let mut cfg = ExperimentConfig::new(Scenario::Abos);
    cfg.n = vec![10_000];
    cfg.testing.p = vec![0.01, 0.02];
    cfg.testing.c = vec![4.0];
    cfg.replicates = 100;
    let report = run_experiment(&cfg).unwrap();
    let ratios = report.values("risk_ratio", None);
    let ses = report.values("risk_ratio_se", None);
    assert_eq!(ratios.len(), 2);
    let ok = ratios.iter().zip(&ses).all(|(r, se)| *r >= 1.0 - 2.0 * se && *r <= 2.0);
    let parts: Vec<String> = cfg
        .testing
        .p
        .iter()
        .zip(ratios.iter().zip(&ses))
        .map(|(p, (r, se))| format!("p = {p}: {r:.3} (SE {se:.3})"))
        .collect();
    outcome(ok, format!("risk(FB) / risk(oracle) in [1 - 2 SE, 2]: {}", parts.join(", ")))
}

fn criterion_10() -> Outcome {
    let specs = [
        PriorSpec::horseshoe(),
        PriorSpec::three_parameter_beta(0.5, 0.5).unwrap(),
        PriorSpec::three_parameter_beta(1.0, 1.0).unwrap(),
        PriorSpec::three_parameter_beta(2.0, 0.5).unwrap(),
        PriorSpec::generalized_double_pareto(1.0, 1.0).unwrap(),
        PriorSpec::generalized_double_pareto(3.0, 1.0).unwrap(),
    ];
    let failed: Vec<String> = specs
        .iter()
        .filter_map(|s| validate_spec(s, &ValidationGrid::default()).err().map(|e| format!("{}: {e}", s.name())))
        .collect();
    let c2 = check_c2(&TauPrior::uniform(1e-3, 1.0).unwrap(), &C2Params::new(100, 1000)).unwrap();
    let lhs_ok = (c2.lhs - 0.0423).abs() <= 0.01 * 0.0423 && c2.lhs >= (-50f64).exp() && c2.satisfied;
    outcome(
        failed.is_empty() && lhs_ok,
        format!(
            "{} shipped specs validated {failed:?}; mass condition lhs = {:.5} (0.0423 within 1%) >= e^-50",
            specs.len(),
            c2.lhs
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("quadrature matches brute-force oracle", criterion_1),
        ("monotonicity in tau", criterion_2),
        ("small-tau weight bound", criterion_3),
        ("EB desk-scale rates", criterion_4),
        ("FB desk-scale rates", criterion_5),
        ("contraction proxy", criterion_6),
        ("oracle risk formula", criterion_7),
        ("type-I envelope", criterion_8),
        ("full-Bayes vs oracle risk ratio", criterion_9),
        ("built-in prior validation and tau-prior mass condition", criterion_10),
    ];
    let only: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failures = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        if only.is_some_and(|o| o != k + 1) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !result.passed {
            failures += 1;
        }
        println!(
            "criterion {:>2} {} {name}: {} [{:.1} s]",
            k + 1,
            if result.passed { "PASS" } else { "FAIL" },
            result.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
