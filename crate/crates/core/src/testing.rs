//! One-group decision rules, the two-groups Bayes oracle, and their
//! misclassification risk.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eb::{estimate_tau, moments_at_tau, EbConfig};
use crate::error::{Error, Result};
use crate::experiments::{derive_seed, gen_two_groups, observe, stream_rng};
use crate::fb::FullBayes;
use crate::prior::PriorSpec;
use crate::quadrature::QuadratureConfig;
use crate::special::normal_cdf;

/// `(1-p) δ₀ + p N(0, ψ²)` for the means, observed with unit noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoGroupsModel {
    n: usize,
    p: f64,
    psi2: f64,
    eps: f64,
}

impl TwoGroupsModel {
    pub fn new(n: usize, p: f64, psi2: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("n must be positive"));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidParameter {
                name: "p",
                value: p,
                reason: "must lie in (0, 1)",
            });
        }
        if !(psi2 > 0.0 && psi2.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "psi2",
                value: psi2,
                reason: "must be positive and finite",
            });
        }
        let eps = if n > 1 { (-p.ln() / (n as f64).ln()).min(1.0) } else { 1.0 };
        Ok(TwoGroupsModel { n, p, psi2, eps })
    }

    /// Given `p` and the target `C = log v / u`, solves for `u = ψ²` on the
    /// branch where `(log u + 2 log f)/u` decreases.
    pub fn with_signal_constant(n: usize, p: f64, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::InvalidParameter {
                name: "C",
                value: c,
                reason: "must be positive",
            });
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidParameter {
                name: "p",
                value: p,
                reason: "must lie in (0, 1)",
            });
        }
        let ln_f2 = 2.0 * ((1.0 - p) / p).ln();
        let g = |u: f64| (u.ln() + ln_f2) / u;
        // g peaks at u = e/f²
        let mut lo = (1.0 - ln_f2).exp().max(1e-6);
        let mut hi = 1e6;
        if !(g(lo) >= c && g(hi) <= c) {
            return Err(Error::domain(format!(
                "no psi2 in [{lo:e}, {hi:e}] gives C = {c} at p = {p}"
            )));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > c {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-14 * hi {
                break;
            }
        }
        Self::new(n, p, 0.5 * (lo + hi))
    }

    /// Sparsity schedule `p = n^(-ε)` with ψ² solved from `C`.
    pub fn assumption2(n: usize, eps: f64, c: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "eps",
                value: eps,
                reason: "must lie in (0, 1]",
            });
        }
        let mut m = Self::with_signal_constant(n, (n as f64).powf(-eps), c)?;
        m.eps = eps;
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn psi2(&self) -> f64 {
        self.psi2
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// `f = (1-p)/p`
    pub fn f(&self) -> f64 {
        (1.0 - self.p) / self.p
    }

    /// `v = u f²`
    pub fn v(&self) -> f64 {
        self.psi2 * self.f() * self.f()
    }

    /// `C = log v / u`
    pub fn c(&self) -> f64 {
        self.v().ln() / self.psi2
    }

    /// Oracle threshold `c² = ((1+ψ²)/ψ²)(log(1+ψ²) + 2 log f)`.
    pub fn oracle_c2(&self) -> Result<f64> {
        let c2 = (1.0 + self.psi2) / self.psi2 * (self.psi2.ln_1p() + 2.0 * self.f().ln());
        if c2 < 0.0 {
            return Err(Error::NegativeThreshold {
                c2,
                p: self.p,
                psi2: self.psi2,
            });
        }
        Ok(c2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleTag {
    FixedTau,
    Eb,
    Fb,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionSet {
    pub rejections: Vec<bool>,
    pub rule: RuleTag,
}

impl DecisionSet {
    pub fn len(&self) -> usize {
        self.rejections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rejections.is_empty()
    }

    pub fn rejected(&self) -> usize {
        self.rejections.iter().filter(|&&r| r).count()
    }
}

/// Analysis constants of the type-II bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestingBoundParams {
    pub eta: f64,
    pub delta: f64,
    pub rho: f64,
}

impl TestingBoundParams {
    pub fn new(eta: f64, delta: f64, rho: f64) -> Result<Self> {
        if !(eta > 0.0 && eta < 1.0 && delta > 0.0 && delta < 1.0) {
            return Err(Error::domain("eta and delta must lie in (0, 1)"));
        }
        if !(rho > 2.0 / (eta * (1.0 - delta))) {
            return Err(Error::InvalidParameter {
                name: "rho",
                value: rho,
                reason: "must exceed 2/(eta (1 - delta))",
            });
        }
        Ok(TestingBoundParams { eta, delta, rho })
    }
}

/// Reject where `E(1-κ_i | X_i, τ) > 1/2`.
pub fn rule_fixed_tau(x: &[f64], tau: f64, spec: &PriorSpec, quad: &QuadratureConfig) -> Result<DecisionSet> {
    let m = moments_at_tau(x, tau, spec, quad)?;
    Ok(DecisionSet {
        rejections: m.iter().map(|mi| mi.w > 0.5).collect(),
        rule: RuleTag::FixedTau,
    })
}

/// The fixed-`τ` rule at the plug-in estimate.
pub fn rule_eb(x: &[f64], spec: &PriorSpec, eb: &EbConfig, quad: &QuadratureConfig) -> Result<DecisionSet> {
    let tau = estimate_tau(x, eb)?;
    Ok(DecisionSet {
        rule: RuleTag::Eb,
        ..rule_fixed_tau(x, tau, spec, quad)?
    })
}

/// Reject where `E(1-κ_i | X) > 1/2` with `τ` integrated out.
pub fn rule_fb(x: &[f64], fb: &FullBayes) -> Result<DecisionSet> {
    let fit = fb.fit(x)?;
    Ok(DecisionSet {
        rejections: fit.weight.iter().map(|&w| w > 0.5).collect(),
        rule: RuleTag::Fb,
    })
}

/// Reject where `X_i² > c²`.
pub fn bayes_oracle(x: &[f64], model: &TwoGroupsModel) -> Result<DecisionSet> {
    let c2 = model.oracle_c2()?;
    Ok(DecisionSet {
        rejections: x.iter().map(|v| v * v > c2).collect(),
        rule: RuleTag::Oracle,
    })
}

/// False positives and false negatives.
pub fn error_counts(decisions: &DecisionSet, nu: &[bool]) -> Result<(usize, usize)> {
    if decisions.len() != nu.len() {
        return Err(Error::LengthMismatch {
            left: decisions.len(),
            right: nu.len(),
        });
    }
    let mut fp = 0;
    let mut fneg = 0;
    for (&r, &s) in decisions.rejections.iter().zip(nu) {
        match (r, s) {
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            _ => {}
        }
    }
    Ok((fp, fneg))
}

pub fn misclassification_loss(decisions: &DecisionSet, nu: &[bool]) -> Result<usize> {
    let (fp, fneg) = error_counts(decisions, nu)?;
    Ok(fp + fneg)
}

/// `n p (2Φ(√C) - 1)`
pub fn oracle_optimal_risk(n: usize, p: f64, c: f64) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::InvalidParameter {
            name: "C",
            value: c,
            reason: "must be positive",
        });
    }
    Ok(n as f64 * p * (2.0 * normal_cdf(c.sqrt()) - 1.0))
}

/// `(1/√(πa)) α^(2a) / √(log(1/α²))`
pub fn type1_bound_thm6(alpha: f64, a: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter {
            name: "alpha",
            value: alpha,
            reason: "must lie in (0, 1)",
        });
    }
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::InvalidParameter {
            name: "a",
            value: a,
            reason: "must lie in (0, 1)",
        });
    }
    Ok((2.0 * a * alpha.ln()).exp() / (std::f64::consts::PI * a).sqrt() / (-2.0 * alpha.ln()).sqrt())
}

/// `2Φ(√(a ρ C / ε)) - 1`
pub fn type2_bound_thm7(a: f64, rho: f64, c: f64, eps: f64) -> Result<f64> {
    if !(a > 0.0 && rho > 0.0 && c >= 0.0) {
        return Err(Error::domain("a and rho must be positive and C non-negative"));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "eps",
            value: eps,
            reason: "must lie in (0, 1]",
        });
    }
    Ok(2.0 * normal_cdf((a * rho * c / eps).sqrt()) - 1.0)
}

/// Error counts of one replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ReplicateCounts {
    pub seed: u64,
    pub nulls: usize,
    pub signals: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

impl ReplicateCounts {
    pub fn misclassified(&self) -> usize {
        self.false_positives + self.false_negatives
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskEstimate {
    pub replicates: Vec<ReplicateCounts>,
    /// Mean per-replicate type-I rate over nulls.
    pub t1_hat: f64,
    pub t1_se: f64,
    /// Mean per-replicate type-II rate over replicates that had signals;
    /// `None` when none did.
    pub t2_hat: Option<f64>,
    pub t2_se: Option<f64>,
    /// Mean total misclassifications per replicate.
    pub risk_hat: f64,
    pub risk_se: f64,
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let k = v.len() as f64;
    let mean = v.iter().sum::<f64>() / k;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// Monte Carlo misclassification risk of `rule` under `model`. Replicate
/// `r` draws from the stream seeded by `derive_seed(root_seed, n, r)`.
pub fn mc_bayes_risk<F>(rule: F, model: &TwoGroupsModel, reps: usize, root_seed: u64) -> Result<RiskEstimate>
where
    F: Fn(&[f64]) -> Result<DecisionSet> + Sync,
{
    if reps == 0 {
        return Err(Error::domain("need at least one replicate"));
    }
    let replicates: Vec<ReplicateCounts> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let seed = derive_seed(root_seed, model.n() as u64, r as u64);
            let mut rng = stream_rng(seed);
            let (theta, nu) = gen_two_groups(model, &mut rng);
            let x = observe(&theta, &mut rng);
            let d = rule(&x)?;
            let (fp, fneg) = error_counts(&d, &nu)?;
            let signals = nu.iter().filter(|&&s| s).count();
            Ok(ReplicateCounts {
                seed,
                nulls: nu.len() - signals,
                signals,
                false_positives: fp,
                false_negatives: fneg,
            })
        })
        .collect::<Result<_>>()?;
    Ok(summarize(replicates))
}

pub fn summarize(replicates: Vec<ReplicateCounts>) -> RiskEstimate {
    let t1: Vec<f64> = replicates
        .iter()
        .filter(|c| c.nulls > 0)
        .map(|c| c.false_positives as f64 / c.nulls as f64)
        .collect();
    let t2: Vec<f64> = replicates
        .iter()
        .filter(|c| c.signals > 0)
        .map(|c| c.false_negatives as f64 / c.signals as f64)
        .collect();
    let risk: Vec<f64> = replicates.iter().map(|c| c.misclassified() as f64).collect();
    let (t1_hat, t1_se) = if t1.is_empty() { (0.0, 0.0) } else { mean_se(&t1) };
    let (t2_hat, t2_se) = if t2.is_empty() {
        log::warn!("no replicate contained a signal; type-II rate undefined");
        (None, None)
    } else {
        let (m, s) = mean_se(&t2);
        (Some(m), Some(s))
    };
    let (risk_hat, risk_se) = mean_se(&risk);
    RiskEstimate {
        replicates,
        t1_hat,
        t1_se,
        t2_hat,
        t2_se,
        risk_hat,
        risk_se,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::kappa_moments;
    use crate::special::normal_ln_pdf;

    #[test]
    fn oracle_threshold_examples() {
        let m = TwoGroupsModel::new(100, 0.1, 4.0).unwrap();
        let c2 = m.oracle_c2().unwrap();
        assert!((c2 - 1.25 * (5f64.ln() + 2.0 * 9f64.ln())).abs() < 1e-12);
        assert!((c2 - 7.5049).abs() < 1e-4 && (c2.sqrt() - 2.7395).abs() < 1e-4);
        let half = TwoGroupsModel::new(100, 0.5, 4.0).unwrap();
        assert!((half.oracle_c2().unwrap() - 1.25 * 5f64.ln()).abs() < 1e-12);
        let dense = TwoGroupsModel::new(100, 0.9, 0.5).unwrap();
        assert!(matches!(dense.oracle_c2(), Err(Error::NegativeThreshold { .. })));
        let d = bayes_oracle(&[0.0, 2.7, 2.75, -3.0], &m).unwrap();
        assert_eq!(d.rejections, vec![false, false, true, true]);
    }

    #[test]
    fn derived_quantities_consistent() {
        let m = TwoGroupsModel::new(1000, 0.02, 3.0).unwrap();
        assert!((m.v() - m.psi2() * m.f() * m.f()).abs() < 1e-12 * m.v());
        assert!((m.c() - m.v().ln() / m.psi2()).abs() < 1e-15);
    }

    #[test]
    fn signal_constant_solve() {
        let m = TwoGroupsModel::with_signal_constant(10_000, 0.01, 4.0).unwrap();
        assert!((m.c() - 4.0).abs() < 1e-10, "{}", m.c());
        // larger root: beyond the peak of (log u + 2 log f)/u
        assert!(m.psi2() > std::f64::consts::E / (m.f() * m.f()));
        assert!((m.psi2() - 2.5296).abs() < 1e-3, "{}", m.psi2());
        let s = TwoGroupsModel::assumption2(10_000, 0.5, 4.0).unwrap();
        assert!((s.p() - 0.01).abs() < 1e-15 && s.eps() == 0.5);
        assert!(TwoGroupsModel::with_signal_constant(100, 0.01, 1e9).is_err());
    }

    #[test]
    fn oracle_matches_posterior_odds() {
        let m = TwoGroupsModel::new(1000, 0.05, 6.0).unwrap();
        let c2 = m.oracle_c2().unwrap();
        let sd1 = (1.0 + m.psi2()).sqrt();
        for k in 0..4001 {
            let x = -10.0 + k as f64 * 0.005 + 1e-7;
            if (x * x - c2).abs() < 1e-9 {
                continue;
            }
            let ln_alt = m.p().ln() + normal_ln_pdf(x / sd1) - sd1.ln();
            let ln_null = (1.0 - m.p()).ln() + normal_ln_pdf(x);
            let post_alt = 1.0 / (1.0 + (ln_null - ln_alt).exp());
            let d = bayes_oracle(&[x], &m).unwrap();
            assert_eq!(d.rejections[0], post_alt > 0.5, "x = {x}");
        }
    }

    #[test]
    fn loss_counting() {
        let nu = vec![true, false, true, false, true];
        let same = DecisionSet {
            rejections: nu.clone(),
            rule: RuleTag::Oracle,
        };
        assert_eq!(misclassification_loss(&same, &nu).unwrap(), 0);
        let flip = DecisionSet {
            rejections: nu.iter().map(|v| !v).collect(),
            rule: RuleTag::Oracle,
        };
        assert_eq!(misclassification_loss(&flip, &nu).unwrap(), 5);
        let mixed = DecisionSet {
            rejections: vec![false, true, false, false, true],
            rule: RuleTag::Oracle,
        };
        assert_eq!(error_counts(&mixed, &nu).unwrap(), (1, 2));
        assert_eq!(misclassification_loss(&mixed, &nu).unwrap(), 3);
        assert!(misclassification_loss(&mixed, &nu[..3]).is_err());
    }

    #[test]
    fn risk_formula_examples() {
        let r = oracle_optimal_risk(1000, 0.01, 4.0).unwrap();
        assert!((r - 9.5450).abs() < 1e-4, "{r}");
        assert_eq!(oracle_optimal_risk(1000, 0.0, 4.0).unwrap(), 0.0);
        assert!((oracle_optimal_risk(1000, 0.01, 1e4).unwrap() - 10.0).abs() < 1e-12);
        assert!(oracle_optimal_risk(1000, 0.01, 0.0).is_err());
    }

    #[test]
    fn type1_bound_examples() {
        let b = type1_bound_thm6(0.01, 0.5).unwrap();
        assert!((b - 2.6291e-3).abs() < 1e-7, "{b}");
        let mut prev = 0.0;
        for k in 1..=1000 {
            let v = type1_bound_thm6(k as f64 * 1e-4, 0.5).unwrap();
            assert!(v > prev);
            prev = v;
        }
        assert!(type1_bound_thm6(1e-300, 0.5).unwrap() < 1e-150);
        assert!(type1_bound_thm6(1.0, 0.5).is_err());
    }

    #[test]
    fn type2_bound_examples() {
        let b = type2_bound_thm7(0.5, 4.0, 1.0, 1.0).unwrap();
        assert!((b - 0.84270).abs() < 1e-5, "{b}");
        assert_eq!(type2_bound_thm7(0.5, 4.0, 0.0, 1.0).unwrap(), 0.0);
        assert!(type2_bound_thm7(0.5, 5.0, 1.0, 1.0).unwrap() > b);
        assert!(TestingBoundParams::new(0.5, 0.5, 8.0).is_err());
        assert!(TestingBoundParams::new(0.5, 0.5, 8.01).is_ok());
    }

    #[test]
    fn fixed_tau_rule_examples() {
        let hs = PriorSpec::horseshoe();
        let q = QuadratureConfig::default();
        assert_eq!(rule_fixed_tau(&[0.0], 0.01, &hs, &q).unwrap().rejections, vec![false]);
        assert_eq!(rule_fixed_tau(&[10.0], 0.1, &hs, &q).unwrap().rejections, vec![true]);
        let w = kappa_moments(10.0, 0.1, &hs, &q).unwrap().w;
        assert!(w > 0.9);
    }

    #[test]
    fn fixed_tau_rule_nested_in_tau() {
        let hs = PriorSpec::horseshoe();
        let q = QuadratureConfig::default();
        let x: Vec<f64> = (0..80).map(|k| k as f64 * 0.1).collect();
        let mut prev = 0;
        for &tau in &[1e-4, 1e-3, 1e-2, 0.1, 0.5, 1.0] {
            let d = rule_fixed_tau(&x, tau, &hs, &q).unwrap();
            // rejections form an upper tail in |x| that grows with τ
            assert!(d.rejected() >= prev);
            prev = d.rejected();
        }
    }

    #[test]
    fn eb_rule_examples() {
        let hs = PriorSpec::horseshoe();
        let (eb, q) = (EbConfig::default(), QuadratureConfig::default());
        assert_eq!(rule_eb(&[0.0; 50], &hs, &eb, &q).unwrap().rejected(), 0);
        let mut x = vec![0.0; 50];
        x[7] = 25.0;
        let d = rule_eb(&x, &hs, &eb, &q).unwrap();
        assert!(d.rejections[7] && d.rejected() == 1);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_eq!(rule_eb(&neg, &hs, &eb, &q).unwrap().rejections, d.rejections);
    }

    #[test]
    fn trivial_rules_risk() {
        let m = TwoGroupsModel::new(2000, 0.1, 4.0).unwrap();
        let accept = |x: &[f64]| {
            Ok(DecisionSet {
                rejections: vec![false; x.len()],
                rule: RuleTag::FixedTau,
            })
        };
        let r = mc_bayes_risk(accept, &m, 20, 1).unwrap();
        let frac = r.risk_hat / 2000.0;
        assert!((frac - 0.1).abs() < 4.0 * r.risk_se / 2000.0 + 1e-12, "{frac}");
        assert_eq!(r.t1_hat, 0.0);
        assert_eq!(r.t2_hat, Some(1.0));
        let reject = |x: &[f64]| {
            Ok(DecisionSet {
                rejections: vec![true; x.len()],
                rule: RuleTag::FixedTau,
            })
        };
        let r = mc_bayes_risk(reject, &m, 20, 1).unwrap();
        assert!((r.risk_hat / 2000.0 - 0.9).abs() < 4.0 * r.risk_se / 2000.0);
        for c in &r.replicates {
            assert_eq!(c.nulls + c.signals, 2000);
            assert_eq!(c.misclassified(), c.nulls);
        }
    }
}
