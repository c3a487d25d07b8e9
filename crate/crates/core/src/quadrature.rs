//! Log-domain trapezoid quadrature.
//!
//! Every integral in the crate is of the form `∫ exp(g(s)) ds` where `g` is
//! available in closed form in log space. On the real line the trapezoid rule
//! converges geometrically for analytic integrands with exponentially decaying
//! tails, so the engine here is a plain trapezoid with step halving. Finite
//! intervals are mapped to the real line with the tanh-sinh substitution,
//! which gives the same behaviour at hard endpoints.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{ln_cosh, log_add_exp, log_sum_exp};

/// Node budget ceiling for any single trapezoid sequence.
pub const MAX_NODES: usize = 1 << 20;

/// The integration range is cut where the log-integrand has fallen this far
/// below its maximum.
pub const TRUNCATION_NATS: f64 = 40.0;

/// Largest initial step on the real line. Keeps the first estimate from
/// stepping over narrow peaks.
const MAX_INITIAL_STEP: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    /// Initial number of trapezoid intervals.
    pub node_count: usize,
    /// Extra breakpoints, given as shrinkage-coefficient values in (0, 1).
    pub split_points: Vec<f64>,
    pub relative_tolerance: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            node_count: 64,
            split_points: Vec::new(),
            relative_tolerance: 1e-9,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.node_count < 64 {
            return Err(Error::InvalidParameter {
                name: "node_count",
                value: self.node_count as f64,
                reason: "must be at least 64",
            });
        }
        if !(self.relative_tolerance > 0.0 && self.relative_tolerance <= 1e-8) {
            return Err(Error::InvalidParameter {
                name: "relative_tolerance",
                value: self.relative_tolerance,
                reason: "must lie in (0, 1e-8]",
            });
        }
        if let Some(&bad) = self
            .split_points
            .iter()
            .find(|&&p| !(p > 0.0 && p < 1.0))
        {
            return Err(Error::InvalidParameter {
                name: "split_points",
                value: bad,
                reason: "split points must lie in (0, 1)",
            });
        }
        Ok(())
    }
}

/// Region scanned on a coarse grid to locate the bulk of an integrand.
#[derive(Debug, Clone, Copy)]
pub struct ScanWindow {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl ScanWindow {
    /// Wide enough for `s = ln t` with `t` anywhere in the f64 range.
    pub const LOG_SCALE: ScanWindow = ScanWindow {
        lo: -745.0,
        hi: 745.0,
        step: 0.5,
    };

    const TANH_SINH: ScanWindow = ScanWindow {
        lo: -6.5,
        hi: 6.5,
        step: 0.05,
    };
}

/// Finds `[lo, hi]` outside of which `g` stays more than
/// [`TRUNCATION_NATS`] below its maximum on the scan grid.
pub fn support<F: Fn(f64) -> f64>(g: &F, window: ScanWindow) -> Result<(f64, f64)> {
    let count = ((window.hi - window.lo) / window.step).ceil() as usize + 1;
    let values: Vec<f64> = (0..count)
        .map(|k| g(window.lo + k as f64 * window.step))
        .collect();
    if let Some(k) = values.iter().position(|v| v.is_nan()) {
        return Err(Error::domain(format!(
            "log-integrand is NaN at {}",
            window.lo + k as f64 * window.step
        )));
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::INFINITY {
        return Err(Error::domain("log-integrand is unbounded"));
    }
    if max == f64::NEG_INFINITY {
        return Err(Error::domain("integrand vanishes on the scan window"));
    }
    let cut = max - TRUNCATION_NATS;
    let first = values.iter().position(|&v| v >= cut).unwrap_or(0);
    let last = values.iter().rposition(|&v| v >= cut).unwrap_or(count - 1);
    if first == 0 && values[0] >= cut {
        return Err(Error::Truncation {
            nats: TRUNCATION_NATS,
            boundary: window.lo,
        });
    }
    if last == count - 1 && values[count - 1] >= cut {
        return Err(Error::Truncation {
            nats: TRUNCATION_NATS,
            boundary: window.hi,
        });
    }
    let lo = window.lo + (first - 1) as f64 * window.step;
    let hi = window.lo + (last + 1) as f64 * window.step;
    Ok((lo, hi))
}

/// `ln ∫ exp(g(s)) ds` over the real line.
pub fn integrate_ln<F: Fn(f64) -> f64>(
    g: F,
    window: ScanWindow,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    let (lo, hi) = support(&g, window)?;
    trapezoid_ln(&g, lo, hi, cfg)
}

/// `ln ∫_a^b exp(g(x)) dx` by tanh-sinh.
pub fn integrate_ln_interval<F: Fn(f64) -> f64>(
    g: F,
    a: f64,
    b: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    if !(b > a) {
        return Err(Error::domain(format!("empty interval [{a}, {b}]")));
    }
    let half = 0.5 * (b - a);
    let ln_scale = half.ln() + FRAC_PI_2.ln();
    let mapped = move |v: f64| {
        let y = FRAC_PI_2 * v.sinh();
        // distance to the nearer endpoint, kept accurate as it underflows
        let dist = 2.0 * half / (1.0 + (2.0 * y.abs()).exp());
        if dist == 0.0 {
            // the Jacobian is below e^-700 here
            return f64::NEG_INFINITY;
        }
        let x = if y < 0.0 { a + dist } else { b - dist };
        let gx = g(x);
        if gx == f64::NEG_INFINITY {
            return gx;
        }
        gx + ln_scale + ln_cosh(v) - 2.0 * ln_cosh(y)
    };
    integrate_ln(mapped, ScanWindow::TANH_SINH, cfg)
}

/// `ln ∫_a^∞ exp(g(s)) ds`, truncating the upper end where `g` has decayed.
pub fn integrate_ln_half_line<F: Fn(f64) -> f64>(
    g: F,
    a: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    let window = ScanWindow {
        lo: a,
        hi: a + 1490.0,
        step: 0.5,
    };
    let count = ((window.hi - window.lo) / window.step) as usize + 1;
    let mut max = f64::NEG_INFINITY;
    let mut values = Vec::with_capacity(count);
    for k in 0..count {
        let v = g(a + k as f64 * window.step);
        if v.is_nan() {
            return Err(Error::domain("log-integrand is NaN"));
        }
        max = max.max(v);
        values.push(v);
    }
    if max == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let last = values
        .iter()
        .rposition(|&v| v >= max - TRUNCATION_NATS)
        .unwrap_or(0);
    if last == count - 1 {
        return Err(Error::Truncation {
            nats: TRUNCATION_NATS,
            boundary: window.hi,
        });
    }
    let b = a + (last + 1) as f64 * window.step;
    integrate_ln_interval(g, a, b, cfg)
}

fn trapezoid_ln<F: Fn(f64) -> f64>(g: &F, lo: f64, hi: f64, cfg: &QuadratureConfig) -> Result<f64> {
    let width = hi - lo;
    let mut n = cfg
        .node_count
        .max((width / MAX_INITIAL_STEP).ceil() as usize)
        .max(2);
    let mut h = width / n as f64;
    let mut terms: Vec<f64> = (0..=n).map(|k| g(lo + k as f64 * h)).collect();
    // endpoint halves
    terms[0] -= std::f64::consts::LN_2;
    terms[n] -= std::f64::consts::LN_2;
    let mut ln_sum = log_sum_exp(&terms);
    let mut estimate = ln_sum + h.ln();
    loop {
        if 2 * n > MAX_NODES {
            return Err(Error::Quadrature {
                target: cfg.relative_tolerance,
                achieved: f64::NAN,
                nodes: n,
            });
        }
        let mids: Vec<f64> = (0..n).map(|k| g(lo + (k as f64 + 0.5) * h)).collect();
        ln_sum = log_add_exp(ln_sum, log_sum_exp(&mids));
        n *= 2;
        h *= 0.5;
        let refined = ln_sum + h.ln();
        let change = (refined - estimate).abs();
        estimate = refined;
        if change <= cfg.relative_tolerance {
            return Ok(estimate);
        }
        if 2 * n > MAX_NODES {
            return Err(Error::Quadrature {
                target: cfg.relative_tolerance,
                achieved: change,
                nodes: n,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_integral() {
        let cfg = QuadratureConfig::default();
        let got = integrate_ln(|s| -0.5 * s * s, ScanWindow::LOG_SCALE, &cfg).unwrap();
        let want = (2.0 * std::f64::consts::PI).sqrt().ln();
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn interval_with_endpoint_singularity() {
        // ∫_0^1 x^{-1/2} dx = 2
        let cfg = QuadratureConfig::default();
        let got = integrate_ln_interval(|x: f64| -0.5 * x.ln(), 0.0, 1.0, &cfg).unwrap();
        assert!((got.exp() - 2.0).abs() < 1e-9, "{}", got.exp());
    }

    #[test]
    fn half_line_exponential() {
        // ∫_1^∞ e^{-s} ds = e^{-1}
        let cfg = QuadratureConfig::default();
        let got = integrate_ln_half_line(|s| -s, 1.0, &cfg).unwrap();
        assert!((got + 1.0).abs() < 1e-10, "{got}");
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = QuadratureConfig {
            node_count: 10,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = QuadratureConfig {
            relative_tolerance: 1e-6,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = QuadratureConfig {
            split_points: vec![1.5],
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn truncation_reported() {
        let cfg = QuadratureConfig::default();
        let err = integrate_ln(|s| -1e-4 * s.abs(), ScanWindow::LOG_SCALE, &cfg).unwrap_err();
        assert!(matches!(err, Error::Truncation { .. }));
    }
}
