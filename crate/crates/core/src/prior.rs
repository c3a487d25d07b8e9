//! The family of local-scale priors `π(λ²) = K (λ²)^(-a-1) L(λ²)`.
//!
//! A prior is fixed by its tail index `a` and a slowly varying, bounded
//! function `L`. `L` is always evaluated in log space and takes `ln t`
//! as its argument, so no caller ever has to form `t` itself when `t` is
//! astronomically large or small.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::quadrature::{integrate_ln, QuadratureConfig, ScanWindow};
use crate::special::ln_sigmoid;

/// A positive function on (0, ∞) with `L(αt)/L(t) → 1` as `t → ∞`.
pub trait SlowlyVarying: Send + Sync + fmt::Debug {
    /// `ln L(t)` evaluated at `ln t`.
    fn ln_l(&self, ln_t: f64) -> f64;
}

/// `L(t) = t / (1 + t)`.
#[derive(Debug, Clone, Copy)]
pub struct HorseshoeL;

impl SlowlyVarying for HorseshoeL {
    fn ln_l(&self, ln_t: f64) -> f64 {
        ln_sigmoid(ln_t)
    }
}

/// `L(t) = (t / (1 + t))^exponent`; the three-parameter beta prior uses
/// `exponent = a + b`.
#[derive(Debug, Clone, Copy)]
pub struct PowerLogisticL {
    pub exponent: f64,
}

impl SlowlyVarying for PowerLogisticL {
    fn ln_l(&self, ln_t: f64) -> f64 {
        self.exponent * ln_sigmoid(ln_t)
    }
}

/// `L` for the generalized double Pareto prior, tabulated from its
/// exponential-gamma mixture representation.
///
/// With `θ | v ~ N(0, v)`, `v | λ ~ Exp(λ²/2)` and `λ ~ Gamma(α, η)`, the
/// density of `v` is `π(v) = ∫ (λ²/2) e^(-λ² v / 2) Gamma(λ; α, η) dλ`, which
/// has tail index `a = α/2`. The table stores `ln L = (a+1) ln v + ln π(v) - ln c∞`
/// where `c∞ = lim v^(a+1) π(v)`, so that `L → 1`.
#[derive(Clone)]
pub struct GdpL {
    ln_t0: f64,
    step: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl fmt::Debug for GdpL {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GdpL")
            .field("nodes", &self.values.len())
            .finish()
    }
}

const GDP_LN_T_RANGE: f64 = 60.0;
const GDP_STEP: f64 = 0.05;

impl GdpL {
    pub fn new(alpha: f64, eta: f64) -> Result<Self> {
        let a = alpha / 2.0;
        let ln_const = -std::f64::consts::LN_2 + alpha * eta.ln() - ln_gamma(alpha);
        let ln_limit =
            alpha * eta.ln() + ln_gamma(a + 1.0) + (a + 1.0) * std::f64::consts::LN_2
                - 2.0 * std::f64::consts::LN_2
                - ln_gamma(alpha);
        let cfg = QuadratureConfig {
            relative_tolerance: 1e-12,
            ..Default::default()
        };
        let window = ScanWindow {
            lo: -120.0,
            hi: 60.0,
            step: 0.25,
        };
        let count = (2.0 * GDP_LN_T_RANGE / GDP_STEP).round() as usize + 1;
        let mut values = Vec::with_capacity(count);
        let mut slopes = Vec::with_capacity(count);
        for k in 0..count {
            let ln_t = -GDP_LN_T_RANGE + k as f64 * GDP_STEP;
            let t = ln_t.exp();
            // r = ln λ
            let h = |r: f64| {
                ln_const + (alpha + 2.0) * r - 0.5 * t * (2.0 * r).exp() - eta * r.exp()
            };
            let ln_pi = integrate_ln(h, window, &cfg)?;
            let ln_second = integrate_ln(|r| h(r) + 2.0 * r, window, &cfg)?;
            let dln_pi = -0.5 * t * (ln_second - ln_pi).exp();
            values.push((a + 1.0) * ln_t + ln_pi - ln_limit);
            slopes.push((a + 1.0) + dln_pi);
        }
        Ok(GdpL {
            ln_t0: -GDP_LN_T_RANGE,
            step: GDP_STEP,
            values,
            slopes,
        })
    }
}

impl SlowlyVarying for GdpL {
    fn ln_l(&self, ln_t: f64) -> f64 {
        let last = self.values.len() - 1;
        let pos = (ln_t - self.ln_t0) / self.step;
        if pos <= 0.0 {
            return self.values[0] + self.slopes[0] * (ln_t - self.ln_t0);
        }
        if pos >= last as f64 {
            let ln_end = self.ln_t0 + last as f64 * self.step;
            // L approaches its limit; never extrapolate above it
            return (self.values[last] + self.slopes[last] * (ln_t - ln_end)).min(0.0);
        }
        let k = pos.floor() as usize;
        let u = pos - k as f64;
        let (y0, y1) = (self.values[k], self.values[k + 1]);
        let (d0, d1) = (self.slopes[k] * self.step, self.slopes[k + 1] * self.step);
        // cubic Hermite
        let u2 = u * u;
        let u3 = u2 * u;
        (2.0 * u3 - 3.0 * u2 + 1.0) * y0
            + (u3 - 2.0 * u2 + u) * d0
            + (-2.0 * u3 + 3.0 * u2) * y1
            + (u3 - u2) * d1
    }
}

/// A member of the prior family, with its normalizer and the numerical
/// certificates for the boundedness conditions on `L`.
#[derive(Clone)]
pub struct PriorSpec {
    name: String,
    a: f64,
    l: Arc<dyn SlowlyVarying>,
    k: f64,
    m: f64,
    c0: f64,
    t0: f64,
}

impl fmt::Debug for PriorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PriorSpec")
            .field("name", &self.name)
            .field("a", &self.a)
            .field("K", &self.k)
            .field("M", &self.m)
            .field("c0", &self.c0)
            .field("t0", &self.t0)
            .finish()
    }
}

/// Far point used as a stand-in for `t → ∞` (and `t → 0`) when certifying.
const FAR_LN_T: f64 = 700.0;

impl PriorSpec {
    /// The horseshoe: `a = 1/2`, `L(t) = t/(1+t)`, `K = 1/π`.
    pub fn horseshoe() -> Self {
        PriorSpec {
            name: "horseshoe".into(),
            a: 0.5,
            l: Arc::new(HorseshoeL),
            k: std::f64::consts::FRAC_1_PI,
            m: 1.0,
            c0: 0.5,
            t0: 1.0,
        }
    }

    /// Three-parameter beta normal prior, `λ² ~ BetaPrime(b, a)`.
    pub fn three_parameter_beta(a: f64, b: f64) -> Result<Self> {
        positive("a", a)?;
        positive("b", b)?;
        Self::from_slowly_varying(
            format!("tpb({a},{b})"),
            a,
            Arc::new(PowerLogisticL { exponent: a + b }),
        )
    }

    /// Generalized double Pareto with shape `alpha` and rate `eta`; tail
    /// index `a = alpha/2`.
    pub fn generalized_double_pareto(alpha: f64, eta: f64) -> Result<Self> {
        positive("alpha", alpha)?;
        positive("eta", eta)?;
        Self::from_slowly_varying(
            format!("gdp({alpha},{eta})"),
            alpha / 2.0,
            Arc::new(GdpL::new(alpha, eta)?),
        )
    }

    /// Builds a spec from an arbitrary `L`, computing `K` by quadrature and
    /// the certificates `M`, `(c0, t0 = 1)` on the default validation grid.
    pub fn from_slowly_varying(
        name: impl Into<String>,
        a: f64,
        l: Arc<dyn SlowlyVarying>,
    ) -> Result<Self> {
        positive("a", a)?;
        let ln_integral = ln_normalizing_integral(a, l.as_ref())?;
        let grid = ValidationGrid::default();
        let mut m = f64::NEG_INFINITY;
        let mut c0 = f64::INFINITY;
        let t0: f64 = 1.0;
        for ln_t in grid.ln_points().chain([-FAR_LN_T, FAR_LN_T]) {
            let v = l.ln_l(ln_t).exp();
            m = m.max(v);
            if ln_t >= t0.ln() {
                c0 = c0.min(v);
            }
        }
        if !(m.is_finite() && m > 0.0) {
            return Err(Error::domain("L is unbounded or vanishes on the grid"));
        }
        Ok(PriorSpec {
            name: name.into(),
            a,
            l,
            k: (-ln_integral).exp(),
            m,
            c0,
            t0,
        })
    }

    /// Assembles a spec from user-supplied constants without checking them.
    /// [`validate_spec`] reports any certificate that does not hold.
    pub fn from_parts(
        name: impl Into<String>,
        a: f64,
        l: Arc<dyn SlowlyVarying>,
        k: f64,
        m: f64,
        c0: f64,
        t0: f64,
    ) -> Self {
        PriorSpec {
            name: name.into(),
            a,
            l,
            k,
            m,
            c0,
            t0,
        }
    }

    pub fn with_k(mut self, k: f64) -> Self {
        self.k = k;
        self
    }

    pub fn with_m(mut self, m: f64) -> Self {
        self.m = m;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    #[inline]
    pub fn ln_l(&self, ln_t: f64) -> f64 {
        self.l.ln_l(ln_t)
    }

    pub fn l(&self, t: f64) -> f64 {
        self.l.ln_l(t.ln()).exp()
    }

    pub fn slowly_varying(&self) -> &Arc<dyn SlowlyVarying> {
        &self.l
    }
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be positive and finite",
        })
    }
}

/// `ln ∫₀^∞ t^(-a-1) L(t) dt`, integrated over `s = ln t`.
pub fn ln_normalizing_integral(a: f64, l: &dyn SlowlyVarying) -> Result<f64> {
    let cfg = QuadratureConfig {
        relative_tolerance: 1e-12,
        ..Default::default()
    };
    integrate_ln(|s| -a * s + l.ln_l(s), ScanWindow::LOG_SCALE, &cfg)
}

/// Log-spaced evaluation points for the certificate checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationGrid {
    pub points: usize,
    pub t_min: f64,
    pub t_max: f64,
}

impl Default for ValidationGrid {
    fn default() -> Self {
        ValidationGrid {
            points: 4096,
            t_min: 1e-8,
            t_max: 1e8,
        }
    }
}

impl ValidationGrid {
    pub fn ln_points(&self) -> impl Iterator<Item = f64> + '_ {
        let lo = self.t_min.ln();
        let step = (self.t_max.ln() - lo) / (self.points - 1) as f64;
        (0..self.points).map(move |k| lo + k as f64 * step)
    }
}

/// Which certificate failed, and where.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// `L(t) ≤ 0` or not finite.
    Positivity { t: f64 },
    /// Assumption A2: `sup L ≤ M`.
    UpperBound { t: f64, value: f64, bound: f64 },
    /// Assumption A1: `L(t) ≥ c0` for `t ≥ t0`.
    LowerBound { t: f64, value: f64, c0: f64 },
    /// `K ∫ t^(-a-1) L(t) dt` differs from 1.
    Normalization { ratio: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Positivity { t } => write!(f, "L is not positive at t = {t:e}"),
            Violation::UpperBound { t, value, bound } => {
                write!(f, "A2: L({t:e}) = {value} exceeds M = {bound}")
            }
            Violation::LowerBound { t, value, c0 } => {
                write!(f, "A1: L({t:e}) = {value} is below c0 = {c0}")
            }
            Violation::Normalization { ratio } => {
                write!(f, "normalization: K * integral = {ratio}, expected 1")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub name: String,
    pub points: usize,
    /// Largest `L` seen on the grid and where.
    pub sup_l: f64,
    pub sup_at: f64,
    /// `M - sup L`; non-negative when A2 holds.
    pub sup_margin: f64,
    /// `min_{t ≥ t0} L(t) - c0`; non-negative when A1 holds.
    pub a1_margin: f64,
    pub normalization_ratio: f64,
}

/// Checks positivity, A1, A2 and normalization of `spec` on `grid`.
pub fn validate_spec(spec: &PriorSpec, grid: &ValidationGrid) -> Result<ValidationReport> {
    let mut sup_l = f64::NEG_INFINITY;
    let mut sup_at = f64::NAN;
    let mut tail_min = f64::INFINITY;
    let mut tail_min_at = f64::NAN;
    let ln_t0 = spec.t0.ln();
    for ln_t in grid.ln_points() {
        let ln_v = spec.ln_l(ln_t);
        let t = ln_t.exp();
        if !ln_v.is_finite() {
            return Err(Error::Assumption(Violation::Positivity { t }));
        }
        let v = ln_v.exp();
        if v > sup_l {
            sup_l = v;
            sup_at = t;
        }
        if ln_t >= ln_t0 && v < tail_min {
            tail_min = v;
            tail_min_at = t;
        }
    }
    if sup_l > spec.m * (1.0 + 1e-9) {
        return Err(Error::Assumption(Violation::UpperBound {
            t: sup_at,
            value: sup_l,
            bound: spec.m,
        }));
    }
    if tail_min < spec.c0 {
        return Err(Error::Assumption(Violation::LowerBound {
            t: tail_min_at,
            value: tail_min,
            c0: spec.c0,
        }));
    }
    let ratio = spec.k * ln_normalizing_integral(spec.a, spec.l.as_ref())?.exp();
    if (ratio - 1.0).abs() > 1e-8 {
        return Err(Error::Assumption(Violation::Normalization { ratio }));
    }
    Ok(ValidationReport {
        name: spec.name.clone(),
        points: grid.points,
        sup_l,
        sup_at,
        sup_margin: spec.m - sup_l,
        a1_margin: tail_min - spec.c0,
        normalization_ratio: ratio,
    })
}

/// Prior selection as it appears in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorChoice {
    Horseshoe,
    Tpb { a: f64, b: f64 },
    Gdp { alpha: f64, eta: f64 },
}

impl Default for PriorChoice {
    fn default() -> Self {
        PriorChoice::Horseshoe
    }
}

impl PriorChoice {
    pub fn build(&self) -> Result<PriorSpec> {
        match *self {
            PriorChoice::Horseshoe => Ok(PriorSpec::horseshoe()),
            PriorChoice::Tpb { a, b } => PriorSpec::three_parameter_beta(a, b),
            PriorChoice::Gdp { alpha, eta } => PriorSpec::generalized_double_pareto(alpha, eta),
        }
    }
}
