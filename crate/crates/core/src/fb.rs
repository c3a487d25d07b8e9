//! Full-Bayes treatment of the global scale: a prior on `τ` with compact
//! support, its posterior on a log-spaced grid, and the posterior summaries
//! obtained by averaging the fixed-`τ` quantities over that grid.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eb::moments_at_tau;
use crate::error::{Error, Result};
use crate::kernel::{kappa_moments, KappaGrid, KappaMoments};
use crate::prior::PriorSpec;
use crate::quadrature::QuadratureConfig;
use crate::special::{log_sum_exp, pairwise_sum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TauPriorKind {
    TruncatedHalfCauchy,
    TruncatedUniform,
    Table,
}

/// A density on `[lo, hi] ⊂ (0, 1]`, normalized over its support.
#[derive(Debug, Clone, PartialEq)]
pub struct TauPrior {
    kind: TauPriorKind,
    lo: f64,
    hi: f64,
    /// `(τ, density)` knots for tables, linear in between
    knots: Vec<(f64, f64)>,
    ln_norm: f64,
}

fn check_support(lo: f64, hi: f64) -> Result<()> {
    if !(lo > 0.0 && hi <= 1.0 && lo < hi) {
        return Err(Error::domain(format!(
            "tau prior support [{lo}, {hi}] must satisfy 0 < lo < hi <= 1"
        )));
    }
    Ok(())
}

impl TauPrior {
    /// Half-Cauchy restricted to `[lo, hi]`: `(atan hi - atan lo)^(-1) (1+τ²)^(-1)`.
    pub fn half_cauchy(lo: f64, hi: f64) -> Result<Self> {
        check_support(lo, hi)?;
        Ok(TauPrior {
            kind: TauPriorKind::TruncatedHalfCauchy,
            lo,
            hi,
            knots: Vec::new(),
            ln_norm: -(hi.atan() - lo.atan()).ln(),
        })
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        check_support(lo, hi)?;
        Ok(TauPrior {
            kind: TauPriorKind::TruncatedUniform,
            lo,
            hi,
            knots: Vec::new(),
            ln_norm: -(hi - lo).ln(),
        })
    }

    /// Piecewise-linear density through `(τ, density)` knots, rescaled to
    /// integrate to one. A single knot is a point mass.
    pub fn table(mut knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::domain("tau prior table is empty"));
        }
        knots.sort_by(|a, b| a.0.total_cmp(&b.0));
        if knots.iter().any(|&(t, d)| !(t > 0.0 && t <= 1.0) || !(d >= 0.0) || !d.is_finite()) {
            return Err(Error::domain("tau prior knots need τ in (0, 1] and finite density >= 0"));
        }
        if knots.windows(2).any(|p| p[0].0 == p[1].0) {
            return Err(Error::domain("tau prior knots must be distinct"));
        }
        let (lo, hi) = (knots[0].0, knots[knots.len() - 1].0);
        if knots.len() == 1 {
            return Ok(TauPrior {
                kind: TauPriorKind::Table,
                lo,
                hi,
                knots,
                ln_norm: 0.0,
            });
        }
        let mass: f64 = knots
            .windows(2)
            .map(|p| 0.5 * (p[0].1 + p[1].1) * (p[1].0 - p[0].0))
            .sum();
        if !(mass > 0.0) {
            return Err(Error::domain("tau prior table has zero mass"));
        }
        Ok(TauPrior {
            kind: TauPriorKind::Table,
            lo,
            hi,
            knots,
            ln_norm: -mass.ln(),
        })
    }

    /// Point mass at `τ`.
    pub fn point(tau: f64) -> Result<Self> {
        Self::table(vec![(tau, 1.0)])
    }

    pub fn kind(&self) -> TauPriorKind {
        self.kind
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn is_point_mass(&self) -> bool {
        self.lo == self.hi
    }

    /// Log density; `-∞` outside the support.
    pub fn log_density(&self, tau: f64) -> f64 {
        if !(tau >= self.lo && tau <= self.hi) {
            return f64::NEG_INFINITY;
        }
        match self.kind {
            TauPriorKind::TruncatedHalfCauchy => self.ln_norm - (tau * tau).ln_1p(),
            TauPriorKind::TruncatedUniform => self.ln_norm,
            TauPriorKind::Table => {
                if self.is_point_mass() {
                    return 0.0;
                }
                let k = self.knots.partition_point(|&(t, _)| t <= tau).clamp(1, self.knots.len() - 1);
                let ((t0, d0), (t1, d1)) = (self.knots[k - 1], self.knots[k]);
                let d = d0 + (d1 - d0) * (tau - t0) / (t1 - t0);
                self.ln_norm + d.ln()
            }
        }
    }

    /// Prior mass of `[lo, τ]`.
    pub fn cdf(&self, tau: f64) -> f64 {
        if tau < self.lo {
            return 0.0;
        }
        if tau >= self.hi {
            return 1.0;
        }
        match self.kind {
            TauPriorKind::TruncatedHalfCauchy => (tau.atan() - self.lo.atan()) / (self.hi.atan() - self.lo.atan()),
            TauPriorKind::TruncatedUniform => (tau - self.lo) / (self.hi - self.lo),
            TauPriorKind::Table => {
                let scale = self.ln_norm.exp();
                let mut acc = 0.0;
                for p in self.knots.windows(2) {
                    let ((t0, d0), (t1, d1)) = (p[0], p[1]);
                    if tau >= t1 {
                        acc += 0.5 * (d0 + d1) * (t1 - t0);
                    } else {
                        let d = d0 + (d1 - d0) * (tau - t0) / (t1 - t0);
                        acc += 0.5 * (d0 + d) * (tau - t0);
                        break;
                    }
                }
                acc * scale
            }
        }
    }

    /// `τ` nodes log-spaced on the support, with log trapezoid cell weights
    /// in `ln τ` that include the prior density and the Jacobian `τ`.
    pub fn grid(&self, nodes: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        if self.is_point_mass() {
            return Ok((vec![self.lo], vec![0.0]));
        }
        if nodes < 2 {
            return Err(Error::domain("tau grid needs at least 2 nodes"));
        }
        let (a, b) = (self.lo.ln(), self.hi.ln());
        let h = (b - a) / (nodes - 1) as f64;
        let mut taus = Vec::with_capacity(nodes);
        let mut ln_w = Vec::with_capacity(nodes);
        for j in 0..nodes {
            let s = if j == nodes - 1 { b } else { a + j as f64 * h };
            let tau = if j == 0 {
                self.lo
            } else if j == nodes - 1 {
                self.hi
            } else {
                s.exp()
            };
            let cell = if j == 0 || j == nodes - 1 { 0.5 * h } else { h };
            taus.push(tau);
            ln_w.push(self.log_density(tau) + tau.ln() + cell.ln());
        }
        Ok((taus, ln_w))
    }
}

/// Prior on `τ` as written in configuration files. Omitted bounds default
/// to `lo = 1/n` and the caller's upper end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TauPriorChoice {
    TruncatedHalfCauchy {
        #[serde(default)]
        lo: Option<f64>,
        #[serde(default)]
        hi: Option<f64>,
    },
    TruncatedUniform {
        #[serde(default)]
        lo: Option<f64>,
        #[serde(default)]
        hi: Option<f64>,
    },
    Table { points: Vec<(f64, f64)> },
}

impl TauPriorChoice {
    pub fn build(&self, n: usize, default_hi: f64) -> Result<TauPrior> {
        let lo_default = 1.0 / n as f64;
        match *self {
            TauPriorChoice::TruncatedHalfCauchy { lo, hi } => {
                TauPrior::half_cauchy(lo.unwrap_or(lo_default), hi.unwrap_or(default_hi))
            }
            TauPriorChoice::TruncatedUniform { lo, hi } => {
                TauPrior::uniform(lo.unwrap_or(lo_default), hi.unwrap_or(default_hi))
            }
            TauPriorChoice::Table { ref points } => TauPrior::table(points.clone()),
        }
    }
}

/// Upper end of the testing prior's support:
/// `log(1/α_n) = log n - ½ log log n + log log log n`.
pub fn alpha_n(n: usize) -> Result<f64> {
    let nf = n as f64;
    let lln = nf.ln().ln();
    if !(lln > 1.0) {
        return Err(Error::domain(format!("alpha_n schedule needs log log n > 1, got n = {n}")));
    }
    Ok((-(nf.ln() - 0.5 * lln + lln.ln())).exp())
}

/// Constants of the prior-mass condition around `τ_n(q_n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct C2Params {
    pub c_u: f64,
    pub m1: f64,
    pub c: f64,
    pub q_n: usize,
    pub n: usize,
}

impl C2Params {
    pub fn new(q_n: usize, n: usize) -> Self {
        C2Params {
            c_u: 1.0,
            m1: 1.0,
            c: 0.5,
            q_n,
            n,
        }
    }

    /// `(q_n/n) √(log(n/q_n))`
    pub fn tau_n(&self) -> f64 {
        let r = self.q_n as f64 / self.n as f64;
        r * (1.0 / r).ln().sqrt()
    }

    /// `C_u π^(3/2) τ_n`
    pub fn t_n(&self) -> f64 {
        self.c_u * std::f64::consts::PI.powf(1.5) * self.tau_n()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c_u > 0.0) || !(self.m1 >= 1.0) || !(self.c > 0.0 && self.c <= 0.5 * self.c_u) {
            return Err(Error::domain(format!(
                "mass condition constants need C_u > 0, M1 >= 1, 0 < c <= C_u/2; got {self:?}"
            )));
        }
        if self.q_n == 0 || self.q_n >= self.n {
            return Err(Error::domain("mass condition needs 0 < q_n < n"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct C2Report {
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
    /// False when `[t_n/2, t_n]` is not inside the prior's support.
    pub applicable: bool,
}

/// `(q_n/n)^M1 ∫_{t_n/2}^{t_n} π(τ) dτ ≥ e^(-c q_n)`.
pub fn check_c2(prior: &TauPrior, params: &C2Params) -> Result<C2Report> {
    params.validate()?;
    let t = params.t_n();
    let (lo, hi) = prior.support();
    let rhs = (-params.c * params.q_n as f64).exp();
    if !(0.5 * t >= lo && t <= hi) {
        return Ok(C2Report {
            lhs: f64::NAN,
            rhs,
            satisfied: false,
            applicable: false,
        });
    }
    let mass = prior.cdf(t) - prior.cdf(0.5 * t);
    let lhs = (params.q_n as f64 / params.n as f64).powf(params.m1) * mass;
    Ok(C2Report {
        lhs,
        rhs,
        satisfied: lhs >= rhs,
        applicable: true,
    })
}

/// Discretized posterior of `τ`.
#[derive(Debug, Clone, PartialEq)]
pub struct TauPosterior {
    pub grid: Vec<f64>,
    /// Normalized log masses, one per grid node.
    pub log_weights: Vec<f64>,
}

impl TauPosterior {
    fn from_log_masses(grid: Vec<f64>, ln_mass: Vec<f64>) -> Result<Self> {
        let max = ln_mass.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::PosteriorUnderflow { max_log_weight: max });
        }
        let total = log_sum_exp(&ln_mass);
        Ok(TauPosterior {
            grid,
            log_weights: ln_mass.iter().map(|v| v - total).collect(),
        })
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|v| v.exp()).collect()
    }

    pub fn mean(&self) -> f64 {
        self.grid.iter().zip(self.weights()).map(|(t, w)| t * w).sum()
    }

    fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.weights()
            .into_iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MarginalMode {
    /// Every `(τ node, distinct |x|)` pair by quadrature.
    Exact,
    /// Cubic Hermite tables in `|x|` per `τ` node, built once and reused;
    /// observations beyond the table fall back to quadrature.
    Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FbConfig {
    pub grid_nodes: usize,
    pub mode: MarginalMode,
    pub table_step: f64,
    pub table_x_max: f64,
}

impl Default for FbConfig {
    fn default() -> Self {
        FbConfig {
            grid_nodes: 200,
            mode: MarginalMode::Table,
            table_step: 1.0 / 64.0,
            table_x_max: 40.0,
        }
    }
}

impl FbConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_nodes < 2 {
            return Err(Error::InvalidParameter {
                name: "grid_nodes",
                value: self.grid_nodes as f64,
                reason: "must be at least 2",
            });
        }
        if !(self.table_step > 0.0 && self.table_step <= 0.25) {
            return Err(Error::InvalidParameter {
                name: "table_step",
                value: self.table_step,
                reason: "must lie in (0, 0.25]",
            });
        }
        if !(self.table_x_max > 0.0 && self.table_x_max.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "table_x_max",
                value: self.table_x_max,
                reason: "must be positive and finite",
            });
        }
        Ok(())
    }
}

/// What the full-Bayes summaries need from one `(x, τ)` pair.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Local {
    log_norm: f64,
    w: f64,
    var_kappa: f64,
}

impl From<KappaMoments> for Local {
    fn from(m: KappaMoments) -> Self {
        Local {
            log_norm: m.log_norm,
            w: m.w,
            var_kappa: m.var_kappa,
        }
    }
}

/// Values and `|x|`-derivatives on an equispaced grid, for cubic Hermite
/// interpolation. Derivatives are exact: `d ln m/dx = -x E κ`,
/// `d E(1-κ)/dx = x Var κ`, `d Var κ/dx = -x μ₃(κ)`.
#[derive(Debug, Clone)]
struct XTable {
    step: f64,
    x_max: f64,
    value: Vec<[f64; 3]>,
    slope: Vec<[f64; 3]>,
}

impl XTable {
    fn build(tau: f64, spec: &PriorSpec, quad: &QuadratureConfig, step: f64, x_max: f64) -> Result<Self> {
        let count = (x_max / step).ceil() as usize;
        let x_max = count as f64 * step;
        let grid = KappaGrid::build(tau, spec, quad, &[x_max])?;
        let mut value = Vec::with_capacity(count + 1);
        let mut slope = Vec::with_capacity(count + 1);
        for k in 0..=count {
            let x = k as f64 * step;
            let m = grid.moments(x);
            value.push([m.log_norm, m.w, m.var_kappa]);
            slope.push([-x * m.m1, x * m.var_kappa, -x * m.mu3_kappa]);
        }
        Ok(XTable {
            step,
            x_max,
            value,
            slope,
        })
    }

    fn eval(&self, ax: f64) -> Option<Local> {
        if !(ax <= self.x_max) {
            return None;
        }
        let pos = ax / self.step;
        let k = (pos.floor() as usize).min(self.value.len() - 2);
        let t = pos - k as f64;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let f = |c: usize| {
            h00 * self.value[k][c]
                + h10 * self.step * self.slope[k][c]
                + h01 * self.value[k + 1][c]
                + h11 * self.step * self.slope[k + 1][c]
        };
        Some(Local {
            log_norm: f(0),
            w: f(1).clamp(0.0, 1.0),
            var_kappa: f(2).max(0.0),
        })
    }
}

/// Full-Bayes posterior summaries for one data vector.
#[derive(Debug, Clone)]
pub struct FullBayesFit {
    pub posterior: TauPosterior,
    /// `E(θ_i | X)`
    pub mean: Vec<f64>,
    /// `Var(θ_i | X)` by the law of total variance over `τ`
    pub variance: Vec<f64>,
    /// `E(1 - κ_i | X)`
    pub weight: Vec<f64>,
}

/// Reusable full-Bayes machinery for one `(prior on τ, local prior)` pair.
#[derive(Debug, Clone)]
pub struct FullBayes {
    spec: PriorSpec,
    quad: QuadratureConfig,
    prior: TauPrior,
    taus: Vec<f64>,
    ln_cell: Vec<f64>,
    tables: Option<Vec<XTable>>,
}

impl FullBayes {
    pub fn new(prior: TauPrior, spec: &PriorSpec, quad: &QuadratureConfig, cfg: &FbConfig) -> Result<Self> {
        cfg.validate()?;
        quad.validate()?;
        let (taus, ln_cell) = prior.grid(cfg.grid_nodes)?;
        let tables = match cfg.mode {
            MarginalMode::Exact => None,
            MarginalMode::Table => Some(
                taus.par_iter()
                    .map(|&t| XTable::build(t, spec, quad, cfg.table_step, cfg.table_x_max))
                    .collect::<Result<Vec<_>>>()?,
            ),
        };
        Ok(FullBayes {
            spec: spec.clone(),
            quad: quad.clone(),
            prior,
            taus,
            ln_cell,
            tables,
        })
    }

    /// Picks exact evaluation when the data has fewer distinct `|x|` than a
    /// table would hold, and sizes the table to the data otherwise.
    pub fn for_data(
        x: &[f64],
        prior: TauPrior,
        spec: &PriorSpec,
        quad: &QuadratureConfig,
        cfg: &FbConfig,
    ) -> Result<Self> {
        let mut distinct: Vec<f64> = x.iter().map(|v| v.abs()).collect();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        let x_max = distinct.last().copied().unwrap_or(0.0).max(1.0);
        let mut cfg = cfg.clone();
        if cfg.mode == MarginalMode::Table {
            cfg.table_x_max = cfg.table_x_max.min(x_max);
            if (distinct.len() as f64) < cfg.table_x_max / cfg.table_step {
                cfg.mode = MarginalMode::Exact;
            }
        }
        Self::new(prior, spec, quad, &cfg)
    }

    pub fn prior(&self) -> &TauPrior {
        &self.prior
    }

    pub fn spec(&self) -> &PriorSpec {
        &self.spec
    }

    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    /// `locals[j][i]` for every grid node `j` and coordinate `i`.
    fn locals(&self, x: &[f64]) -> Result<Vec<Vec<Local>>> {
        self.taus
            .par_iter()
            .enumerate()
            .map(|(j, &tau)| match &self.tables {
                None => Ok(moments_at_tau(x, tau, &self.spec, &self.quad)?
                    .into_iter()
                    .map(Local::from)
                    .collect()),
                Some(tables) => {
                    let table = &tables[j];
                    let mut out: Vec<Option<Local>> = x.iter().map(|v| table.eval(v.abs())).collect();
                    let far: Vec<f64> = x
                        .iter()
                        .zip(&out)
                        .filter(|(_, l)| l.is_none())
                        .map(|(&v, _)| v)
                        .collect();
                    if !far.is_empty() {
                        let exact = moments_at_tau(&far, tau, &self.spec, &self.quad)?;
                        let mut it = exact.into_iter();
                        for slot in out.iter_mut().filter(|l| l.is_none()) {
                            *slot = it.next().map(Local::from);
                        }
                    }
                    Ok(out.into_iter().map(|l| l.expect("filled above")).collect())
                }
            })
            .collect()
    }

    fn posterior_from(&self, locals: &[Vec<Local>]) -> Result<TauPosterior> {
        let ln_mass: Vec<f64> = locals
            .iter()
            .zip(&self.ln_cell)
            .map(|(col, &cell)| {
                let lm: Vec<f64> = col.iter().map(|l| l.log_norm).collect();
                cell + pairwise_sum(&lm) - col.len() as f64 * crate::special::LN_SQRT_2PI
            })
            .collect();
        TauPosterior::from_log_masses(self.taus.clone(), ln_mass)
    }

    pub fn tau_posterior(&self, x: &[f64]) -> Result<TauPosterior> {
        if x.is_empty() {
            return Err(Error::domain("data vector is empty"));
        }
        self.posterior_from(&self.locals(x)?)
    }

    pub fn fit(&self, x: &[f64]) -> Result<FullBayesFit> {
        if x.is_empty() {
            return Err(Error::domain("data vector is empty"));
        }
        let locals = self.locals(x)?;
        let posterior = self.posterior_from(&locals)?;
        let pw = posterior.weights();
        let n = x.len();
        let mut mean = vec![0.0; n];
        let mut weight = vec![0.0; n];
        let mut within = vec![0.0; n];
        for (col, &p) in locals.iter().zip(&pw) {
            for (i, l) in col.iter().enumerate() {
                weight[i] += p * l.w;
                mean[i] += p * l.w * x[i];
                within[i] += p * (l.w + x[i] * x[i] * l.var_kappa);
            }
        }
        let mut variance = within;
        for (col, &p) in locals.iter().zip(&pw) {
            for (i, l) in col.iter().enumerate() {
                let d = l.w * x[i] - mean[i];
                variance[i] += p * d * d;
            }
        }
        Ok(FullBayesFit {
            posterior,
            mean,
            variance,
            weight,
        })
    }

    /// Joint posterior draws, `draws × n`: `τ` from its posterior, then each
    /// coordinate from its conditional law given that `τ`.
    pub fn sample_theta<R: Rng + ?Sized>(
        &self,
        x: &[f64],
        posterior: &TauPosterior,
        rng: &mut R,
        draws: usize,
    ) -> Result<Vec<Vec<f64>>> {
        if draws == 0 {
            return Err(Error::domain("need at least one draw"));
        }
        let cum = posterior.cumulative();
        let total = *cum.last().expect("grid is nonempty");
        let node_of_row: Vec<usize> = (0..draws)
            .map(|_| {
                let u = rng.random::<f64>() * total;
                cum.partition_point(|&c| c <= u).min(cum.len() - 1)
            })
            .collect();
        let mut out = vec![vec![0.0; x.len()]; draws];
        for (j, &tau) in posterior.grid.iter().enumerate() {
            let rows: Vec<usize> = (0..draws).filter(|&r| node_of_row[r] == j).collect();
            if rows.is_empty() {
                continue;
            }
            let grid = KappaGrid::build(tau, &self.spec, &self.quad, x)?;
            for (i, &xi) in x.iter().enumerate() {
                let sampler = grid.sampler(xi);
                for &r in &rows {
                    out[r][i] = sampler.draw_theta(rng);
                }
            }
        }
        Ok(out)
    }
}

/// `ln m_τ(x)`, the marginal density of one observation given `τ`.
pub fn log_marginal_x_given_tau(x: f64, tau: f64, spec: &PriorSpec, quad: &QuadratureConfig) -> Result<f64> {
    Ok(kappa_moments(x, tau, spec, quad)?.log_marginal())
}

pub fn tau_posterior(
    x: &[f64],
    prior: &TauPrior,
    spec: &PriorSpec,
    cfg: &FbConfig,
    quad: &QuadratureConfig,
) -> Result<TauPosterior> {
    FullBayes::for_data(x, prior.clone(), spec, quad, cfg)?.tau_posterior(x)
}

pub fn fb_fit(
    x: &[f64],
    prior: &TauPrior,
    spec: &PriorSpec,
    cfg: &FbConfig,
    quad: &QuadratureConfig,
) -> Result<FullBayesFit> {
    FullBayes::for_data(x, prior.clone(), spec, quad, cfg)?.fit(x)
}

pub fn fb_posterior_mean(
    x: &[f64],
    prior: &TauPrior,
    spec: &PriorSpec,
    cfg: &FbConfig,
    quad: &QuadratureConfig,
) -> Result<Vec<f64>> {
    Ok(fb_fit(x, prior, spec, cfg, quad)?.mean)
}

fn check_index(x: &[f64], i: usize) -> Result<()> {
    if i >= x.len() {
        return Err(Error::domain(format!("index {i} out of range for {} observations", x.len())));
    }
    Ok(())
}

pub fn fb_posterior_variance(
    x: &[f64],
    prior: &TauPrior,
    spec: &PriorSpec,
    cfg: &FbConfig,
    quad: &QuadratureConfig,
    i: usize,
) -> Result<f64> {
    check_index(x, i)?;
    Ok(fb_fit(x, prior, spec, cfg, quad)?.variance[i])
}

pub fn fb_shrinkage_weight(
    x: &[f64],
    prior: &TauPrior,
    spec: &PriorSpec,
    cfg: &FbConfig,
    quad: &QuadratureConfig,
    i: usize,
) -> Result<f64> {
    check_index(x, i)?;
    Ok(fb_fit(x, prior, spec, cfg, quad)?.weight[i])
}

pub fn fb_sample_theta<R: Rng + ?Sized>(
    x: &[f64],
    prior: &TauPrior,
    spec: &PriorSpec,
    cfg: &FbConfig,
    quad: &QuadratureConfig,
    rng: &mut R,
    draws: usize,
) -> Result<Vec<Vec<f64>>> {
    let fb = FullBayes::for_data(x, prior.clone(), spec, quad, cfg)?;
    let posterior = fb.tau_posterior(x)?;
    fb.sample_theta(x, &posterior, rng, draws)
}
