//! Posterior law of the shrinkage coefficient `κ = 1/(1 + λ²τ²)` given one
//! observation `x` and the global scale `τ`.
//!
//! All integrals run over `s = ln t`, `t = λ² = (1/τ²)(1/κ - 1)`. In that
//! variable the posterior integrand is
//!
//! ```text
//! K t^(-a) L(t) √κ exp(-κ x²/2),    κ = 1/(1 + tτ²)
//! ```
//!
//! which is the density in Eq. form `κ^(a-1/2)(1-κ)^(-a-1) L(t) e^((1-κ)x²/2)`
//! with the `e^(x²/2)` envelope divided out and the Jacobian absorbed. The
//! integrand is smooth in `s` with exponentially decaying tails, so a plain
//! trapezoid rule converges geometrically. Its integral is
//! `√(2π) · m_τ(x)`, the marginal density of `x` given `τ`.

use std::sync::OnceLock;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::prior::PriorSpec;
use crate::quadrature::{
    integrate_ln_half_line, support, QuadratureConfig, ScanWindow, MAX_NODES, TRUNCATION_NATS,
};
use crate::special::{ln_sigmoid, log_add_exp, sigmoid, LN_SQRT_2PI};

/// Number of cells in the inverse-CDF table used by the sampler.
pub const SAMPLER_CELLS: usize = 4096;

/// Posterior moments of `κ` for one `(x, τ)` pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaMoments {
    /// `E(κ | x, τ)`
    pub m1: f64,
    /// `E(κ² | x, τ)`
    pub m2: f64,
    /// `E(1 - κ | x, τ)`, the shrinkage weight
    pub w: f64,
    /// `E((1 - κ)² | x, τ)`
    pub w2: f64,
    /// `Var(κ | x, τ)`
    pub var_kappa: f64,
    /// `E((κ - E κ)³ | x, τ)`
    pub mu3_kappa: f64,
    /// `ln ∫ K t^(-a) L(t) √κ e^(-κx²/2) ds`, i.e. `ln(√(2π) m_τ(x))`
    pub log_norm: f64,
}

impl KappaMoments {
    /// `T_τ(x) = E(1-κ | x, τ) · x`
    pub fn posterior_mean(&self, x: f64) -> f64 {
        self.w * x
    }

    /// `Var(θ | x, τ) = E(1-κ) + x² Var(κ)`
    pub fn posterior_var(&self, x: f64) -> f64 {
        self.w + x * x * self.var_kappa
    }

    /// Log marginal density of `x` given `τ`.
    pub fn log_marginal(&self) -> f64 {
        self.log_norm - LN_SQRT_2PI
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "tau",
            value: tau,
            reason: "must lie in (0, 1]",
        })
    }
}

/// Unnormalized log posterior density of `κ` in its original variable.
pub fn kappa_log_density_unnormalized(
    kappa: f64,
    x: f64,
    tau: f64,
    spec: &PriorSpec,
) -> Result<f64> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::domain(format!("kappa = {kappa} outside (0, 1)")));
    }
    check_tau(tau)?;
    let a = spec.a();
    let ln_k = kappa.ln();
    let ln_1mk = (-kappa).ln_1p();
    let ln_t = ln_1mk - ln_k - 2.0 * tau.ln();
    Ok((a - 0.5) * ln_k + (-a - 1.0) * ln_1mk + spec.ln_l(ln_t) + (1.0 - kappa) * x * x / 2.0)
}

#[derive(Debug, Clone, Copy)]
struct Node {
    /// log integrand at x = 0, including the trapezoid weight
    base: f64,
    kappa: f64,
    omega: f64,
}

/// Trapezoid nodes in `s` for one `(τ, spec)`, refined until the moments at
/// a set of probe observations are stable. Once built, moments for any `x`
/// inside the probe range cost one pass over the nodes.
#[derive(Debug, Clone)]
pub struct KappaGrid {
    spec: PriorSpec,
    tau: f64,
    ln_tau2: f64,
    lo: f64,
    hi: f64,
    nodes: Vec<Node>,
    edges: OnceLock<SamplerEdges>,
}

impl KappaGrid {
    /// Builds a grid valid for every `x` with `|x| ≤ max |probe|`.
    pub fn build(tau: f64, spec: &PriorSpec, cfg: &QuadratureConfig, probes: &[f64]) -> Result<Self> {
        check_tau(tau)?;
        cfg.validate()?;
        let ln_tau2 = 2.0 * tau.ln();
        let ln_k = spec.k().ln();
        let a = spec.a();
        let log_integrand = |s: f64, x2: f64| {
            let u = s + ln_tau2;
            ln_k - a * s + spec.ln_l(s) + 0.5 * ln_sigmoid(-u) - 0.5 * sigmoid(-u) * x2
        };

        let x_max = probes.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let mut check: Vec<f64> = vec![0.0, 0.25 * x_max, 0.5 * x_max, 0.75 * x_max, x_max];
        check.extend(probes.iter().map(|x| x.abs()));
        check.sort_by(f64::total_cmp);
        check.dedup();
        if check.len() > 9 {
            // spread of probes is what matters; keep a representative subset
            let step = check.len() as f64 / 8.0;
            let mut sub: Vec<f64> = (0..8).map(|k| check[(k as f64 * step) as usize]).collect();
            sub.push(x_max);
            sub.dedup();
            check = sub;
        }

        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &x in &check {
            let x2 = x * x;
            let (l, h) = support(&|s| log_integrand(s, x2), ScanWindow::LOG_SCALE)?;
            lo = lo.min(l);
            hi = hi.max(h);
        }

        let mut breaks = vec![lo];
        let mut splits: Vec<f64> = cfg
            .split_points
            .iter()
            .map(|&k| ((1.0 - k) / k).ln() - ln_tau2)
            .filter(|&s| s > lo && s < hi)
            .collect();
        splits.sort_by(f64::total_cmp);
        breaks.extend(splits);
        breaks.push(hi);

        let mut grid = KappaGrid {
            spec: spec.clone(),
            tau,
            ln_tau2,
            lo,
            hi,
            nodes: Vec::new(),
            edges: OnceLock::new(),
        };
        let mut h = ((hi - lo) / cfg.node_count as f64).min(0.5);
        grid.nodes = lay_nodes(&breaks, h, ln_tau2, &log_integrand);
        let mut prev: Vec<KappaMoments> = check.iter().map(|&x| grid.moments(x)).collect();
        let mut achieved = f64::NAN;
        loop {
            h *= 0.5;
            let nodes = lay_nodes(&breaks, h, ln_tau2, &log_integrand);
            if nodes.len() > MAX_NODES {
                return Err(Error::Quadrature {
                    target: cfg.relative_tolerance,
                    achieved,
                    nodes: grid.nodes.len(),
                });
            }
            grid.nodes = nodes;
            let next: Vec<KappaMoments> = check.iter().map(|&x| grid.moments(x)).collect();
            achieved = max_change(&prev, &next);
            prev = next;
            if achieved <= cfg.relative_tolerance {
                return Ok(grid);
            }
        }
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// The `s = ln t` interval covered by the grid.
    pub fn range(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// Posterior moments of `κ` given `x` at this grid's `τ`.
    pub fn moments(&self, x: f64) -> KappaMoments {
        let half_x2 = 0.5 * x * x;
        let mut max = f64::NEG_INFINITY;
        let mut mode = 0;
        for (k, n) in self.nodes.iter().enumerate() {
            let lg = n.base - n.kappa * half_x2;
            if lg > max {
                max = lg;
                mode = k;
            }
        }
        // central moments are accumulated about the mode in whichever of κ
        // and 1-κ is small there, since that one carries full relative precision
        let use_kappa = self.nodes[mode].kappa < 0.5;
        let pick = |n: &Node| if use_kappa { n.kappa } else { n.omega };
        let origin = pick(&self.nodes[mode]);
        let (mut z, mut sk, mut sk2, mut sw, mut sw2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        let (mut sd, mut sd2, mut sd3) = (0.0, 0.0, 0.0);
        for n in &self.nodes {
            let p = (n.base - n.kappa * half_x2 - max).exp();
            let pk = p * n.kappa;
            let pw = p * n.omega;
            let d = pick(n) - origin;
            z += p;
            sk += pk;
            sk2 += pk * n.kappa;
            sw += pw;
            sw2 += pw * n.omega;
            sd += p * d;
            sd2 += p * d * d;
            sd3 += p * d * d * d;
        }
        let mean_d = sd / z;
        let (e2, e3) = (sd2 / z, sd3 / z);
        let mu3 = e3 - 3.0 * mean_d * e2 + 2.0 * mean_d.powi(3);
        KappaMoments {
            m1: sk / z,
            m2: sk2 / z,
            w: sw / z,
            w2: sw2 / z,
            var_kappa: (e2 - mean_d * mean_d).max(0.0),
            // ω = 1 - κ flips the sign of odd central moments
            mu3_kappa: if use_kappa { mu3 } else { -mu3 },
            log_norm: max + z.ln(),
        }
    }

    /// Cell edges over the grid's range with the `x`-free part of the log
    /// integrand, shared by every sampler built from this grid.
    fn edges(&self) -> &SamplerEdges {
        self.edges.get_or_init(|| {
            let ln_k = self.spec.k().ln();
            let a = self.spec.a();
            let width = (self.hi - self.lo) / SAMPLER_CELLS as f64;
            let (base, kappa) = (0..=SAMPLER_CELLS)
                .map(|k| {
                    let s = self.lo + k as f64 * width;
                    let u = s + self.ln_tau2;
                    (ln_k - a * s + self.spec.ln_l(s) + 0.5 * ln_sigmoid(-u), sigmoid(-u))
                })
                .unzip();
            SamplerEdges {
                s0: self.lo,
                width,
                base,
                kappa,
            }
        })
    }

    /// Inverse-CDF sampler for the posterior of `κ` (and `θ`) given `x`.
    pub fn sampler(&self, x: f64) -> KappaSampler {
        let half_x2 = 0.5 * x * x;
        let e = self.edges();
        let lg: Vec<f64> = e.base.iter().zip(&e.kappa).map(|(b, k)| b - k * half_x2).collect();
        let peak = lg.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let dens: Vec<f64> = lg
            .iter()
            .map(|&v| if v < peak - TRUNCATION_NATS { 0.0 } else { (v - peak).exp() })
            .collect();
        let mut cdf = Vec::with_capacity(SAMPLER_CELLS + 1);
        cdf.push(0.0);
        let mut acc = 0.0;
        let mut largest_cell: f64 = 0.0;
        for k in 0..SAMPLER_CELLS {
            let mass = 0.5 * (dens[k] + dens[k + 1]) * e.width;
            largest_cell = largest_cell.max(mass);
            acc += mass;
            cdf.push(acc);
        }
        let degenerate = !(acc > 0.0) || largest_cell >= acc * (1.0 - 1e-12);
        if acc > 0.0 {
            for c in cdf.iter_mut() {
                *c /= acc;
            }
        }
        KappaSampler {
            x,
            ln_tau2: self.ln_tau2,
            s0: e.s0,
            width: e.width,
            cdf,
            dens,
            total: acc,
            degenerate,
        }
    }
}

#[derive(Debug, Clone)]
struct SamplerEdges {
    s0: f64,
    width: f64,
    base: Vec<f64>,
    kappa: Vec<f64>,
}

fn lay_nodes<F: Fn(f64, f64) -> f64>(
    breaks: &[f64],
    h: f64,
    ln_tau2: f64,
    log_integrand: &F,
) -> Vec<Node> {
    let mut points: Vec<(f64, f64)> = Vec::new();
    for piece in breaks.windows(2) {
        let (a, b) = (piece[0], piece[1]);
        let n = ((b - a) / h).ceil().max(1.0) as usize;
        let step = (b - a) / n as f64;
        for k in 0..=n {
            let s = if k == n { b } else { a + k as f64 * step };
            let weight = if k == 0 || k == n { 0.5 * step } else { step };
            if k == 0 {
                if let Some(last) = points.last_mut() {
                    // breakpoint shared with the previous piece
                    last.1 += weight;
                    continue;
                }
            }
            points.push((s, weight));
        }
    }
    points
        .into_iter()
        .map(|(s, weight)| {
            let u = s + ln_tau2;
            Node {
                base: log_integrand(s, 0.0) + weight.ln(),
                kappa: sigmoid(-u),
                omega: sigmoid(u),
            }
        })
        .collect()
}

fn max_change(prev: &[KappaMoments], next: &[KappaMoments]) -> f64 {
    let rel = |a: f64, b: f64| {
        let scale = a.abs().max(b.abs());
        if scale == 0.0 {
            0.0
        } else {
            (a - b).abs() / scale
        }
    };
    prev.iter()
        .zip(next)
        .map(|(p, n)| {
            [
                (p.log_norm - n.log_norm).abs(),
                rel(p.m1, n.m1),
                rel(p.m2, n.m2),
                rel(p.w, n.w),
                rel(p.w2, n.w2),
                rel(p.var_kappa, n.var_kappa),
            ]
            .into_iter()
            .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// Inverse-CDF table over `s` for one `(x, τ)`: piecewise-linear density
/// between cell edges, so the CDF is piecewise quadratic and monotone.
#[derive(Debug, Clone)]
pub struct KappaSampler {
    x: f64,
    ln_tau2: f64,
    s0: f64,
    width: f64,
    cdf: Vec<f64>,
    dens: Vec<f64>,
    total: f64,
    degenerate: bool,
}

impl KappaSampler {
    /// True when all of the mass fell into a single cell; draws then sit at
    /// that cell's midpoint.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    fn draw_s<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        // first cell whose upper CDF reaches u; ties go to the lower cell
        let k = self.cdf[1..]
            .partition_point(|&c| c < u)
            .min(SAMPLER_CELLS - 1);
        if self.degenerate {
            return self.s0 + (k as f64 + 0.5) * self.width;
        }
        let residual = (u - self.cdf[k]) * self.total;
        let (f0, f1) = (self.dens[k], self.dens[k + 1]);
        let slope = (f1 - f0) / self.width;
        let disc = (f0 * f0 + 2.0 * slope * residual).max(0.0);
        let denom = f0 + disc.sqrt();
        let v = if denom > 0.0 { 2.0 * residual / denom } else { 0.5 * self.width };
        self.s0 + (k as f64 + v.clamp(0.0, self.width) / self.width) * self.width
    }

    /// One draw of `κ`.
    pub fn draw_kappa<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        sigmoid(-(self.draw_s(rng) + self.ln_tau2))
    }

    /// One draw of `θ`: `κ` from the table, then `θ ~ N((1-κ)x, 1-κ)`.
    pub fn draw_theta<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let omega = sigmoid(self.draw_s(rng) + self.ln_tau2);
        let z: f64 = rng.sample(StandardNormal);
        omega * self.x + omega.sqrt() * z
    }
}

/// Posterior moments of `κ` given `(x, τ)`.
pub fn kappa_moments(x: f64, tau: f64, spec: &PriorSpec, cfg: &QuadratureConfig) -> Result<KappaMoments> {
    Ok(KappaGrid::build(tau, spec, cfg, &[x])?.moments(x))
}

/// `T_τ(x) = E(1-κ | x, τ) x`.
pub fn posterior_mean_theta(x: f64, tau: f64, spec: &PriorSpec, cfg: &QuadratureConfig) -> Result<f64> {
    Ok(kappa_moments(x, tau, spec, cfg)?.posterior_mean(x))
}

/// `Var(θ | x, τ)` from `θ | κ, x, τ ~ N((1-κ)x, 1-κ)`.
pub fn posterior_var_theta(x: f64, tau: f64, spec: &PriorSpec, cfg: &QuadratureConfig) -> Result<f64> {
    Ok(kappa_moments(x, tau, spec, cfg)?.posterior_var(x))
}

/// Draws from the posterior of `θ` given `(x, τ)`.
#[derive(Debug, Clone)]
pub struct ThetaDraws {
    pub values: Vec<f64>,
    /// Set when the inverse-CDF table collapsed to one cell.
    pub degenerate: bool,
}

pub fn sample_theta<R: Rng + ?Sized>(
    x: f64,
    tau: f64,
    spec: &PriorSpec,
    cfg: &QuadratureConfig,
    rng: &mut R,
    count: usize,
) -> Result<ThetaDraws> {
    if count == 0 {
        return Err(Error::domain("sample count must be at least 1"));
    }
    let sampler = KappaGrid::build(tau, spec, cfg, &[x])?.sampler(x);
    if sampler.is_degenerate() {
        log::warn!("degenerate kappa CDF at x = {x}, tau = {tau}; using the cell midpoint");
    }
    Ok(ThetaDraws {
        values: (0..count).map(|_| sampler.draw_theta(rng)).collect(),
        degenerate: sampler.is_degenerate(),
    })
}

/// Upper bound on `E(1-κ | x, τ)` for priors with `a ≥ 1`:
///
/// ```text
/// τ² e^(x²/4) + K ∫₁^∞ [tτ²/(1+tτ²)] (1+tτ²)^(-1/2) t^(-a-1) L(t) e^((x²/2) tτ²/(1+tτ²)) dt
/// ```
///
/// The bound holds up to a factor `1 + o(1)` as `τ → 0`.
pub fn lemma1_upper_bound(x: f64, tau: f64, spec: &PriorSpec, cfg: &QuadratureConfig) -> Result<f64> {
    if spec.a() < 1.0 {
        return Err(Error::domain(format!(
            "bound requires a >= 1, got a = {}",
            spec.a()
        )));
    }
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidParameter {
            name: "tau",
            value: tau,
            reason: "must lie in (0, 1)",
        });
    }
    let ln_tau2 = 2.0 * tau.ln();
    let a = spec.a();
    let half_x2 = 0.5 * x * x;
    let ln_tail = integrate_ln_half_line(
        |s| {
            let u = s + ln_tau2;
            ln_sigmoid(u) + 0.5 * ln_sigmoid(-u) - a * s + spec.ln_l(s) + half_x2 * sigmoid(u)
        },
        0.0,
        cfg,
    )?;
    let first = ln_tau2 + 0.25 * x * x;
    Ok(log_add_exp(first, spec.k().ln() + ln_tail).exp())
}

/// `K M / (a(1-a)) · τ^(2a) · e^(x²/2)`, the small-τ envelope on the
/// shrinkage weight for `a ∈ (0, 1)`.
pub fn small_tau_weight_bound(x: f64, tau: f64, spec: &PriorSpec) -> Result<f64> {
    let a = spec.a();
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::domain(format!("envelope requires 0 < a < 1, got {a}")));
    }
    Ok(spec.k() * spec.m() / (a * (1.0 - a)) * (2.0 * a * tau.ln() + 0.5 * x * x).exp())
}
