//! Plug-in estimate of the global scale and the resulting empirical-Bayes
//! estimator.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{KappaGrid, KappaMoments};
use crate::prior::PriorSpec;
use crate::quadrature::QuadratureConfig;
use crate::special::pairwise_sum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EbConfig {
    pub c1: f64,
    pub c2: f64,
}

impl Default for EbConfig {
    fn default() -> Self {
        EbConfig { c1: 2.0, c2: 1.0 }
    }
}

impl EbConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c1 >= 2.0) {
            return Err(Error::InvalidParameter {
                name: "c1",
                value: self.c1,
                reason: "must satisfy c1 >= 2",
            });
        }
        if !(self.c2 >= 1.0) {
            return Err(Error::InvalidParameter {
                name: "c2",
                value: self.c2,
                reason: "must satisfy c2 >= 1",
            });
        }
        Ok(())
    }
}

/// `τ̂ = max{1/n, #{|X_i| > √(c1 log n)} / (c2 n)}`.
pub fn estimate_tau(x: &[f64], cfg: &EbConfig) -> Result<f64> {
    cfg.validate()?;
    let n = x.len();
    if n < 2 {
        return Err(Error::domain(format!("need at least 2 observations, got {n}")));
    }
    let nf = n as f64;
    let threshold = (cfg.c1 * nf.ln()).sqrt();
    let count = x.iter().filter(|v| v.abs() > threshold).count();
    Ok((count as f64 / (cfg.c2 * nf)).max(1.0 / nf))
}

/// Moments of `κ_i` at one `τ` for every coordinate. Repeated `|x|` values
/// share a single evaluation.
pub fn moments_at_tau(
    x: &[f64],
    tau: f64,
    spec: &PriorSpec,
    quad: &QuadratureConfig,
) -> Result<Vec<KappaMoments>> {
    let mut distinct: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let grid = KappaGrid::build(tau, spec, quad, &distinct)?;
    let table: Vec<KappaMoments> = distinct.par_iter().map(|&v| grid.moments(v)).collect();
    Ok(x.iter()
        .map(|v| {
            let k = distinct.partition_point(|&d| d < v.abs());
            table[k]
        })
        .collect())
}

/// Posterior means `T_τ̂(X_i)`.
pub fn eb_estimate(
    x: &[f64],
    spec: &PriorSpec,
    cfg: &EbConfig,
    quad: &QuadratureConfig,
) -> Result<Vec<f64>> {
    let tau = estimate_tau(x, cfg)?;
    let m = moments_at_tau(x, tau, spec, quad)?;
    Ok(x.iter().zip(&m).map(|(&xi, mi)| mi.posterior_mean(xi)).collect())
}

/// `Σ_i Var(θ_i | X_i, τ̂)`.
pub fn eb_total_posterior_variance(
    x: &[f64],
    spec: &PriorSpec,
    cfg: &EbConfig,
    quad: &QuadratureConfig,
) -> Result<f64> {
    let tau = estimate_tau(x, cfg)?;
    let m = moments_at_tau(x, tau, spec, quad)?;
    let v: Vec<f64> = x.iter().zip(&m).map(|(&xi, mi)| mi.posterior_var(xi)).collect();
    Ok(pairwise_sum(&v))
}

/// Monte Carlo estimate of `Π_τ̂(‖θ - θ0‖² > radius | X)`.
pub fn eb_contraction_probability<R: Rng + ?Sized>(
    x: &[f64],
    theta0: &[f64],
    radius: f64,
    spec: &PriorSpec,
    cfg: &EbConfig,
    quad: &QuadratureConfig,
    rng: &mut R,
    draws: usize,
) -> Result<f64> {
    let tau = estimate_tau(x, cfg)?;
    let sq = squared_distance_draws(x, theta0, tau, spec, quad, rng, draws)?;
    Ok(exceedance_fraction(&sq, radius))
}

/// `‖θ^(r) - center‖²` for `draws` joint posterior draws at a fixed `τ`.
pub fn squared_distance_draws<R: Rng + ?Sized>(
    x: &[f64],
    center: &[f64],
    tau: f64,
    spec: &PriorSpec,
    quad: &QuadratureConfig,
    rng: &mut R,
    draws: usize,
) -> Result<Vec<f64>> {
    if x.len() != center.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: center.len(),
        });
    }
    if draws < 1000 {
        return Err(Error::domain(format!("need at least 1000 draws, got {draws}")));
    }
    let grid = KappaGrid::build(tau, spec, quad, x)?;
    let mut sq = vec![0.0; draws];
    for (&xi, &ci) in x.iter().zip(center) {
        let sampler = grid.sampler(xi);
        for acc in sq.iter_mut() {
            let d = sampler.draw_theta(rng) - ci;
            *acc += d * d;
        }
    }
    Ok(sq)
}

/// Fraction of draws strictly above `radius`.
pub fn exceedance_fraction(squared: &[f64], radius: f64) -> f64 {
    squared.iter().filter(|&&d| d > radius).count() as f64 / squared.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{kappa_moments, posterior_mean_theta};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tau_hat_examples() {
        let cfg = EbConfig::default();
        assert_eq!(estimate_tau(&[0.1, -0.2, 0.3, 0.05], &cfg).unwrap(), 0.25);
        let mut x = vec![0.0; 100];
        for v in x.iter_mut().take(30) {
            *v = 3.1;
        }
        assert!((estimate_tau(&x, &cfg).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(estimate_tau(&[50.0; 10], &cfg).unwrap(), 1.0);
        assert!(estimate_tau(&[1.0], &cfg).is_err());
        assert!(estimate_tau(&[1.0, 2.0], &EbConfig { c1: 1.5, c2: 1.0 }).is_err());
        assert!(estimate_tau(&[1.0, 2.0], &EbConfig { c1: 2.0, c2: 0.5 }).is_err());
    }

    #[test]
    fn threshold_is_strict() {
        let n = 100usize;
        let thr = (2.0 * (n as f64).ln()).sqrt();
        let mut x = vec![0.0; n];
        x[0] = thr;
        assert_eq!(estimate_tau(&x, &EbConfig::default()).unwrap(), 0.01);
        x[0] = thr * (1.0 + 1e-15);
        assert_eq!(estimate_tau(&x, &EbConfig::default()).unwrap(), 0.01);
        x[1] = thr + 1e-9;
        x[2] = thr + 1e-9;
        assert_eq!(estimate_tau(&x, &EbConfig::default()).unwrap(), 0.03);
    }

    #[test]
    fn tau_hat_invariant_to_signs_and_order() {
        let x = [4.0, -0.3, 3.5, 0.0, -5.0, 1.0];
        let mut y: Vec<f64> = x.iter().rev().map(|v| -v).collect();
        y.rotate_left(2);
        let cfg = EbConfig::default();
        assert_eq!(estimate_tau(&x, &cfg).unwrap(), estimate_tau(&y, &cfg).unwrap());
    }

    #[test]
    fn estimate_of_zero_vector_is_zero() {
        let est = eb_estimate(&[0.0; 20], &PriorSpec::horseshoe(), &EbConfig::default(), &QuadratureConfig::default())
            .unwrap();
        assert!(est.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn selective_shrinkage() {
        let mut x = vec![0.0; 100];
        x[0] = 10.0;
        let q = QuadratureConfig::default();
        let est = eb_estimate(&x, &PriorSpec::horseshoe(), &EbConfig::default(), &q).unwrap();
        assert!((est[0] - 10.0).abs() < 1.0, "{}", est[0]);
        assert!(est[1..].iter().all(|v| v.abs() < 0.1));
        // matches the single-point kernel at τ̂ = 1/100
        let direct = posterior_mean_theta(10.0, 0.01, &PriorSpec::horseshoe(), &q).unwrap();
        assert!((est[0] - direct).abs() < 1e-9 * direct);
    }

    #[test]
    fn estimate_is_odd() {
        let x = [0.3, -2.0, 4.5, 7.0, -0.1, 3.2];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let hs = PriorSpec::horseshoe();
        let (cfg, q) = (EbConfig::default(), QuadratureConfig::default());
        let a = eb_estimate(&x, &hs, &cfg, &q).unwrap();
        let b = eb_estimate(&neg, &hs, &cfg, &q).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert_eq!(*u, -*v);
        }
    }

    #[test]
    fn total_variance_bounds() {
        let hs = PriorSpec::horseshoe();
        let (cfg, q) = (EbConfig::default(), QuadratureConfig::default());
        let total = eb_total_posterior_variance(&[0.0; 100], &hs, &cfg, &q).unwrap();
        let w0 = kappa_moments(0.0, 0.01, &hs, &q).unwrap().w;
        assert!((total - 100.0 * w0).abs() < 1e-9 * total);
        let x = [0.5, 3.0, -6.0, 9.0, 0.0, 1.5];
        let total = eb_total_posterior_variance(&x, &hs, &cfg, &q).unwrap();
        assert!(total > 0.0 && total <= x.iter().map(|v| 1.0 + v * v).sum::<f64>());
    }

    #[test]
    fn contraction_extremes() {
        let hs = PriorSpec::horseshoe();
        let (cfg, q) = (EbConfig::default(), QuadratureConfig::default());
        let x = [0.2, -1.0, 6.0, 0.0];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p0 = eb_contraction_probability(&x, &[0.0; 4], 0.0, &hs, &cfg, &q, &mut rng, 1000).unwrap();
        assert_eq!(p0, 1.0);
        let p1 = eb_contraction_probability(&x, &[0.0; 4], 1e18, &hs, &cfg, &q, &mut rng, 1000).unwrap();
        assert_eq!(p1, 0.0);
        assert!(eb_contraction_probability(&x, &[0.0; 4], 1.0, &hs, &cfg, &q, &mut rng, 10).is_err());
    }
}
