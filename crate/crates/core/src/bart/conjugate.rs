//! Closed-form pieces of the Gibbs sampler: leaf marginal likelihood and the
//! conjugate draws for leaf values, variances and group intercepts.

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

/// Sufficient statistics of the residuals falling in one leaf.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LeafStats {
    pub n: usize,
    pub sum: f64,
    pub sum_sq: f64,
}

impl LeafStats {
    pub fn from_residuals(r: &[f64]) -> Self {
        let mut s = Self::default();
        for &x in r {
            s.push(x);
        }
        s
    }

    #[inline]
    pub fn push(&mut self, r: f64) {
        self.n += 1;
        self.sum += r;
        self.sum_sq += r * r;
    }

    pub fn merge(&self, other: &Self) -> Self {
        Self {
            n: self.n + other.n,
            sum: self.sum + other.sum,
            sum_sq: self.sum_sq + other.sum_sq,
        }
    }
}

/// `log ∫ Π N(r_i | μ, σ²) N(μ | 0, σ_μ²) dμ`.
pub fn leaf_marginal_loglik(stats: &LeafStats, sigma2: f64, sigma_mu2: f64) -> f64 {
    if stats.n == 0 {
        return 0.0;
    }
    let n = stats.n as f64;
    let post_prec = n / sigma2 + 1.0 / sigma_mu2;
    let post_var = 1.0 / post_prec;
    let post_mean = post_var * stats.sum / sigma2;
    -0.5 * n * (2.0 * std::f64::consts::PI * sigma2).ln() - 0.5 * stats.sum_sq / sigma2
        + 0.5 * (post_var / sigma_mu2).ln()
        + 0.5 * post_mean * post_mean / post_var
}

/// Posterior mean and variance of a leaf value.
pub fn leaf_posterior(stats: &LeafStats, sigma2: f64, sigma_mu2: f64) -> (f64, f64) {
    let var = 1.0 / (stats.n as f64 / sigma2 + 1.0 / sigma_mu2);
    (var * stats.sum / sigma2, var)
}

/// Draws a leaf value from `N(m*, v*)`, `v* = 1/(n/σ² + 1/σ_μ²)`,
/// `m* = v* Σr / σ²`.
pub fn draw_leaf_mu<R: Rng + ?Sized>(stats: &LeafStats, sigma2: f64, sigma_mu2: f64, rng: &mut R) -> f64 {
    let (m, v) = leaf_posterior(stats, sigma2, sigma_mu2);
    let z: f64 = rng.sample(StandardNormal);
    m + v.sqrt() * z
}

/// Draws from a scaled inverse-χ² with `nu` degrees of freedom and scale
/// `scale`, i.e. `nu * scale / X` with `X ~ χ²_nu`.
pub fn draw_scaled_inv_chi2<R: Rng + ?Sized>(nu: f64, scale: f64, rng: &mut R) -> f64 {
    let x = ChiSquared::new(nu).expect("positive degrees of freedom").sample(rng);
    nu * scale / x
}

/// Conjugate update of a scaled inverse-χ²(`nu`, `lambda`) prior by `n`
/// residuals with sum of squares `sum_sq`.
pub fn draw_sigma2<R: Rng + ?Sized>(sum_sq: f64, n: usize, nu: f64, lambda: f64, rng: &mut R) -> f64 {
    let post_nu = nu + n as f64;
    draw_scaled_inv_chi2(post_nu, (nu * lambda + sum_sq) / post_nu, rng)
}

/// Per-group residual totals.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GroupStats {
    pub n: Vec<usize>,
    pub sum: Vec<f64>,
}

impl GroupStats {
    pub fn new(n_groups: usize) -> Self {
        Self {
            n: vec![0; n_groups],
            sum: vec![0.0; n_groups],
        }
    }

    pub fn from_residuals(groups: &[usize], residuals: &[f64], n_groups: usize) -> Self {
        let mut s = Self::new(n_groups);
        for (&g, &r) in groups.iter().zip(residuals) {
            s.n[g] += 1;
            s.sum[g] += r;
        }
        s
    }
}

/// Independent draws `u_g ~ N(v_g Σ_g r / σ², v_g)` with
/// `v_g = 1/(n_g/σ² + 1/σ_u²)`. A zero `sigma_u2` pins every `u_g` at 0.
pub fn draw_group_effects<R: Rng + ?Sized>(stats: &GroupStats, sigma2: f64, sigma_u2: f64, rng: &mut R) -> Vec<f64> {
    stats
        .n
        .iter()
        .zip(&stats.sum)
        .map(|(&n, &sum)| {
            if sigma_u2 <= 0.0 {
                return 0.0;
            }
            let v = 1.0 / (n as f64 / sigma2 + 1.0 / sigma_u2);
            let z: f64 = rng.sample(StandardNormal);
            v * sum / sigma2 + v.sqrt() * z
        })
        .collect()
}

/// Scaled inverse-χ² prior on the group-effect variance.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct VariancePrior {
    pub nu: f64,
    pub lambda: f64,
}

impl Default for VariancePrior {
    fn default() -> Self {
        Self { nu: 1.0, lambda: 1.0 }
    }
}

/// Conjugate update of the group-effect variance by the current `u`.
pub fn draw_sigma_u2<R: Rng + ?Sized>(u: &[f64], prior: &VariancePrior, rng: &mut R) -> f64 {
    let sum_sq: f64 = u.iter().map(|x| x * x).sum();
    draw_sigma2(sum_sq, u.len(), prior.nu, prior.lambda, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn moments(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    /// Trapezoidal quadrature of the leaf integral over μ on a wide grid.
    fn marginal_by_quadrature(r: &[f64], sigma2: f64, sigma_mu2: f64) -> f64 {
        let normal_logpdf =
            |x: f64, m: f64, v: f64| -0.5 * (2.0 * std::f64::consts::PI * v).ln() - 0.5 * (x - m).powi(2) / v;
        let (lo, hi, steps) = (-10.0, 10.0, 400_000);
        let h = (hi - lo) / steps as f64;
        let mut total = 0.0;
        for k in 0..=steps {
            let mu = lo + k as f64 * h;
            let logf: f64 =
                r.iter().map(|&x| normal_logpdf(x, mu, sigma2)).sum::<f64>() + normal_logpdf(mu, 0.0, sigma_mu2);
            let w = if k == 0 || k == steps { 0.5 } else { 1.0 };
            total += w * logf.exp();
        }
        (total * h).ln()
    }

    #[test]
    fn marginal_empty_leaf_is_zero() {
        assert_eq!(leaf_marginal_loglik(&LeafStats::default(), 1.0, 1.0), 0.0);
    }

    #[test]
    fn marginal_single_zero_residual() {
        let v = leaf_marginal_loglik(&LeafStats::from_residuals(&[0.0]), 1.0, 1.0);
        assert!((v - (-0.5 * (4.0 * std::f64::consts::PI).ln())).abs() < 1e-14);
    }

    #[test]
    fn marginal_matches_quadrature() {
        let r = [0.3, -0.1];
        let closed = leaf_marginal_loglik(&LeafStats::from_residuals(&r), 0.5, 0.04);
        let quad = marginal_by_quadrature(&r, 0.5, 0.04);
        assert!((closed - quad).abs() < 1e-6, "{closed} vs {quad}");
    }

    #[test]
    fn leaf_draw_prior_when_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<f64> = (0..20_000)
            .map(|_| draw_leaf_mu(&LeafStats::default(), 1.0, 4.0, &mut rng))
            .collect();
        let (m, v) = moments(&xs);
        assert!(m.abs() < 3.0 * (4.0f64 / 20_000.0).sqrt());
        assert!((v - 4.0).abs() < 0.2);
    }

    #[test]
    fn leaf_draw_flat_prior_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let stats = LeafStats::from_residuals(&[1.0; 4]);
        let xs: Vec<f64> = (0..10_000)
            .map(|_| draw_leaf_mu(&stats, 1.0, f64::INFINITY, &mut rng))
            .collect();
        let (m, _) = moments(&xs);
        // posterior sd is 0.5; MC sd of the mean is 0.5 / 100
        assert!((m - 1.0).abs() < 3.0 * 0.005, "mean {m}");
    }

    #[test]
    fn leaf_draw_conjugate_moments() {
        let stats = LeafStats::from_residuals(&[2.0]);
        let (m, v) = leaf_posterior(&stats, 1.0, 1.0);
        assert_eq!((m, v), (1.0, 0.5));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<f64> = (0..10_000).map(|_| draw_leaf_mu(&stats, 1.0, 1.0, &mut rng)).collect();
        let (em, ev) = moments(&xs);
        assert!((em - 1.0).abs() < 3.0 * (0.5f64 / 10_000.0).sqrt());
        // sd of the sample variance is v*sqrt(2/(n-1))
        assert!((ev - 0.5).abs() < 3.0 * 0.5 * (2.0f64 / 9_999.0).sqrt());
    }

    #[test]
    fn sigma2_prior_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        // nu = 5 keeps the prior variance finite for the MC check
        let (nu, lambda) = (5.0, 1.0);
        let xs: Vec<f64> = (0..10_000).map(|_| draw_sigma2(0.0, 0, nu, lambda, &mut rng)).collect();
        let (m, v) = moments(&xs);
        let target = nu * lambda / (nu - 2.0);
        assert!((m - target).abs() < 3.0 * (v / 10_000.0).sqrt(), "{m} vs {target}");
    }

    #[test]
    fn sigma2_posterior_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let xs: Vec<f64> = (0..50_000).map(|_| draw_sigma2(20.0, 10, 3.0, 1.0, &mut rng)).collect();
        let (m, v) = moments(&xs);
        // scaled inverse chi-square with 13 df and scale 23/13
        assert!((m - 23.0 / 11.0).abs() < 3.0 * (v / 50_000.0).sqrt(), "{m}");
    }

    #[test]
    fn sigma2_data_dominated_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xs: Vec<f64> = (0..5_000)
            .map(|_| draw_sigma2(100.0, 100, 1e-9, 1.0, &mut rng))
            .collect();
        let (m, _) = moments(&xs);
        assert!((m - 1.0).abs() < 0.05, "{m}");
    }

    #[test]
    fn group_effects_degenerate_prior() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let stats = GroupStats::from_residuals(&[0, 0, 1], &[1.0, 2.0, 3.0], 2);
        assert_eq!(draw_group_effects(&stats, 1.0, 0.0, &mut rng), vec![0.0, 0.0]);
    }

    #[test]
    fn empty_group_draws_from_prior() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let stats = GroupStats::new(1);
        let xs: Vec<f64> = (0..20_000)
            .map(|_| draw_group_effects(&stats, 1.0, 2.0, &mut rng)[0])
            .collect();
        let (m, v) = moments(&xs);
        assert!(m.abs() < 3.0 * (2.0f64 / 20_000.0).sqrt());
        assert!((v - 2.0).abs() < 0.1);
    }

    #[test]
    fn group_effect_conjugate_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let stats = GroupStats::from_residuals(&[0, 0], &[1.0, 1.0], 1);
        let xs: Vec<f64> = (0..10_000)
            .map(|_| draw_group_effects(&stats, 1.0, 1.0, &mut rng)[0])
            .collect();
        let (m, v) = moments(&xs);
        assert!((m - 2.0 / 3.0).abs() < 3.0 * (1.0f64 / 3.0 / 10_000.0).sqrt());
        assert!((v - 1.0 / 3.0).abs() < 3.0 * (1.0 / 3.0) * (2.0f64 / 9_999.0).sqrt());
    }

    fn median(mut xs: Vec<f64>) -> f64 {
        xs.sort_by(f64::total_cmp);
        xs[xs.len() / 2]
    }

    #[test]
    fn sigma_u2_shrinks_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let prior = VariancePrior::default();
        let u = vec![0.0; 500];
        let xs: Vec<f64> = (0..2_000).map(|_| draw_sigma_u2(&u, &prior, &mut rng)).collect();
        assert!(median(xs) < prior.lambda);
    }

    #[test]
    fn sigma_u2_recovers_simulated_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let u: Vec<f64> = (0..500).map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let xs: Vec<f64> = (0..5_000)
            .map(|_| draw_sigma_u2(&u, &VariancePrior::default(), &mut rng))
            .collect();
        let med = median(xs);
        assert!((3.2..=4.8).contains(&med), "{med}");
    }

    #[test]
    fn sigma_u2_single_group_prior_dominated() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let prior = VariancePrior::default();
        let prior_draws: Vec<f64> = (0..20_000)
            .map(|_| draw_scaled_inv_chi2(prior.nu, prior.lambda, &mut rng))
            .collect();
        let post_draws: Vec<f64> = (0..20_000).map(|_| draw_sigma_u2(&[1.0], &prior, &mut rng)).collect();
        let (a, b) = (median(prior_draws), median(post_draws));
        let ratio = a.max(b) / a.min(b);
        assert!(ratio < 2.0, "prior median {a}, posterior median {b}");
    }
}
