//! Truncated-normal draws for probit data augmentation.

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

/// Draws `x ~ N(0, 1)` conditioned on `x >= a`.
///
/// Naive rejection for `a <= 0` (acceptance at least one half); for `a > 0`
/// an exponential proposal with the optimal rate, which stays efficient and
/// finite arbitrarily far into the tail.
pub fn std_normal_lower<R: Rng + ?Sized>(a: f64, rng: &mut R) -> f64 {
    if a <= 0.0 {
        loop {
            let x: f64 = rng.sample(StandardNormal);
            if x >= a {
                return x;
            }
        }
    }
    let rate = 0.5 * (a + (a * a + 4.0).sqrt());
    let exp = Exp::new(rate).expect("positive rate");
    loop {
        let x = a + exp.sample(rng);
        let accept = (-0.5 * (x - rate) * (x - rate)).exp();
        if rng.random::<f64>() <= accept {
            return x;
        }
    }
}

/// Latent utility for a binary response: `N(fit, 1)` truncated to `[0, ∞)`
/// when `y = 1` and to `(-∞, 0)` when `y = 0`.
pub fn draw_latent_probit<R: Rng + ?Sized>(y: u8, fit: f64, rng: &mut R) -> f64 {
    if y == 1 {
        fit + std_normal_lower(-fit, rng)
    } else {
        loop {
            let z = fit - std_normal_lower(fit, rng);
            if z < 0.0 {
                return z;
            }
        }
    }
}
