//! Log densities and variate generators used by the model.
//!
//! Variates are produced in `f64`; callers convert to their scalar type.

use rand::Rng;
use rand_distr::{Beta, Distribution, Exp, Gamma, Poisson, StandardNormal};
use statrs::function::gamma::ln_gamma;

use crate::scalar::Real;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// log N(x; mean, var).
#[inline]
pub fn ln_normal<T: Real>(x: T, mean: T, var: T) -> T {
    let r = x - mean;
    -T::of(0.5) * (T::of(LN_2PI) + var.ln()) - r * r / (T::of(2.0) * var)
}

/// log IG(x; shape, rate) with density ∝ x^{−shape−1} exp(−rate/x).
pub fn ln_inv_gamma<T: Real>(x: T, shape: T, rate: T) -> T {
    shape * rate.ln() - T::of(ln_gamma(shape.as_f64())) - (shape + T::one()) * x.ln() - rate / x
}

/// log Beta(x; a, b).
pub fn ln_beta_density<T: Real>(x: T, a: T, b: T) -> T {
    let (af, bf) = (a.as_f64(), b.as_f64());
    let ln_b = ln_gamma(af) + ln_gamma(bf) - ln_gamma(af + bf);
    (a - T::one()) * x.ln() + (b - T::one()) * (T::one() - x).ln() - T::of(ln_b)
}

pub fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

pub fn normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, sd: f64) -> f64 {
    mean + sd * std_normal(rng)
}

/// Draw from IG(shape, rate) as the reciprocal of a Gamma(shape, 1/rate).
pub fn inv_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64, rate: f64) -> f64 {
    let g: f64 = Gamma::new(shape, 1.0 / rate)
        .expect("positive gamma parameters")
        .sample(rng);
    1.0 / g.max(f64::MIN_POSITIVE)
}

/// Beta draw kept strictly inside (0, 1).
pub fn beta<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    let x: f64 = Beta::new(a, b).expect("positive beta parameters").sample(rng);
    x.clamp(f64::EPSILON, 1.0 - f64::EPSILON)
}

pub fn poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    if !(mean > 1e-300) {
        return 0;
    }
    let x: f64 = Poisson::new(mean).expect("finite poisson mean").sample(rng);
    x as u64
}

/// N(mean, sd²) truncated to (0, ∞).
///
/// Plain rejection when the bound is at most half a standard deviation above
/// the mean, otherwise Robert's translated-exponential proposal, which keeps
/// the acceptance rate bounded in the far tail.
pub fn positive_truncated_normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, sd: f64) -> f64 {
    let lower = -mean / sd;
    loop {
        let z = if lower < 0.5 {
            let z = std_normal(rng);
            if z < lower {
                continue;
            }
            z
        } else {
            let rate = 0.5 * (lower + (lower * lower + 4.0).sqrt());
            let z = lower + Exp::new(rate).expect("positive rate").sample(rng);
            let u: f64 = rng.random();
            if u > (-0.5 * (z - rate) * (z - rate)).exp() {
                continue;
            }
            z
        };
        let x = mean + sd * z;
        if x > 0.0 {
            return x;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Block};

    #[test]
    fn normal_density_at_mean() {
        let v: f64 = ln_normal(0.0, 0.0, 2.0);
        assert!((v - (-0.5 * (4.0 * std::f64::consts::PI).ln())).abs() < 1e-14);
    }

    #[test]
    fn inv_gamma_density_integrates_to_one() {
        // Trapezoid rule on a log-spaced grid.
        let (a, b) = (2.5f64, 1.5f64);
        let xs: Vec<f64> = (0..200_000)
            .map(|i| (-12.0 + 24.0 * i as f64 / 200_000.0).exp())
            .collect();
        let mut total = 0.0;
        for w in xs.windows(2) {
            let f0 = ln_inv_gamma(w[0], a, b).exp();
            let f1 = ln_inv_gamma(w[1], a, b).exp();
            total += 0.5 * (f0 + f1) * (w[1] - w[0]);
        }
        assert!((total - 1.0).abs() < 1e-6, "{total}");
    }

    #[test]
    fn beta_uniform_density_is_zero() {
        assert!(ln_beta_density(0.3f64, 1.0, 1.0).abs() < 1e-15);
    }

    #[test]
    fn truncated_normal_moments() {
        let mut rng = stream(3, Block::Init);
        for &(m, s) in &[(0.0, 1.0), (-3.0, 1.0), (2.0, 0.5), (-40.0, 2.0)] {
            let draws: Vec<f64> = (0..40_000).map(|_| positive_truncated_normal(&mut rng, m, s)).collect();
            assert!(draws.iter().all(|&x| x > 0.0));
            // E[X | X > 0] = m + s φ(a)/(1 − Φ(a)), a = −m/s
            let a = -m / s;
            let phi = (-0.5 * a * a).exp() / (2.0 * std::f64::consts::PI).sqrt();
            let tail = 0.5 * statrs::function::erf::erfc(a / 2f64.sqrt());
            let want = m + s * phi / tail;
            let got = draws.iter().sum::<f64>() / draws.len() as f64;
            let tol = 5.0 * s / (draws.len() as f64).sqrt();
            assert!(
                (got - want).abs() < tol.max(1e-3 * want.abs()),
                "m={m} s={s} got {got} want {want}"
            );
        }
    }

    #[test]
    fn inv_gamma_mean() {
        let mut rng = stream(4, Block::Init);
        let draws: Vec<f64> = (0..100_000).map(|_| inv_gamma(&mut rng, 4.0, 3.0)).collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        // mean b/(a−1) = 1, sd = 1/sqrt(2)
        assert!((mean - 1.0).abs() < 5.0 * std::f64::consts::FRAC_1_SQRT_2 / (1e5f64).sqrt());
    }
}
