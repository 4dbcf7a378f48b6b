//! Single-chain effective sample size with Geyer's initial positive
//! sequence, made monotone.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ess {
    pub value: f64,
    /// The series was constant; `value` is then its length by convention.
    pub degenerate: bool,
}

pub const MIN_ESS_LEN: usize = 10;

/// Effective sample size of `series`, capped at its length.
pub fn ess(series: &[f64]) -> Result<Ess> {
    let n = series.len();
    if n < MIN_ESS_LEN {
        return Err(Error::Data(format!("ESS needs at least {MIN_ESS_LEN} values, got {n}")));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite value in ESS series".into()));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let dev: Vec<f64> = series.iter().map(|v| v - mean).collect();
    let autocov = |lag: usize| dev[..n - lag].iter().zip(&dev[lag..]).map(|(a, b)| a * b).sum::<f64>() / n as f64;
    let var = autocov(0);
    if var <= f64::EPSILON * mean.abs().max(1.0).powi(2) * 1e-4 {
        return Ok(Ess {
            value: n as f64,
            degenerate: true,
        });
    }

    // Γ_m = ρ_{2m} + ρ_{2m+1}; sum while positive, forcing monotone decrease.
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut m = 0;
    while 2 * m + 1 < n {
        let pair = (autocov(2 * m) + autocov(2 * m + 1)) / var;
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev);
        sum += pair;
        prev = pair;
        m += 1;
    }
    let tau = (2.0 * sum - 1.0).max(1.0 / n as f64);
    Ok(Ess {
        value: (n as f64 / tau).min(n as f64),
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::std_normal;
    use crate::rng::{stream, Block};

    #[test]
    fn white_noise() {
        let mut rng = stream(1, Block::Init);
        let xs: Vec<f64> = (0..10_000).map(|_| std_normal(&mut rng)).collect();
        let e = ess(&xs).unwrap();
        let ratio = e.value / xs.len() as f64;
        assert!((0.8..=1.2).contains(&ratio), "{ratio}");
        assert!(!e.degenerate);
    }

    #[test]
    fn ar1_matches_analytic_ratio() {
        // τ = (1 + φ)/(1 − φ) for AR(1)
        let phi: f64 = 0.9;
        let want = (1.0 - phi) / (1.0 + phi);
        for seed in 0..3 {
            let mut rng = stream(seed, Block::Init);
            let mut x = 0.0;
            let xs: Vec<f64> = (0..10_000)
                .map(|_| {
                    x = phi * x + (1.0 - phi * phi).sqrt() * std_normal(&mut rng);
                    x
                })
                .collect();
            let ratio = ess(&xs).unwrap().value / xs.len() as f64;
            assert!((ratio - want).abs() < 0.5 * want, "{ratio} vs {want}");
        }
    }

    #[test]
    fn constant_series_is_flagged() {
        let e = ess(&[3.0; 50]).unwrap();
        assert_eq!(e.value, 50.0);
        assert!(e.degenerate);
    }

    #[test]
    fn short_series_rejected() {
        assert!(ess(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn bounded_by_length() {
        // strongly antithetic series
        let xs: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let e = ess(&xs).unwrap();
        assert!(e.value > 0.0 && e.value <= 100.0);
    }
}
