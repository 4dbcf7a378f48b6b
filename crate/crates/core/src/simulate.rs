//! Synthetic ground truth and data for the latent-space model.
//!
//! Generators are pure functions of their arguments and seed. The
//! `sample_*` variants take a caller-owned RNG and are what the Geweke test
//! uses; the `gen_*` variants derive a dedicated stream from a seed.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dist;
use crate::error::{Error, Result};
use crate::likelihood::{sq_dist_cols, InterpData};
use crate::matrix::Matrix;
use crate::model::{
    check_dim, position_prior_variance, Cell, Hyperparams, LatentState, LoadingState, RestrictionKind,
    RestrictionPattern, WeightedNetwork,
};
use crate::rng::{stream, Block};
use crate::sampler::ChainState;
use crate::scalar::Real;

/// Knobs of the ground-truth generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthOptions {
    /// Rows of Λ forced to zero. Only rows without a positive pivot qualify.
    pub zero_rows: usize,
    pub kappa: f64,
    pub col_scale: f64,
    pub idio_var: f64,
    /// Nonzero loadings are redrawn until their magnitude reaches this.
    pub min_abs_loading: f64,
    /// Window for the expected mean edge weight; α is drawn from its prior
    /// truncated to the matching interval.
    pub mean_weight_range: (f64, f64),
    pub sigma2_alpha: f64,
}

impl Default for TruthOptions {
    fn default() -> Self {
        TruthOptions {
            zero_rows: 1,
            kappa: 1.0,
            col_scale: 1.0,
            idio_var: 0.25,
            min_abs_loading: 0.5,
            mean_weight_range: (0.5, 5.0),
            sigma2_alpha: 10.0,
        }
    }
}

/// Generated ground truth and the settings that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Truth<T> {
    pub n: usize,
    pub d: usize,
    pub p: usize,
    pub seed: u64,
    pub restriction: RestrictionKind,
    /// 1-based rows of Λ that are identically zero.
    pub zero_rows: Vec<usize>,
    pub expected_mean_weight: f64,
    pub options: TruthOptions,
    pub latent: LatentState<T>,
    pub loadings: LoadingState<T>,
}

/// Mean over pairs of exp(α − D_ij).
fn expected_mean_weight<T: Real>(lat: &LatentState<T>) -> f64 {
    let n = lat.n();
    let (mut sum, mut count) = (0.0, 0usize);
    for i in 0..n {
        for j in i + 1..n {
            sum += (lat.alpha - sq_dist_cols(&lat.positions, i, j)).as_f64().exp();
            count += 1;
        }
    }
    sum / count as f64
}

fn sample_positions<T: Real, R: Rng + ?Sized>(rng: &mut R, d: usize, n: usize) -> Result<LatentState<T>> {
    let sd = position_prior_variance::<f64>(d).sqrt();
    let positions = Matrix::from_fn(d, n, |_, _| T::of(dist::normal(rng, 0.0, sd)));
    let mut lat = LatentState::new(T::zero(), positions)?;
    lat.recenter();
    Ok(lat)
}

/// Ground truth for a synthetic experiment.
pub fn gen_truth<T: Real>(n: usize, d: usize, p: usize, pat: &RestrictionPattern, seed: u64) -> Result<Truth<T>> {
    gen_truth_with(n, d, p, pat, seed, &TruthOptions::default())
}

pub fn gen_truth_with<T: Real>(
    n: usize,
    d: usize,
    p: usize,
    pat: &RestrictionPattern,
    seed: u64,
    opts: &TruthOptions,
) -> Result<Truth<T>> {
    check_dim(d)?;
    if n < 3 {
        return Err(Error::Dimension(format!("need at least 3 nodes, got {n}")));
    }
    if p < d {
        return Err(Error::Dimension(format!("need p ≥ d, got p = {p}, d = {d}")));
    }
    if pat.cells.shape() != (p, d) {
        return Err(Error::Dimension(format!(
            "pattern is {}×{}, expected {p}×{d}",
            pat.p(),
            pat.dim()
        )));
    }
    let mut rng = stream(seed, Block::Truth);
    let mut lat = sample_positions::<T, _>(&mut rng, d, n)?;

    // α ~ N(0, σ²_α) truncated so that e^α · mean(e^{−D}) lands in the window.
    let base = expected_mean_weight(&lat);
    let sd = opts.sigma2_alpha.sqrt();
    let std = Normal::new(0.0, 1.0).expect("standard normal");
    let (lo, hi) = (
        (opts.mean_weight_range.0 / base).ln() / sd,
        (opts.mean_weight_range.1 / base).ln() / sd,
    );
    let (plo, phi) = (std.cdf(lo), std.cdf(hi));
    let u: f64 = rng.random();
    let z = if phi > plo {
        std.inverse_cdf(plo + u * (phi - plo)).clamp(lo, hi)
    } else {
        0.5 * (lo + hi)
    };
    lat.alpha = T::of(sd * z);

    let eligible: Vec<usize> = (0..p)
        .filter(|&l| (0..d).all(|k| pat.cell(l, k) != Cell::PositiveDiagonal))
        .collect();
    let picked = rand::seq::index::sample(&mut rng, eligible.len(), opts.zero_rows.min(eligible.len()));
    let mut zero_rows: Vec<usize> = picked.iter().map(|idx| eligible[idx]).collect();
    zero_rows.sort_unstable();

    let slab_sd = (opts.kappa * opts.col_scale).sqrt();
    let draw_loading = |rng: &mut _| loop {
        let v = dist::normal(rng, 0.0, slab_sd);
        if v.abs() >= opts.min_abs_loading {
            return v;
        }
    };
    let mut lambda = Matrix::zeros(p, d);
    let mut indicators = Matrix::filled(p, d, false);
    for (l, k, &cell) in pat.cells.cells() {
        let value = match cell {
            Cell::FixedZero => continue,
            Cell::PositiveDiagonal => draw_loading(&mut rng).abs(),
            Cell::Free if zero_rows.contains(&l) => continue,
            Cell::Free => draw_loading(&mut rng),
        };
        lambda[(l, k)] = T::of(value);
        indicators[(l, k)] = true;
    }

    let loadings = LoadingState {
        lambda,
        indicators,
        tau: vec![T::of(0.5); p],
        col_scale: vec![T::of(opts.col_scale); d],
        kappa: T::of(opts.kappa),
        idio_var: vec![T::of(opts.idio_var); p],
    };
    Ok(Truth {
        n,
        d,
        p,
        seed,
        restriction: pat.kind.clone(),
        zero_rows: zero_rows.iter().map(|l| l + 1).collect(),
        expected_mean_weight: expected_mean_weight(&lat),
        options: opts.clone(),
        latent: lat,
        loadings,
    })
}

/// Draws every i<j weight from Poisson(exp(α − D_ij)).
pub fn sample_network<T: Real, R: Rng + ?Sized>(lat: &LatentState<T>, rng: &mut R) -> Result<WeightedNetwork> {
    let n = lat.n();
    let mut edges = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let theta = (lat.alpha - sq_dist_cols(&lat.positions, i, j)).as_f64().exp();
            edges.push((i, j, dist::poisson(rng, theta)));
        }
    }
    WeightedNetwork::from_edges(n, edges)
}

pub fn gen_network<T: Real>(lat: &LatentState<T>, seed: u64) -> Result<WeightedNetwork> {
    sample_network(lat, &mut stream(seed, Block::Network))
}

/// Y = Λf + E with E_li ~ N(0, σ²_l).
pub fn sample_interp<T: Real, R: Rng + ?Sized>(
    lat: &LatentState<T>,
    load: &LoadingState<T>,
    rng: &mut R,
) -> Result<InterpData<T>> {
    if load.dim() != lat.dim() {
        return Err(Error::Dimension(format!(
            "loadings have {} columns, positions {} rows",
            load.dim(),
            lat.dim()
        )));
    }
    let mut y = load.fitted(&lat.positions);
    for l in 0..y.rows() {
        let sd = load.idio_var[l].as_f64().sqrt();
        for v in y.row_mut(l) {
            *v = *v + T::of(dist::normal(rng, 0.0, sd));
        }
    }
    InterpData::new(y)
}

pub fn gen_interp<T: Real>(lat: &LatentState<T>, load: &LoadingState<T>, seed: u64) -> Result<InterpData<T>> {
    sample_interp(lat, load, &mut stream(seed, Block::Interp))
}

/// Exact draw of every unknown from the prior, positions conditioned on
/// summing to zero.
pub fn sample_prior<T: Real, R: Rng + ?Sized>(
    n: usize,
    pat: &RestrictionPattern,
    hp: &Hyperparams<T>,
    rng: &mut R,
) -> Result<ChainState<T>> {
    let (p, d) = (pat.p(), pat.dim());
    let mut lat = sample_positions::<T, _>(rng, d, n)?;
    lat.alpha = T::of(dist::normal(rng, 0.0, hp.sigma2_alpha.as_f64().sqrt()));
    let ig = |rng: &mut R, a: T, b: T| T::of(dist::inv_gamma(rng, a.as_f64(), b.as_f64()));
    let idio_var = (0..p).map(|_| ig(rng, hp.c0, hp.big_c0)).collect();
    let col_scale: Vec<T> = (0..d).map(|_| ig(rng, hp.c_sigma, hp.b_sigma)).collect();
    let kappa = ig(rng, hp.c_kappa, hp.b_kappa);
    let tau: Vec<T> = (0..p)
        .map(|_| T::of(dist::beta(rng, hp.tau_a.as_f64(), hp.tau_b.as_f64())))
        .collect();

    let mut lambda = Matrix::zeros(p, d);
    let mut indicators = Matrix::filled(p, d, false);
    for (l, k, &cell) in pat.cells.cells() {
        let sd = (kappa * col_scale[k]).as_f64().sqrt();
        let value = match cell {
            Cell::FixedZero => continue,
            Cell::PositiveDiagonal => dist::normal(rng, 0.0, sd).abs(),
            Cell::Free => {
                let u: f64 = rng.random();
                if u >= tau[l].as_f64() {
                    continue;
                }
                dist::normal(rng, 0.0, sd)
            }
        };
        lambda[(l, k)] = T::of(value);
        indicators[(l, k)] = true;
    }
    Ok(ChainState {
        lat,
        load: LoadingState {
            lambda,
            indicators,
            tau,
            col_scale,
            kappa,
            idio_var,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_pattern, validate_state};

    fn plt(p: usize, d: usize) -> RestrictionPattern {
        build_pattern(&RestrictionKind::Plt, p, d).unwrap()
    }

    #[test]
    fn truth_is_valid_and_deterministic() {
        for kind in [
            RestrictionKind::Plt,
            RestrictionKind::Unrestricted,
            RestrictionKind::Glt { pivots: vec![2, 3] },
        ] {
            let pat = build_pattern(&kind, 4, 2).unwrap();
            let a: Truth<f64> = gen_truth(30, 2, 4, &pat, 11).unwrap();
            let b: Truth<f64> = gen_truth(30, 2, 4, &pat, 11).unwrap();
            assert_eq!(a, b);
            let report = validate_state(&a.latent, &a.loadings, &pat).unwrap();
            assert!(report.is_valid(), "{kind}: {report}");
            assert_eq!(a.zero_rows.len(), 1);
            assert!((0.5..=5.0).contains(&a.expected_mean_weight));
        }
    }

    #[test]
    fn zero_row_is_never_a_pivot_row() {
        let pat = plt(4, 2);
        for seed in 0..20 {
            let t: Truth<f64> = gen_truth(10, 2, 4, &pat, seed).unwrap();
            let row = t.zero_rows[0] - 1;
            assert!(row >= 2);
            assert!(t.loadings.lambda.row(row).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn invalid_dims_rejected() {
        let pat = plt(4, 2);
        assert!(matches!(gen_truth::<f64>(2, 2, 4, &pat, 0), Err(Error::Dimension(_))));
        assert!(matches!(gen_truth::<f64>(5, 1, 4, &pat, 0), Err(Error::Dimension(_))));
        assert!(matches!(gen_truth::<f64>(5, 3, 2, &pat, 0), Err(Error::Dimension(_))));
    }

    #[test]
    fn position_prior_moments() {
        // Monte Carlo over 10⁴ replications of one node's coordinates.
        let pat = plt(2, 2);
        let reps = 10_000;
        let mut xs = Vec::with_capacity(reps * 2);
        for seed in 0..reps as u64 {
            let t: Truth<f64> = gen_truth_with(
                3,
                2,
                2,
                &pat,
                seed,
                &TruthOptions {
                    zero_rows: 0,
                    ..Default::default()
                },
            )
            .unwrap();
            xs.push(t.latent.positions[(0, 0)]);
            xs.push(t.latent.positions[(1, 0)]);
        }
        let m = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / m;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1.0);
        // With n = 3 centered nodes each coordinate has variance 2·(1 − 1/3).
        let want = 2.0 * (1.0 - 1.0 / 3.0);
        assert!(mean.abs() < 3.0 * (want / m).sqrt(), "mean {mean}");
        let var_se = want * (2.0 / (m - 1.0)).sqrt();
        assert!((var - want).abs() < 3.0 * var_se, "var {var}");
    }

    #[test]
    fn network_limits() {
        let mut lat = LatentState::new(-30.0, Matrix::zeros(2, 50)).unwrap();
        let net = gen_network(&lat, 1).unwrap();
        assert_eq!(net.total_weight(), 0);

        lat.alpha = 0.0;
        // 50 nodes at one point: θ = 1 on 1225 pairs; repeat for ≥ 10⁴ pairs
        let mut weights = Vec::new();
        for seed in 0..9 {
            weights.extend(gen_network(&lat, seed).unwrap().pairs().map(|(_, _, w)| w as f64));
        }
        let m = weights.len() as f64;
        let mean = weights.iter().sum::<f64>() / m;
        assert!((mean - 1.0).abs() < 3.0 / m.sqrt(), "mean {mean}");

        let net = gen_network(&lat, 4).unwrap();
        for i in 0..50 {
            assert_eq!(net.weight(i, i), 0);
            for j in 0..50 {
                assert_eq!(net.weight(i, j), net.weight(j, i));
            }
        }
    }

    fn toy_load(p: usize, lambda: f64, var: f64) -> LoadingState<f64> {
        LoadingState {
            lambda: Matrix::filled(p, 2, lambda),
            indicators: Matrix::filled(p, 2, lambda != 0.0),
            tau: vec![0.5; p],
            col_scale: vec![1.0; 2],
            kappa: 1.0,
            idio_var: vec![var; p],
        }
    }

    #[test]
    fn interp_limits() {
        let mut rng = stream(9, Block::Init);
        let lat = sample_positions::<f64, _>(&mut rng, 2, 20).unwrap();
        let load = toy_load(3, 0.7, 1e-12);
        let y = gen_interp(&lat, &load, 5).unwrap();
        let fit = load.fitted(&lat.positions);
        for (a, b) in y.y.iter().zip(fit.iter()) {
            assert!((a - b).abs() < 1e-5);
        }
        assert_eq!(y, gen_interp(&lat, &load, 5).unwrap());

        let big = sample_positions::<f64, _>(&mut rng, 2, 10_000).unwrap();
        let noise = toy_load(2, 0.0, 1.7);
        let y = gen_interp(&big, &noise, 6).unwrap();
        for l in 0..2 {
            let row = y.y.row(l);
            let m = row.len() as f64;
            let mean = row.iter().sum::<f64>() / m;
            let var = row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1.0);
            assert!(
                (var - 1.7).abs() < 3.0 * 1.7 * (2.0 / (m - 1.0)).sqrt(),
                "row {l} var {var}"
            );
        }
    }

    #[test]
    fn prior_draws_are_valid() {
        let hp = Hyperparams::<f64>::default();
        let mut rng = stream(2, Block::Init);
        for kind in [RestrictionKind::Plt, RestrictionKind::Unrestricted] {
            let pat = build_pattern(&kind, 3, 2).unwrap();
            for _ in 0..200 {
                let s = sample_prior(4, &pat, &hp, &mut rng).unwrap();
                assert!(validate_state(&s.lat, &s.load, &pat).unwrap().is_valid());
            }
        }
    }
}
