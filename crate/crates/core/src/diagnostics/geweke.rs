//! Joint-distribution ("getting it right") check of the sampler.
//!
//! The marginal-conditional stream draws parameters from the prior and data
//! from the likelihood. The successive-conditional stream alternates
//! posterior sweeps with regenerating the data from the current parameters.
//! Both target the same joint law when every update is correct, so the
//! moments of any function of the parameters must agree.

use serde::{Deserialize, Serialize};

use crate::diagnostics::ess::ess;
use crate::error::{Error, Result};
use crate::likelihood::InterpData;
use crate::model::{Cell, Hyperparams, RestrictionPattern, WeightedNetwork};
use crate::rng::{stream, Block, BlockRngs, StreamRng};
use crate::sampler::{sweep, ChainState, Posterior, StepSizes};
use crate::simulate::{sample_interp, sample_network, sample_prior};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GewekeDims {
    pub n: usize,
    pub p: usize,
    pub d: usize,
}

impl Default for GewekeDims {
    fn default() -> Self {
        GewekeDims { n: 4, p: 3, d: 2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GewekeConfig {
    /// Draws kept per stream.
    pub draws: usize,
    /// Sweeps (each followed by data regeneration) between kept draws of
    /// the successive stream.
    pub thin: usize,
    pub seed: u64,
    pub step_alpha: f64,
    pub step_f: f64,
}

impl Default for GewekeConfig {
    fn default() -> Self {
        GewekeConfig {
            draws: 5000,
            thin: 5,
            seed: 1,
            step_alpha: 0.5,
            step_f: 0.8,
        }
    }
}

/// Hyperparameters for the micro model. Inverse-gamma shapes above 4 keep
/// the fourth moments of the variances finite so the squared moments have
/// finite variance. An asymmetric Beta prior on τ makes errors in the τ
/// update move its mean, not only its spread.
pub fn micro_hyperparams() -> Hyperparams<f64> {
    Hyperparams {
        sigma2_alpha: 1.0,
        c0: 5.0,
        big_c0: 4.0,
        c_sigma: 5.0,
        b_sigma: 4.0,
        c_kappa: 5.0,
        b_kappa: 4.0,
        tau_a: 1.0,
        tau_b: 2.0,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentZ {
    pub name: String,
    pub marginal_mean: f64,
    pub successive_mean: f64,
    pub successive_ess: f64,
    pub z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GewekeReport {
    pub dims: GewekeDims,
    pub config: GewekeConfig,
    pub moments: Vec<MomentZ>,
}

impl GewekeReport {
    pub fn max_abs_z(&self) -> f64 {
        self.moments.iter().map(|m| m.z.abs()).fold(0.0, f64::max)
    }

    pub fn passes(&self, threshold: f64) -> bool {
        self.moments.iter().all(|m| m.z.abs() < threshold)
    }
}

/// Monitored functions: α, mean ‖f_i‖², each Free λ, κ and mean τ, each
/// with its square.
fn test_functions(state: &ChainState<f64>, pat: &RestrictionPattern) -> Vec<(String, f64)> {
    let lat = &state.lat;
    let (d, n) = lat.positions.shape();
    let sq_norm: f64 = (0..n)
        .map(|i| (0..d).map(|k| lat.positions[(k, i)].powi(2)).sum::<f64>())
        .sum::<f64>()
        / n as f64;
    let mean_tau = state.load.tau.iter().sum::<f64>() / state.load.tau.len() as f64;
    let mut base = vec![("alpha".to_string(), lat.alpha), ("mean_sq_norm".to_string(), sq_norm)];
    for (l, k, &cell) in pat.cells.cells() {
        if cell == Cell::Free {
            base.push((format!("lambda[{},{}]", l + 1, k + 1), state.load.lambda[(l, k)]));
        }
    }
    base.push(("kappa".into(), state.load.kappa));
    base.push(("mean_tau".into(), mean_tau));
    let squares: Vec<(String, f64)> = base.iter().map(|(n, v)| (format!("{n}^2"), v * v)).collect();
    base.extend(squares);
    base
}

fn regenerate(state: &ChainState<f64>, rng: &mut StreamRng) -> Result<(WeightedNetwork, InterpData<f64>)> {
    let net = sample_network(&state.lat, rng)?;
    let y = sample_interp(&state.lat, &state.load, rng)?;
    Ok((net, y))
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (mean, xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0))
}

/// Runs the check with the production sweep as the transition kernel.
pub fn geweke_joint_test(
    hp: &Hyperparams<f64>,
    pat: &RestrictionPattern,
    dims: GewekeDims,
    cfg: &GewekeConfig,
) -> Result<GewekeReport> {
    let steps = StepSizes::uniform(cfg.step_alpha, cfg.step_f, dims.n);
    geweke_joint_test_with(hp, pat, dims, cfg, |state, post, rngs| {
        sweep(state, post, &steps, rngs).map(|_| ())
    })
}

/// Runs the check with an arbitrary transition kernel in the successive
/// stream. The kernel must leave the posterior given the data invariant for
/// the check to pass.
pub fn geweke_joint_test_with<K>(
    hp: &Hyperparams<f64>,
    pat: &RestrictionPattern,
    dims: GewekeDims,
    cfg: &GewekeConfig,
    mut kernel: K,
) -> Result<GewekeReport>
where
    K: FnMut(&mut ChainState<f64>, &Posterior<'_, f64>, &mut BlockRngs) -> Result<()>,
{
    let GewekeDims { n, p, d } = dims;
    if d != 2 || !(2..=5).contains(&n) || !(d..=3).contains(&p) {
        return Err(Error::Dimension(format!(
            "the joint test runs on micro models (n ≤ 5, p ≤ 3, d = 2), got n = {n}, p = {p}, d = {d}"
        )));
    }
    if (pat.p(), pat.dim()) != (p, d) {
        return Err(Error::Dimension(format!(
            "pattern is {}×{}, dims say {p}×{d}",
            pat.p(),
            pat.dim()
        )));
    }
    if cfg.draws < 10 || cfg.thin == 0 {
        return Err(Error::Test("need at least 10 draws and thin ≥ 1".into()));
    }
    hp.validate()?;

    let mut prior_rng = stream(cfg.seed, Block::Truth);
    let mut marginal: Vec<Vec<f64>> = Vec::new();
    let mut names = Vec::new();
    for _ in 0..cfg.draws {
        let state = sample_prior(n, pat, hp, &mut prior_rng)?;
        let fs = test_functions(&state, pat);
        if marginal.is_empty() {
            names = fs.iter().map(|(n, _)| n.clone()).collect();
            marginal = vec![Vec::with_capacity(cfg.draws); fs.len()];
        }
        for (col, (_, v)) in marginal.iter_mut().zip(fs) {
            col.push(v);
        }
    }

    // An exact joint draw starts the successive stream, so it needs no burn-in.
    let mut data_rng = stream(cfg.seed, Block::Network);
    let mut rngs = BlockRngs::new(cfg.seed);
    let mut state = sample_prior(n, pat, hp, &mut stream(cfg.seed, Block::Init))?;
    let (mut net, mut y) = regenerate(&state, &mut data_rng)?;
    let mut successive = vec![Vec::with_capacity(cfg.draws); names.len()];
    for _ in 0..cfg.draws {
        for _ in 0..cfg.thin {
            let post = Posterior::new(&net, &y, hp, pat)?;
            kernel(&mut state, &post, &mut rngs)?;
            (net, y) = regenerate(&state, &mut data_rng)?;
        }
        for (col, (_, v)) in successive.iter_mut().zip(test_functions(&state, pat)) {
            col.push(v);
        }
    }

    let mut moments = Vec::with_capacity(names.len());
    for ((name, mc), sc) in names.into_iter().zip(&marginal).zip(&successive) {
        let (mc_mean, mc_var) = mean_var(mc);
        let (sc_mean, sc_var) = mean_var(sc);
        let sc_ess = ess(sc).map_err(|e| Error::Test(format!("{name}: {e}")))?.value;
        let z = (mc_mean - sc_mean) / (mc_var / mc.len() as f64 + sc_var / sc_ess).sqrt();
        if !z.is_finite() {
            return Err(Error::Test(format!("non-finite z-score for {name}")));
        }
        moments.push(MomentZ {
            name,
            marginal_mean: mc_mean,
            successive_mean: sc_mean,
            successive_ess: sc_ess,
            z,
        });
    }
    Ok(GewekeReport {
        dims,
        config: cfg.clone(),
        moments,
    })
}
