//! MH-within-Gibbs posterior sampler.
//!
//! One sweep updates, in order: α (random-walk MH), every position in a
//! random permutation (random-walk MH inside the sum-to-zero subspace), a
//! recentering pass, every loadings row (spike-and-slab Gibbs), the row
//! probabilities τ, and the variance hierarchy (conjugate inverse-gamma).

mod orient;
mod updates;

use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use updates::{
    alpha_log_ratio, apply_position_move, cell_conditional, col_scale_posterior, idio_var_posterior, kappa_posterior,
    position_log_ratio, tau_posterior, update_alpha, update_loadings_row, update_position, update_tau,
    update_variances, CellConditional,
};

use crate::dist;
use crate::error::{Error, Result};
use crate::likelihood::{log_posterior, InterpData};
use crate::matrix::Matrix;
use crate::model::{
    position_prior_variance, validate_state, Cell, Hyperparams, LatentState, LoadingState, RestrictionPattern,
    WeightedNetwork,
};
use crate::rng::{stream, Block, BlockRngs};
use crate::scalar::{pairwise_sum, Real};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Total sweeps, burn-in included.
    pub iters: usize,
    pub burnin: usize,
    pub thin: usize,
    pub seed: u64,
    pub mh_step_alpha: f64,
    pub mh_step_f: f64,
    /// Sweeps per Robbins-Monro adaptation window during burn-in.
    pub adapt_window: usize,
    pub target_accept: f64,
    /// Search for the orientation the restriction pattern prefers at the
    /// end of each adaptation window in the first half of burn-in.
    #[serde(default = "default_orient")]
    pub orient: bool,
}

fn default_orient() -> bool {
    true
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            iters: 2000,
            burnin: 1000,
            thin: 1,
            seed: 0,
            mh_step_alpha: 0.1,
            mh_step_f: 0.2,
            adapt_window: 50,
            target_accept: 0.234,
            orient: true,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidState(msg));
        if self.burnin >= self.iters {
            return bad(format!("burnin ({}) must be below iters ({})", self.burnin, self.iters));
        }
        if self.thin == 0 {
            return bad("thin must be at least 1".into());
        }
        if self.adapt_window == 0 {
            return bad("adapt_window must be at least 1".into());
        }
        if !(self.mh_step_alpha > 0.0 && self.mh_step_f > 0.0) {
            return bad("MH step sizes must be positive".into());
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return bad("target_accept must lie in (0, 1)".into());
        }
        Ok(())
    }

    /// Number of records a run will retain.
    pub fn retained(&self) -> usize {
        (self.iters - self.burnin) / self.thin
    }
}

/// Mutable sampler state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainState<T> {
    pub lat: LatentState<T>,
    pub load: LoadingState<T>,
}

/// Data and fixed settings the chain conditions on.
#[derive(Clone, Debug)]
pub struct Posterior<'a, T> {
    pub net: &'a WeightedNetwork,
    pub y: &'a InterpData<T>,
    pub hp: &'a Hyperparams<T>,
    pub pat: &'a RestrictionPattern,
    y_row_sums: Vec<T>,
}

impl<'a, T: Real> Posterior<'a, T> {
    pub fn new(
        net: &'a WeightedNetwork,
        y: &'a InterpData<T>,
        hp: &'a Hyperparams<T>,
        pat: &'a RestrictionPattern,
    ) -> Result<Self> {
        if net.n() != y.n() {
            return Err(Error::Data(format!(
                "network has {} nodes but interpretation data is {}×{} (variables × nodes)",
                net.n(),
                y.p(),
                y.n()
            )));
        }
        if y.p() != pat.p() {
            return Err(Error::Data(format!(
                "interpretation data has {} rows but the restriction pattern expects {}",
                y.p(),
                pat.p()
            )));
        }
        hp.validate()?;
        let y_row_sums = (0..y.p()).map(|l| pairwise_sum(y.y.row(l))).collect();
        Ok(Posterior {
            net,
            y,
            hp,
            pat,
            y_row_sums,
        })
    }

    pub fn n(&self) -> usize {
        self.net.n()
    }

    pub fn p(&self) -> usize {
        self.pat.p()
    }

    pub fn dim(&self) -> usize {
        self.pat.dim()
    }

    pub fn log_posterior(&self, state: &ChainState<T>) -> Result<T> {
        log_posterior(self.net, self.y, &state.lat, &state.load, self.hp, self.pat)
    }
}

/// One retained posterior draw.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainRecord<T> {
    /// 1-based sweep number the draw was taken after.
    pub draw: usize,
    pub alpha: T,
    pub positions: Matrix<T>,
    pub lambda: Matrix<T>,
    pub indicators: Matrix<bool>,
    pub tau: Vec<T>,
    pub col_scale: Vec<T>,
    pub kappa: T,
    pub idio_var: Vec<T>,
    pub log_posterior: T,
}

impl<T: Real> ChainRecord<T> {
    pub fn from_state(draw: usize, state: &ChainState<T>, log_posterior: T) -> Self {
        ChainRecord {
            draw,
            alpha: state.lat.alpha,
            positions: state.lat.positions.clone(),
            lambda: state.load.lambda.clone(),
            indicators: state.load.indicators.clone(),
            tau: state.load.tau.clone(),
            col_scale: state.load.col_scale.clone(),
            kappa: state.load.kappa,
            idio_var: state.load.idio_var.clone(),
            log_posterior,
        }
    }

    pub fn to_state(&self) -> ChainState<T> {
        ChainState {
            lat: LatentState {
                alpha: self.alpha,
                positions: self.positions.clone(),
                centered: true,
            },
            load: LoadingState {
                lambda: self.lambda.clone(),
                indicators: self.indicators.clone(),
                tau: self.tau.clone(),
                col_scale: self.col_scale.clone(),
                kappa: self.kappa,
                idio_var: self.idio_var.clone(),
            },
        }
    }
}

/// Current random-walk proposal scales.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSizes {
    pub alpha: f64,
    pub positions: Vec<f64>,
}

impl StepSizes {
    pub fn uniform(alpha: f64, position: f64, n: usize) -> Self {
        StepSizes {
            alpha,
            positions: vec![position; n],
        }
    }
}

/// Acceptance indicators of one sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepStats {
    pub alpha: bool,
    pub positions: Vec<bool>,
}

/// One full scan. Deterministic given the state and the four streams.
pub fn sweep<T: Real>(
    state: &mut ChainState<T>,
    post: &Posterior<'_, T>,
    steps: &StepSizes,
    rngs: &mut BlockRngs,
) -> Result<SweepStats> {
    let alpha = update_alpha(state, post, steps.alpha, &mut rngs.alpha);

    let n = state.lat.n();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rngs.positions);
    let mut positions = vec![false; n];
    for i in order {
        positions[i] = update_position(state, post, i, steps.positions[i], &mut rngs.positions)?;
    }
    recenter(state);

    for l in 0..state.load.p() {
        update_loadings_row(state, post, l, &mut rngs.loadings);
    }
    update_tau(state, post, &mut rngs.loadings);
    update_variances(state, post, &mut rngs.variances);
    Ok(SweepStats { alpha, positions })
}

/// Subtracts the row means of the positions. Positions only ever move
/// inside the centered subspace, so this removes floating point drift.
pub fn recenter<T: Real>(state: &mut ChainState<T>) {
    state.lat.recenter();
}

/// Starting point: α = log(mean positive weight + 1); positions from the
/// prior, recentered; Λ by least squares of Y on f, projected onto the
/// pattern (diagonals |value| + 0.1); variances at their prior means, or 1
/// where the mean does not exist; τ = ½.
pub fn initial_state<T: Real>(post: &Posterior<'_, T>, seed: u64) -> Result<ChainState<T>> {
    let (n, p, d) = (post.n(), post.p(), post.dim());
    let mut rng = stream(seed, Block::Init);
    let sd = position_prior_variance::<f64>(d).sqrt();
    let positions = Matrix::from_fn(d, n, |_, _| T::of(dist::normal(&mut rng, 0.0, sd)));
    let alpha = T::of((post.net.mean_positive_weight() + 1.0).ln());
    let mut lat = LatentState::new(alpha, positions)?;
    lat.recenter();

    let (lambda, indicators) = projected_loadings(post, &lat.positions);

    let prior_mean = |shape: T, rate: T| {
        if shape > T::one() {
            rate / (shape - T::one())
        } else {
            T::one()
        }
    };
    let hp = post.hp;
    let load = LoadingState {
        lambda,
        indicators,
        tau: vec![T::of(0.5); p],
        col_scale: vec![prior_mean(hp.c_sigma, hp.b_sigma); d],
        kappa: prior_mean(hp.c_kappa, hp.b_kappa),
        idio_var: vec![prior_mean(hp.c0, hp.big_c0); p],
    };
    let state = ChainState { lat, load };
    match post.log_posterior(&state) {
        Ok(v) if v.is_finite() => Ok(state),
        Ok(v) => Err(Error::Init(format!(
            "log-posterior {v} at the starting point (alpha = {}, mean positive weight = {})",
            state.lat.alpha,
            post.net.mean_positive_weight()
        ))),
        Err(e) => Err(Error::Init(format!("starting point could not be evaluated: {e}"))),
    }
}

/// Least squares of Y on f, projected onto the pattern: FixedZero cells 0,
/// diagonals |value| + 0.1.
fn projected_loadings<T: Real>(post: &Posterior<'_, T>, f: &Matrix<T>) -> (Matrix<T>, Matrix<bool>) {
    let (p, d) = (post.p(), post.dim());
    let ols = f
        .matmul(&f.transpose())
        .inverse()
        .map(|gram_inv| post.y.y.matmul(&f.transpose()).matmul(&gram_inv))
        .unwrap_or_else(|| Matrix::zeros(p, d));
    let mut lambda = Matrix::zeros(p, d);
    let mut indicators = Matrix::filled(p, d, false);
    for (l, k, &cell) in post.pat.cells.cells() {
        let v = ols[(l, k)];
        let value = match cell {
            Cell::FixedZero => T::zero(),
            Cell::PositiveDiagonal => v.abs() + T::of(0.1),
            Cell::Free => v,
        };
        lambda[(l, k)] = value;
        indicators[(l, k)] = value != T::zero();
    }
    (lambda, indicators)
}

/// Turns the configuration into the orientation the restriction pattern
/// prefers, if that differs from the current one, and refits Λ to it.
/// Returns whether anything changed.
pub fn reorient<T: Real>(state: &mut ChainState<T>, post: &Posterior<'_, T>) -> bool {
    let Some(q) = orient::best_orientation(&post.y.y, &state.lat.positions, post.pat, &state.load.idio_var) else {
        return false;
    };
    let f = state.lat.positions.map(|v| v.as_f64());
    let turned = q.matmul(&f);
    state.lat.positions = turned.map(|&v| T::of(v));
    state.lat.recenter();
    let (lambda, indicators) = projected_loadings(post, &state.lat.positions);
    state.load.lambda = lambda;
    state.load.indicators = indicators;
    true
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BlockRates {
    pub alpha: f64,
    /// Averaged over nodes.
    pub positions: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceSummary {
    pub burnin: BlockRates,
    pub sampling: BlockRates,
    /// Proposal scales used after burn-in.
    pub final_steps: StepSizes,
    pub records: usize,
    pub wall_time_secs: f64,
}

#[derive(Clone, Debug)]
pub struct ChainOutput<T> {
    pub records: Vec<ChainRecord<T>>,
    pub acceptance: AcceptanceSummary,
}

#[derive(Default)]
struct Tally {
    alpha: usize,
    positions: usize,
    sweeps: usize,
    nodes: usize,
}

impl Tally {
    fn add(&mut self, stats: &SweepStats) {
        self.alpha += usize::from(stats.alpha);
        self.positions += stats.positions.iter().filter(|&&a| a).count();
        self.sweeps += 1;
        self.nodes = stats.positions.len();
    }

    fn rates(&self) -> BlockRates {
        if self.sweeps == 0 {
            return BlockRates::default();
        }
        BlockRates {
            alpha: self.alpha as f64 / self.sweeps as f64,
            positions: self.positions as f64 / (self.sweeps * self.nodes.max(1)) as f64,
        }
    }
}

/// Robbins-Monro adaptation of the log proposal scales, one update per
/// window with gain 1/√(window index).
struct Adapter {
    target: f64,
    window: usize,
    updates: usize,
    alpha_hits: usize,
    node_hits: Vec<usize>,
    seen: usize,
}

impl Adapter {
    fn new(target: f64, window: usize, n: usize) -> Self {
        Adapter {
            target,
            window,
            updates: 0,
            alpha_hits: 0,
            node_hits: vec![0; n],
            seen: 0,
        }
    }

    fn observe(&mut self, stats: &SweepStats, steps: &mut StepSizes) {
        self.alpha_hits += usize::from(stats.alpha);
        for (hits, &ok) in self.node_hits.iter_mut().zip(&stats.positions) {
            *hits += usize::from(ok);
        }
        self.seen += 1;
        if self.seen < self.window {
            return;
        }
        self.updates += 1;
        let gain = 1.0 / (self.updates as f64).sqrt();
        let w = self.seen as f64;
        let rescale = |step: &mut f64, hits: usize| {
            let rate = hits as f64 / w;
            *step = (step.ln() + gain * (rate - self.target)).exp().clamp(1e-6, 1e3);
        };
        rescale(&mut steps.alpha, self.alpha_hits);
        for (step, &hits) in steps.positions.iter_mut().zip(&self.node_hits) {
            rescale(step, hits);
        }
        self.alpha_hits = 0;
        self.node_hits.iter_mut().for_each(|h| *h = 0);
        self.seen = 0;
    }
}

/// Runs a chain and hands every retained draw to `sink` as it is produced.
pub fn run_chain_with<T: Real>(
    post: &Posterior<'_, T>,
    cfg: &SamplerConfig,
    mut sink: impl FnMut(&ChainRecord<T>) -> Result<()>,
) -> Result<AcceptanceSummary> {
    cfg.validate()?;
    let started = Instant::now();
    let mut state = initial_state(post, cfg.seed)?;
    let mut rngs = BlockRngs::new(cfg.seed);
    let n = post.n();
    let mut steps = StepSizes::uniform(cfg.mh_step_alpha, cfg.mh_step_f, n);
    let mut adapter = Adapter::new(cfg.target_accept, cfg.adapt_window, n);
    let (mut warm, mut main) = (Tally::default(), Tally::default());
    let mut records = 0;

    for it in 1..=cfg.iters {
        let stats = sweep(&mut state, post, &steps, &mut rngs)?;
        if it <= cfg.burnin {
            warm.add(&stats);
            adapter.observe(&stats, &mut steps);
            if cfg.orient && it % cfg.adapt_window == 0 && 2 * it <= cfg.burnin && reorient(&mut state, post) {
                log::debug!("sweep {it}: reoriented positions");
            }
            continue;
        }
        main.add(&stats);
        if (it - cfg.burnin).is_multiple_of(cfg.thin) {
            let lp = post.log_posterior(&state)?;
            sink(&ChainRecord::from_state(it, &state, lp))?;
            records += 1;
        }
    }
    log::debug!(
        "chain done: {records} records, alpha acceptance {:.3}, position acceptance {:.3}",
        main.rates().alpha,
        main.rates().positions
    );
    Ok(AcceptanceSummary {
        burnin: warm.rates(),
        sampling: main.rates(),
        final_steps: steps,
        records,
        wall_time_secs: started.elapsed().as_secs_f64(),
    })
}

/// Runs a chain and keeps every retained draw in memory.
pub fn run_chain<T: Real>(post: &Posterior<'_, T>, cfg: &SamplerConfig) -> Result<ChainOutput<T>> {
    let mut records = Vec::with_capacity(cfg.retained());
    let acceptance = run_chain_with(post, cfg, |r| {
        records.push(r.clone());
        Ok(())
    })?;
    Ok(ChainOutput { records, acceptance })
}

/// Checks a stored draw against the pattern it was sampled under.
pub fn record_is_valid<T: Real>(record: &ChainRecord<T>, pat: &RestrictionPattern) -> bool {
    let state = record.to_state();
    validate_state(&state.lat, &state.load, pat).is_ok_and(|r| r.is_valid())
}
