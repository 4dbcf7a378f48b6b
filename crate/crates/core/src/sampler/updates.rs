//! Single-block updates of the MH-within-Gibbs scan.
//!
//! Each conjugate block exposes the parameters of its full conditional
//! (`*_posterior`, [`cell_conditional`]) separately from the draw, so the
//! closed forms can be checked without Monte Carlo noise.

use rand::seq::SliceRandom;
use rand::Rng;

use super::{ChainState, Posterior};
use crate::dist;
use crate::error::{Error, Result};
use crate::likelihood::sq_dist_cols;
use crate::model::{position_prior_variance, Cell, Hyperparams, LatentState, LoadingState, RestrictionPattern};
use crate::scalar::{pairwise_sum, Real};

/// MH log acceptance ratio for moving α to `proposal`.
///
/// Only the Poisson layer and α's prior depend on α:
/// Δ = W·(α′ − α) − Σ_{i<j} e^{−D_ij}·(e^{α′} − e^{α}) − (α′² − α²)/(2σ²_α).
pub fn alpha_log_ratio<T: Real>(state: &ChainState<T>, post: &Posterior<'_, T>, proposal: T) -> T {
    let lat = &state.lat;
    let f = &lat.positions;
    let decay: Vec<T> = post
        .net
        .pairs()
        .map(|(i, j, _)| (-sq_dist_cols(f, i, j)).exp())
        .collect();
    let decay = pairwise_sum(&decay);
    let total = T::of(post.net.total_weight() as f64);
    let cur = lat.alpha;
    let lik = total * (proposal - cur) - decay * (proposal.exp() - cur.exp());
    let prior = -(proposal * proposal - cur * cur) / (T::of(2.0) * post.hp.sigma2_alpha);
    lik + prior
}

#[inline]
fn accept<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> bool {
    if log_ratio >= 0.0 {
        return true;
    }
    let u: f64 = rng.random();
    u.ln() < log_ratio
}

/// Gaussian random-walk MH step on α. Returns whether the move was taken.
pub fn update_alpha<T: Real, R: Rng + ?Sized>(
    state: &mut ChainState<T>,
    post: &Posterior<'_, T>,
    step: f64,
    rng: &mut R,
) -> bool {
    let proposal = state.lat.alpha + T::of(step * dist::std_normal(rng));
    let ratio = alpha_log_ratio(state, post, proposal).as_f64();
    let ok = accept(ratio, rng);
    if ok {
        state.lat.alpha = proposal;
    }
    ok
}

/// Log acceptance ratio for displacing node `i` by `shift` inside the
/// sum-to-zero subspace: f_i gains `shift` and then every position is
/// translated by −(Σ_j f_j + shift)/n, so the proposal is a symmetric random
/// walk on centered configurations.
///
/// Translation leaves every distance alone, so the Poisson part only
/// touches pairs (i, ·). The prior and interpretation parts change for all
/// nodes but reduce to node-i terms plus the column sums of f and Y.
pub fn position_log_ratio<T: Real>(state: &ChainState<T>, post: &Posterior<'_, T>, i: usize, shift: &[T]) -> T {
    let lat = &state.lat;
    let load = &state.load;
    let f = &lat.positions;
    let (d, n) = f.shape();
    let nf = T::of(n as f64);
    let two = T::of(2.0);

    let fi: Vec<T> = f.col(i);
    let moved: Vec<T> = fi.iter().zip(shift).map(|(&a, &b)| a + b).collect();

    // Poisson pairs touching i.
    let mut pois = Vec::with_capacity(n - 1);
    for j in (0..n).filter(|&j| j != i) {
        let mut old_d = T::zero();
        let mut new_d = T::zero();
        for k in 0..d {
            let fj = f[(k, j)];
            old_d = old_d + (fi[k] - fj) * (fi[k] - fj);
            new_d = new_d + (moved[k] - fj) * (moved[k] - fj);
        }
        let w = T::of(post.net.weight(i, j) as f64);
        pois.push(w * (old_d - new_d) - ((lat.alpha - new_d).exp() - (lat.alpha - old_d).exp()));
    }
    let poisson = pairwise_sum(&pois);

    // New mean of the shifted configuration; the move subtracts it.
    let fsum: Vec<T> = (0..d).map(|k| pairwise_sum(f.row(k))).collect();
    let center: Vec<T> = (0..d).map(|k| (fsum[k] + shift[k]) / nf).collect();

    let sq = |v: &[T]| v.iter().map(|&x| x * x).sum::<T>();
    let sq_change = sq(&moved) - sq(&fi) - nf * sq(&center);
    let prior = -sq_change / (two * position_prior_variance::<T>(d));

    let mut interp = T::zero();
    for l in 0..load.p() {
        let lam = load.lambda.row(l);
        let g: T = (0..d).map(|k| lam[k] * shift[k]).sum();
        let h: T = (0..d).map(|k| lam[k] * center[k]).sum();
        let lf_i: T = (0..d).map(|k| lam[k] * fi[k]).sum();
        let lf_sum: T = (0..d).map(|k| lam[k] * fsum[k]).sum();
        let r_i = post.y.y[(l, i)] - lf_i;
        let r_sum = post.y_row_sums[l] - lf_sum;
        // Σ_j r′² − Σ_j r² with r′_j = r_j + h − g·[j = i]
        let change = two * h * r_sum + nf * h * h - two * g * (r_i + h) + g * g;
        interp = interp - change / (two * load.idio_var[l]);
    }
    poisson + prior + interp
}

/// Applies the subspace move scored by [`position_log_ratio`].
pub fn apply_position_move<T: Real>(lat: &mut LatentState<T>, i: usize, shift: &[T]) {
    let (d, n) = lat.positions.shape();
    let nf = T::of(n as f64);
    for (k, &s) in shift.iter().enumerate().take(d) {
        lat.positions[(k, i)] = lat.positions[(k, i)] + s;
        let row = lat.positions.row_mut(k);
        let mean = pairwise_sum(row) / nf;
        row.iter_mut().for_each(|v| *v = *v - mean);
    }
    lat.centered = true;
}

/// Random-walk MH step on node `i`'s position.
pub fn update_position<T: Real, R: Rng + ?Sized>(
    state: &mut ChainState<T>,
    post: &Posterior<'_, T>,
    i: usize,
    step: f64,
    rng: &mut R,
) -> Result<bool> {
    let n = state.lat.n();
    if i >= n {
        return Err(Error::Index { index: i, len: n });
    }
    let shift: Vec<T> = (0..state.lat.dim())
        .map(|_| T::of(step * dist::std_normal(rng)))
        .collect();
    let ratio = position_log_ratio(state, post, i, &shift).as_f64();
    let ok = accept(ratio, rng);
    if ok {
        apply_position_move(&mut state.lat, i, &shift);
    }
    Ok(ok)
}

/// Gaussian full conditional of one loading given everything else.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellConditional<T> {
    pub mean: T,
    pub var: T,
    /// Slab variance κσ²_k.
    pub prior_var: T,
}

impl<T: Real> CellConditional<T> {
    /// Posterior log odds of the slab against the spike for a Free cell
    /// with row probability `tau`.
    pub fn log_odds(&self, tau: T) -> T {
        let half = T::of(0.5);
        tau.ln() - (T::one() - tau).ln()
            + half * (self.var / self.prior_var).ln()
            + self.mean * self.mean / (T::of(2.0) * self.var)
    }

    pub fn inclusion_probability(&self, tau: T) -> T {
        let z = self.log_odds(tau);
        if z >= T::zero() {
            T::one() / (T::one() + (-z).exp())
        } else {
            let e = z.exp();
            e / (T::one() + e)
        }
    }
}

/// Conditional of λ_lk under the slab: with r = y_l − Σ_{k′≠k} λ_lk′ f_k′,
/// v = (f_k·f_k/σ²_l + 1/(κσ²_k))⁻¹ and m = v·(f_k·r)/σ²_l.
pub fn cell_conditional<T: Real>(
    lat: &LatentState<T>,
    load: &LoadingState<T>,
    y: &crate::likelihood::InterpData<T>,
    l: usize,
    k: usize,
) -> CellConditional<T> {
    let f = &lat.positions;
    let d = f.rows();
    let lam = load.lambda.row(l);
    let sigma2 = load.idio_var[l];
    let prior_var = load.kappa * load.col_scale[k];
    let mut ss = T::zero();
    let mut cross = T::zero();
    for i in 0..f.cols() {
        let others: T = (0..d).filter(|&kk| kk != k).map(|kk| lam[kk] * f[(kk, i)]).sum();
        let r = y.y[(l, i)] - others;
        ss = ss + f[(k, i)] * f[(k, i)];
        cross = cross + f[(k, i)] * r;
    }
    let var = T::one() / (ss / sigma2 + T::one() / prior_var);
    CellConditional {
        mean: var * cross / sigma2,
        var,
        prior_var,
    }
}

/// Gibbs update of the sampled cells of row `l` in a fresh random order.
/// Free cells draw the slab indicator and then λ; PositiveDiagonal cells
/// draw λ from the conditional truncated to (0, ∞).
pub fn update_loadings_row<T: Real, R: Rng + ?Sized>(
    state: &mut ChainState<T>,
    post: &Posterior<'_, T>,
    l: usize,
    rng: &mut R,
) {
    let pat = post.pat;
    let mut cols: Vec<usize> = pat.sampled_cols(l).collect();
    cols.shuffle(rng);
    for k in cols {
        let cond = cell_conditional(&state.lat, &state.load, post.y, l, k);
        let (mean, sd) = (cond.mean.as_f64(), cond.var.as_f64().sqrt());
        let (active, value) = match pat.cell(l, k) {
            Cell::PositiveDiagonal => (true, dist::positive_truncated_normal(rng, mean, sd)),
            Cell::Free => {
                let prob = cond.inclusion_probability(state.load.tau[l]).as_f64();
                let u: f64 = rng.random();
                if u < prob {
                    (true, dist::normal(rng, mean, sd))
                } else {
                    (false, 0.0)
                }
            }
            Cell::FixedZero => unreachable!("fixed cells are never sampled"),
        };
        state.load.indicators[(l, k)] = active;
        // A slab draw of exactly zero is a measure-zero event; keep the
        // indicator/value invariant intact regardless.
        state.load.lambda[(l, k)] = if active && value == 0.0 {
            T::min_positive_value()
        } else {
            T::of(value)
        };
    }
}

/// Beta parameters of τ_l's conditional: prior counts plus the number of
/// active and inactive Free cells in the row. Constrained cells carry no
/// Bernoulli draw and are excluded.
pub fn tau_posterior<T: Real>(
    load: &LoadingState<T>,
    pat: &RestrictionPattern,
    hp: &Hyperparams<T>,
    l: usize,
) -> (T, T) {
    let (mut on, mut off) = (0usize, 0usize);
    for k in (0..pat.dim()).filter(|&k| pat.cell(l, k) == Cell::Free) {
        if load.indicators[(l, k)] {
            on += 1;
        } else {
            off += 1;
        }
    }
    (hp.tau_a + T::of(on as f64), hp.tau_b + T::of(off as f64))
}

pub fn update_tau<T: Real, R: Rng + ?Sized>(state: &mut ChainState<T>, post: &Posterior<'_, T>, rng: &mut R) {
    for l in 0..state.load.p() {
        let (a, b) = tau_posterior(&state.load, post.pat, post.hp, l);
        state.load.tau[l] = T::of(dist::beta(rng, a.as_f64(), b.as_f64()));
    }
}

/// IG(shape, rate) conditional of σ²_l: (c₀ + n/2, C₀ + ½‖y_l − λ_l f‖²).
pub fn idio_var_posterior<T: Real>(
    lat: &LatentState<T>,
    load: &LoadingState<T>,
    y: &crate::likelihood::InterpData<T>,
    hp: &Hyperparams<T>,
    l: usize,
) -> (T, T) {
    let f = &lat.positions;
    let lam = load.lambda.row(l);
    let sq: Vec<T> = (0..f.cols())
        .map(|i| {
            let fit: T = (0..f.rows()).map(|k| lam[k] * f[(k, i)]).sum();
            let r = y.y[(l, i)] - fit;
            r * r
        })
        .collect();
    let half = T::of(0.5);
    (
        hp.c0 + half * T::of(f.cols() as f64),
        hp.big_c0 + half * pairwise_sum(&sq),
    )
}

/// IG conditional of σ²_k from the active cells of column k.
pub fn col_scale_posterior<T: Real>(load: &LoadingState<T>, hp: &Hyperparams<T>, k: usize) -> (T, T) {
    let (count, ss) = (0..load.p())
        .filter(|&l| load.indicators[(l, k)])
        .fold((0usize, T::zero()), |(c, s), l| {
            let v = load.lambda[(l, k)];
            (c + 1, s + v * v)
        });
    let half = T::of(0.5);
    (
        hp.c_sigma + half * T::of(count as f64),
        hp.b_sigma + ss / (T::of(2.0) * load.kappa),
    )
}

/// IG conditional of κ from every active cell.
pub fn kappa_posterior<T: Real>(load: &LoadingState<T>, hp: &Hyperparams<T>) -> (T, T) {
    let mut count = 0usize;
    let mut ss = T::zero();
    for (l, k, &active) in load.indicators.cells() {
        if active {
            let v = load.lambda[(l, k)];
            count += 1;
            ss = ss + v * v / load.col_scale[k];
        }
    }
    (
        hp.c_kappa + T::of(0.5) * T::of(count as f64),
        hp.b_kappa + ss / T::of(2.0),
    )
}

/// Draws every idiosyncratic variance, then the column scales, then κ.
pub fn update_variances<T: Real, R: Rng + ?Sized>(state: &mut ChainState<T>, post: &Posterior<'_, T>, rng: &mut R) {
    let ig = |rng: &mut R, (a, b): (T, T)| T::of(dist::inv_gamma(rng, a.as_f64(), b.as_f64()));
    for l in 0..state.load.p() {
        let par = idio_var_posterior(&state.lat, &state.load, post.y, post.hp, l);
        state.load.idio_var[l] = ig(rng, par);
    }
    for k in 0..state.load.dim() {
        let par = col_scale_posterior(&state.load, post.hp, k);
        state.load.col_scale[k] = ig(rng, par);
    }
    let par = kappa_posterior(&state.load, post.hp);
    state.load.kappa = ig(rng, par);
}
