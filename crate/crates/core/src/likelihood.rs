//! Log-likelihoods and log-priors. Every acceptance ratio in the sampler
//! is checked against [`log_posterior`] in the test suite.
//!
//! The link is exponential: θ_ij = exp(α − ‖f_i − f_j‖²).

use serde::{Deserialize, Serialize};

use crate::dist::{ln_beta_density, ln_inv_gamma, ln_normal};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{
    position_prior_variance, validate_state, Cell, Hyperparams, LatentState, LoadingState, RestrictionPattern,
    WeightedNetwork,
};
use crate::scalar::{pairwise_sum, Real};

/// p×n interpretation variables; row l is variable l, column i is node i.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpData<T> {
    pub y: Matrix<T>,
}

impl<T: Real> InterpData<T> {
    pub fn new(y: Matrix<T>) -> Result<Self> {
        if !y.all_finite() {
            return Err(Error::Data("interpretation matrix has non-finite entries".into()));
        }
        if y.rows() == 0 || y.cols() == 0 {
            return Err(Error::Data("interpretation matrix is empty".into()));
        }
        Ok(InterpData { y })
    }

    pub fn p(&self) -> usize {
        self.y.rows()
    }

    pub fn n(&self) -> usize {
        self.y.cols()
    }
}

#[inline]
pub(crate) fn sq_dist_cols<T: Real>(f: &Matrix<T>, i: usize, j: usize) -> T {
    (0..f.rows())
        .map(|k| {
            let diff = f[(k, i)] - f[(k, j)];
            diff * diff
        })
        .sum()
}

/// Poisson intensity exp(α − ‖f_i − f_j‖²).
pub fn intensity<T: Real>(alpha: T, fi: &[T], fj: &[T]) -> Result<T> {
    if fi.len() != fj.len() {
        return Err(Error::Numeric(format!(
            "position lengths differ: {} vs {}",
            fi.len(),
            fj.len()
        )));
    }
    if !alpha.is_finite() || fi.iter().chain(fj).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite input to intensity".into()));
    }
    let dist: T = fi.iter().zip(fj).map(|(&a, &b)| (a - b) * (a - b)).sum();
    Ok((alpha - dist).exp())
}

fn check_network<T: Real>(net: &WeightedNetwork, lat: &LatentState<T>) -> Result<()> {
    if net.n() != lat.n() {
        return Err(Error::Dimension(format!(
            "network has {} nodes, latent state has {}",
            net.n(),
            lat.n()
        )));
    }
    Ok(())
}

/// Σ_{i<j} [w_ij log θ_ij − θ_ij − log(w_ij!)].
pub fn network_log_lik<T: Real>(net: &WeightedNetwork, lat: &LatentState<T>) -> Result<T> {
    check_network(net, lat)?;
    let f = &lat.positions;
    let terms: Vec<T> = net
        .pairs()
        .map(|(i, j, w)| {
            let log_theta = lat.alpha - sq_dist_cols(f, i, j);
            T::of(w as f64) * log_theta - log_theta.exp()
        })
        .collect();
    let total = pairwise_sum(&terms) - T::of(net.log_factorial_sum());
    if !total.is_finite() {
        return Err(Error::Numeric("network log-likelihood is not finite".into()));
    }
    Ok(total)
}

fn check_interp<T: Real>(y: &InterpData<T>, load: &LoadingState<T>, lat: &LatentState<T>) -> Result<()> {
    if y.p() != load.p() || y.n() != lat.n() || load.dim() != lat.dim() || load.idio_var.len() != load.p() {
        return Err(Error::Dimension(format!(
            "interp {}×{}, loadings {}×{}, positions {}×{}",
            y.p(),
            y.n(),
            load.p(),
            load.dim(),
            lat.dim(),
            lat.n()
        )));
    }
    if let Some(l) = load.idio_var.iter().position(|&v| !(v > T::zero())) {
        return Err(Error::Numeric(format!(
            "idiosyncratic variance of row {} is not positive",
            l + 1
        )));
    }
    Ok(())
}

/// Σ_l Σ_i log N(y_li; (Λf)_li, σ²_l): the matrix-normal density with row
/// covariance diag(σ²) and identity column covariance.
pub fn interp_log_lik<T: Real>(y: &InterpData<T>, load: &LoadingState<T>, lat: &LatentState<T>) -> Result<T> {
    check_interp(y, load, lat)?;
    let fitted = load.fitted(&lat.positions);
    let terms: Vec<T> =
        y.y.cells()
            .map(|(l, i, &obs)| ln_normal(obs, fitted[(l, i)], load.idio_var[l]))
            .collect();
    Ok(pairwise_sum(&terms))
}

/// Sum of every log prior density in the model.
///
/// PositiveDiagonal cells carry the half-normal density 2·N(λ; 0, κσ²_k);
/// Beta terms for τ vanish under the default Beta(1, 1).
pub fn log_prior<T: Real>(
    lat: &LatentState<T>,
    load: &LoadingState<T>,
    hp: &Hyperparams<T>,
    pat: &RestrictionPattern,
) -> Result<T> {
    let report = validate_state(lat, load, pat)?;
    if !report.only_center_drift() {
        return Err(Error::InvalidState(report.to_string()));
    }
    let zero = T::zero();
    let mut terms = vec![ln_normal(lat.alpha, zero, hp.sigma2_alpha)];

    let f_var = position_prior_variance::<T>(lat.dim());
    terms.extend(lat.positions.iter().map(|&v| ln_normal(v, zero, f_var)));

    terms.extend(load.idio_var.iter().map(|&v| ln_inv_gamma(v, hp.c0, hp.big_c0)));
    terms.extend(load.col_scale.iter().map(|&v| ln_inv_gamma(v, hp.c_sigma, hp.b_sigma)));
    terms.push(ln_inv_gamma(load.kappa, hp.c_kappa, hp.b_kappa));
    terms.extend(load.tau.iter().map(|&t| ln_beta_density(t, hp.tau_a, hp.tau_b)));

    for (l, k, &cell) in pat.cells.cells() {
        let slab_var = load.kappa * load.col_scale[k];
        let value = load.lambda[(l, k)];
        match cell {
            Cell::FixedZero => {}
            Cell::PositiveDiagonal => terms.push(T::LN_2() + ln_normal(value, zero, slab_var)),
            Cell::Free => {
                let tau = load.tau[l];
                if load.indicators[(l, k)] {
                    terms.push(tau.ln() + ln_normal(value, zero, slab_var));
                } else {
                    terms.push((T::one() - tau).ln());
                }
            }
        }
    }
    Ok(pairwise_sum(&terms))
}

/// network_log_lik + interp_log_lik + log_prior.
pub fn log_posterior<T: Real>(
    net: &WeightedNetwork,
    y: &InterpData<T>,
    lat: &LatentState<T>,
    load: &LoadingState<T>,
    hp: &Hyperparams<T>,
    pat: &RestrictionPattern,
) -> Result<T> {
    Ok(network_log_lik(net, lat)? + interp_log_lik(y, load, lat)? + log_prior(lat, load, hp, pat)?)
}
