//! Sparse Bayesian latent-space models for integer-weighted networks.
//!
//! Edge weights are Poisson with intensity exp(α − ‖f_i − f_j‖²) over latent
//! positions f_i ∈ ℝ^d. An auxiliary Gaussian factor equation Y = Λf + ε
//! ties node covariates to the positions; a spike-and-slab prior on Λ and
//! optional triangular restrictions (PLT or ordered GLT) pin down the
//! rotation and reflection the network likelihood cannot see.
//!
//! Core types are generic over [`Real`]; the aliases below fix the scalar
//! to `f64` (what the CLI and file formats use) or `f32`.

pub mod diagnostics;
pub mod dist;
pub mod error;
pub mod io;
pub mod likelihood;
pub mod matrix;
pub mod model;
pub mod rng;
pub mod sampler;
pub mod scalar;
pub mod simulate;

pub use error::{Error, Result};
pub use likelihood::{intensity, interp_log_lik, log_posterior, log_prior, network_log_lik, InterpData};
pub use matrix::Matrix;
pub use model::{
    build_pattern, validate_state, Cell, Hyperparams, LatentState, LoadingState, RestrictionKind, RestrictionPattern,
    ValidationReport, Violation, WeightedNetwork,
};
pub use sampler::{run_chain, run_chain_with, ChainOutput, ChainRecord, ChainState, Posterior, SamplerConfig};
pub use scalar::Real;
pub use simulate::{gen_interp, gen_network, gen_truth, Truth};

pub type LatentState64 = LatentState<f64>;
pub type LoadingState64 = LoadingState<f64>;
pub type InterpData64 = InterpData<f64>;
pub type Hyperparams64 = Hyperparams<f64>;
pub type ChainState64 = ChainState<f64>;
pub type ChainRecord64 = ChainRecord<f64>;
pub type Truth64 = Truth<f64>;

pub type LatentState32 = LatentState<f32>;
pub type LoadingState32 = LoadingState<f32>;
pub type InterpData32 = InterpData<f32>;
pub type Hyperparams32 = Hyperparams<f32>;
pub type ChainState32 = ChainState<f32>;
pub type ChainRecord32 = ChainRecord<f32>;
