//! Chain post-processing: summaries, identification metrics, effective
//! sample size and the joint-distribution check of the sampler.

pub mod ess;
pub mod geweke;
pub mod procrustes;
pub mod summary;

pub use ess::{ess, Ess};
pub use geweke::{
    geweke_joint_test, geweke_joint_test_with, micro_hyperparams, GewekeConfig, GewekeDims, GewekeReport,
};
pub use procrustes::{align_one, procrustes_align, rmse, AlignedDraw, Alignment};
pub use summary::{edge_fit, summarize, ChainSummary, EdgeFit, ParamSummary};
