//! Orthogonal Procrustes alignment of position draws onto a target
//! configuration.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Real;

/// Relative singular-value floor below which the cross-covariance is
/// treated as rank deficient.
const RANK_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct AlignedDraw {
    pub aligned: Matrix<f64>,
    /// d×d orthogonal map, reflections allowed.
    pub rotation: Matrix<f64>,
    pub translation: Vec<f64>,
    pub raw_rmse: f64,
    pub aligned_rmse: f64,
    /// Set when the cross-covariance was rank deficient and the identity
    /// rotation was used.
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Alignment {
    pub draws: Vec<AlignedDraw>,
}

impl Alignment {
    pub fn any_degenerate(&self) -> bool {
        self.draws.iter().any(|d| d.degenerate)
    }

    pub fn mean_raw_rmse(&self) -> f64 {
        self.draws.iter().map(|d| d.raw_rmse).sum::<f64>() / self.draws.len().max(1) as f64
    }

    pub fn mean_aligned_rmse(&self) -> f64 {
        self.draws.iter().map(|d| d.aligned_rmse).sum::<f64>() / self.draws.len().max(1) as f64
    }
}

/// Root mean squared node displacement: √(Σ_i ‖a_i − b_i‖² / n).
pub fn rmse<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> f64 {
    let sq: f64 = a.iter().zip(b.iter()).map(|(&x, &y)| (x - y).as_f64().powi(2)).sum();
    (sq / a.cols() as f64).sqrt()
}

fn to_dmatrix<T: Real>(m: &Matrix<T>) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |r, c| m[(r, c)].as_f64())
}

fn row_means(m: &DMatrix<f64>) -> Vec<f64> {
    (0..m.nrows()).map(|r| m.row(r).mean()).collect()
}

fn centered(m: &DMatrix<f64>, means: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)] - means[r])
}

/// Finds the orthogonal Q and translation t minimizing ‖QF + t1ᵀ − target‖
/// from the SVD of the centered cross-covariance.
pub fn align_one<T: Real>(draw: &Matrix<T>, target: &Matrix<T>) -> Result<AlignedDraw> {
    if draw.shape() != target.shape() {
        return Err(Error::Dimension(format!(
            "draw is {}×{}, target {}×{}",
            draw.rows(),
            draw.cols(),
            target.rows(),
            target.cols()
        )));
    }
    let (d, n) = draw.shape();
    if d > n {
        return Err(Error::Dimension(format!("alignment needs d ≤ n, got d = {d}, n = {n}")));
    }
    let f = to_dmatrix(draw);
    let t = to_dmatrix(target);
    let (f_mean, t_mean) = (row_means(&f), row_means(&t));
    let (fc, tc) = (centered(&f, &f_mean), centered(&t, &t_mean));

    let cross = &tc * fc.transpose();
    let svd = cross.svd(true, true);
    let sv = &svd.singular_values;
    let top = sv.max();
    let degenerate = !(top > 0.0) || sv.min() <= RANK_TOL * top;
    let q = if degenerate {
        log::warn!("rank-deficient cross-covariance in Procrustes alignment; using identity rotation");
        DMatrix::identity(d, d)
    } else {
        svd.u.as_ref().expect("u requested") * svd.v_t.as_ref().expect("v_t requested")
    };

    let rotated = &q * &fc;
    let aligned = Matrix::from_fn(d, n, |r, c| rotated[(r, c)] + t_mean[r]);
    // translation in the original frame: t = mean(target) − Q mean(draw)
    let q_fmean = &q * DMatrix::from_column_slice(d, 1, &f_mean);
    let translation = (0..d).map(|r| t_mean[r] - q_fmean[(r, 0)]).collect();
    let target64 = target.map(|v| v.as_f64());
    Ok(AlignedDraw {
        aligned_rmse: rmse(&aligned, &target64),
        raw_rmse: rmse(draw, target),
        rotation: Matrix::from_fn(d, d, |r, c| q[(r, c)]),
        translation,
        aligned,
        degenerate,
    })
}

pub fn procrustes_align<T: Real>(draws: &[Matrix<T>], target: &Matrix<T>) -> Result<Alignment> {
    let draws = draws.iter().map(|d| align_one(d, target)).collect::<Result<Vec<_>>>()?;
    Ok(Alignment { draws })
}
