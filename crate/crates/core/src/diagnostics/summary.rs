//! Posterior summaries of a stored chain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::sq_dist_cols;
use crate::matrix::Matrix;
use crate::model::WeightedNetwork;
use crate::sampler::ChainRecord;
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    /// 2.5% and 97.5% sample quantiles.
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub draws: usize,
    pub params: Vec<ParamSummary>,
    /// Mean of δ_lk over draws.
    pub inclusion: Matrix<f64>,
    /// Fraction of draws with every δ in row l equal to zero.
    pub row_zero: Vec<f64>,
    pub mean_positions: Matrix<f64>,
    pub mean_lambda: Matrix<f64>,
}

impl ChainSummary {
    pub fn param(&self, name: &str) -> Option<&ParamSummary> {
        self.params.iter().find(|p| p.name == name)
    }
}

/// Linear interpolation between order statistics of a sorted slice.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize_series(name: impl Into<String>, xs: &[f64]) -> ParamSummary {
    let n = xs.len() as f64;
    // shifted by the first value so constant series summarize exactly
    let mean = xs[0] + xs.iter().map(|x| x - xs[0]).sum::<f64>() / n;
    let sd = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    ParamSummary {
        name: name.into(),
        mean,
        sd,
        lower: quantile(&sorted, 0.025),
        upper: quantile(&sorted, 0.975),
    }
}

/// Every scalar in a record, paired with its 1-based name, in chain file
/// column order (indicators excluded).
pub fn named_values<T: Real>(rec: &ChainRecord<T>) -> Vec<(String, f64)> {
    let mut out = vec![("alpha".to_string(), rec.alpha.as_f64())];
    let (d, n) = rec.positions.shape();
    for k in 0..d {
        for i in 0..n {
            out.push((format!("f[{},{}]", k + 1, i + 1), rec.positions[(k, i)].as_f64()));
        }
    }
    for (l, k, v) in rec.lambda.cells() {
        out.push((format!("lambda[{},{}]", l + 1, k + 1), v.as_f64()));
    }
    for (l, v) in rec.tau.iter().enumerate() {
        out.push((format!("tau[{}]", l + 1), v.as_f64()));
    }
    for (k, v) in rec.col_scale.iter().enumerate() {
        out.push((format!("col_scale[{}]", k + 1), v.as_f64()));
    }
    out.push(("kappa".into(), rec.kappa.as_f64()));
    for (l, v) in rec.idio_var.iter().enumerate() {
        out.push((format!("idio_var[{}]", l + 1), v.as_f64()));
    }
    out.push(("log_post".into(), rec.log_posterior.as_f64()));
    out
}

pub fn summarize<T: Real>(chain: &[ChainRecord<T>]) -> Result<ChainSummary> {
    let first = chain.first().ok_or(Error::EmptyChain)?;
    let names: Vec<String> = named_values(first).into_iter().map(|(n, _)| n).collect();
    let mut columns = vec![Vec::with_capacity(chain.len()); names.len()];
    for rec in chain {
        if rec.positions.shape() != first.positions.shape() || rec.lambda.shape() != first.lambda.shape() {
            return Err(Error::Dimension("chain records differ in shape".into()));
        }
        for (col, (_, v)) in columns.iter_mut().zip(named_values(rec)) {
            col.push(v);
        }
    }
    let params: Vec<ParamSummary> = names
        .into_iter()
        .zip(&columns)
        .map(|(n, xs)| summarize_series(n, xs))
        .collect();

    let m = chain.len() as f64;
    let (p, d) = first.lambda.shape();
    let mut hits = Matrix::<f64>::zeros(p, d);
    let mut row_zero = vec![0.0; p];
    for rec in chain {
        for (l, zero) in row_zero.iter_mut().enumerate() {
            let mut any = false;
            for k in 0..d {
                if rec.indicators[(l, k)] {
                    hits[(l, k)] += 1.0;
                    any = true;
                }
            }
            if !any {
                *zero += 1.0;
            }
        }
    }
    let mean_of = |name: &str| params.iter().find(|s| s.name == name).map_or(f64::NAN, |s| s.mean);
    let n = first.positions.cols();
    Ok(ChainSummary {
        draws: chain.len(),
        inclusion: hits.map(|h| h / m),
        row_zero: row_zero.into_iter().map(|z| z / m).collect(),
        mean_positions: Matrix::from_fn(d, n, |k, i| mean_of(&format!("f[{},{}]", k + 1, i + 1))),
        mean_lambda: Matrix::from_fn(p, d, |l, k| mean_of(&format!("lambda[{},{}]", l + 1, k + 1))),
        params,
    })
}

/// Observed weight against the posterior mean intensity of one pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeFit {
    /// 0-based, `i < j`.
    pub i: usize,
    pub j: usize,
    pub observed: u64,
    pub fitted: f64,
    pub abs_diff: f64,
}

/// Per-pair |w_ij − θ̂_ij| with θ̂ the posterior mean of exp(α − ‖f_i − f_j‖²).
pub fn edge_fit<T: Real>(net: &WeightedNetwork, chain: &[ChainRecord<T>]) -> Result<Vec<EdgeFit>> {
    let first = chain.first().ok_or(Error::EmptyChain)?;
    if first.positions.cols() != net.n() {
        return Err(Error::Dimension(format!(
            "chain has {} nodes, network {}",
            first.positions.cols(),
            net.n()
        )));
    }
    let mut out: Vec<EdgeFit> = net
        .pairs()
        .map(|(i, j, w)| EdgeFit {
            i,
            j,
            observed: w,
            fitted: 0.0,
            abs_diff: 0.0,
        })
        .collect();
    for rec in chain {
        let alpha = rec.alpha.as_f64();
        for e in &mut out {
            e.fitted += (alpha - sq_dist_cols(&rec.positions, e.i, e.j).as_f64()).exp();
        }
    }
    for e in &mut out {
        e.fitted /= chain.len() as f64;
        e.abs_diff = (e.observed as f64 - e.fitted).abs();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(lambda: [[f64; 2]; 2], on: [[bool; 2]; 2]) -> ChainRecord<f64> {
        ChainRecord {
            draw: 1,
            alpha: 0.5,
            positions: Matrix::from_rows(&[vec![1.0, -1.0, 0.0], vec![0.5, 0.0, -0.5]]).unwrap(),
            lambda: Matrix::from_fn(2, 2, |l, k| lambda[l][k]),
            indicators: Matrix::from_fn(2, 2, |l, k| on[l][k]),
            tau: vec![0.3, 0.6],
            col_scale: vec![1.0, 2.0],
            kappa: 1.5,
            idio_var: vec![0.2, 0.4],
            log_posterior: -12.0,
        }
    }

    #[test]
    fn empty_chain() {
        assert!(matches!(summarize::<f64>(&[]), Err(Error::EmptyChain)));
    }

    #[test]
    fn identical_records_collapse() {
        let r = record([[1.0, 0.0], [0.3, 2.0]], [[true, false], [true, true]]);
        let s = summarize(&[r.clone(), r.clone(), r]).unwrap();
        for p in &s.params {
            assert_eq!(p.sd, 0.0, "{}", p.name);
            assert_eq!(p.lower, p.mean);
            assert_eq!(p.upper, p.mean);
        }
        assert_eq!(s.param("alpha").unwrap().mean, 0.5);
        assert_eq!(s.param("f[2,3]").unwrap().mean, -0.5);
        // diagonal always on, the fixed zero never
        assert_eq!(s.inclusion[(0, 0)], 1.0);
        assert_eq!(s.inclusion[(0, 1)], 0.0);
        assert_eq!(s.row_zero, vec![0.0, 0.0]);
    }

    #[test]
    fn two_record_arithmetic() {
        let a = record([[1.0, 0.0], [0.0, 1.0]], [[true, false], [false, true]]);
        let b = record([[1.0, 0.0], [2.0, 1.0]], [[true, false], [true, true]]);
        let s = summarize(&[a, b]).unwrap();
        assert_eq!(s.param("lambda[2,1]").unwrap().mean, 1.0);
        assert_eq!(s.inclusion[(1, 0)], 0.5);
        assert_eq!(s.mean_lambda[(1, 0)], 1.0);
    }

    #[test]
    fn row_zero_probability() {
        let a = record([[1.0, 0.0], [0.0, 0.0]], [[true, false], [false, false]]);
        let b = record([[1.0, 0.0], [0.0, 0.7]], [[true, false], [false, true]]);
        let s = summarize(&[a.clone(), a, b]).unwrap();
        assert!((s.row_zero[1] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.row_zero[0], 0.0);
    }

    #[test]
    fn every_parameter_named_once() {
        let r = record([[1.0, 0.0], [0.3, 2.0]], [[true, false], [true, true]]);
        let s = summarize(&[r]).unwrap();
        // α, 6 positions, 4 loadings, 2 τ, 2 column scales, κ, 2 idio, log post
        assert_eq!(s.params.len(), 1 + 6 + 4 + 2 + 2 + 1 + 2 + 1);
        let mut names: Vec<_> = s.params.iter().map(|p| p.name.clone()).collect();
        names.dedup();
        assert_eq!(names.len(), s.params.len());
    }

    #[test]
    fn edge_fit_averages_intensity() {
        let net = WeightedNetwork::from_edges(3, [(0, 1, 2), (1, 2, 0)]).unwrap();
        let mut a = record([[1.0, 0.0], [0.0, 1.0]], [[true, false], [false, true]]);
        let mut b = a.clone();
        a.alpha = 0.0;
        b.alpha = 1.0f64.ln();
        let fits = edge_fit(&net, &[a, b]).unwrap();
        assert_eq!(fits.len(), 3);
        // nodes 1 and 2 sit at (1, 0.5) and (−1, 0): squared distance 4.25
        let want = 0.5 * (1.0 + 1.0) * (-4.25f64).exp();
        assert!((fits[0].fitted - want).abs() < 1e-15);
        assert!((fits[0].abs_diff - (2.0 - want)).abs() < 1e-15);
        assert_eq!((fits[2].i, fits[2].j, fits[2].observed), (1, 2, 0));
    }

    #[test]
    fn quantiles_interpolate() {
        let xs: Vec<f64> = (0..=100).map(f64::from).collect();
        let s = summarize_series("x", &xs);
        assert!((s.lower - 2.5).abs() < 1e-12);
        assert!((s.upper - 97.5).abs() < 1e-12);
        assert_eq!(s.mean, 50.0);
    }
}
