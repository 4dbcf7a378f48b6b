//! Burn-in orientation of the latent configuration.
//!
//! The network likelihood cannot see rotations or reflections of the
//! positions, and random-walk moves of single nodes cannot turn a whole
//! configuration, so a chain settles in whatever orientation the burn-in
//! happened to produce. Under a restriction pattern only one orientation
//! fits the interpretation data well. This step searches the orthogonal
//! group for it: Givens-angle grid search on the pattern-restricted least
//! squares fit of Y on Qf, then column sign flips to make pivots positive.
//! Without restrictions the fit is rotation invariant and nothing moves.
//! It only ever runs during burn-in.

use crate::matrix::Matrix;
use crate::model::{Cell, RestrictionPattern};
use crate::scalar::Real;

const ANGLE_STEPS: usize = 360;
const PASSES: usize = 3;
/// Minimum improvement of the fit before a rotation is taken, relative to
/// the current fit and, as a floor, to the weighted ‖Y‖².
const REL_TOL: f64 = 1e-6;
const ABS_TOL: f64 = 1e-10;

/// Solves the small symmetric system `a x = b` by Gaussian elimination
/// with partial pivoting; `None` when singular.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let m = b.len();
    for c in 0..m {
        let piv = (c..m).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[piv][c].abs() < 1e-12 {
            return None;
        }
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..m {
            let f = a[r][c] / a[c][c];
            let (top, bottom) = a.split_at_mut(r);
            for (x, &y) in bottom[0][c..].iter_mut().zip(&top[c][c..]) {
                *x -= f * y;
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; m];
    for c in (0..m).rev() {
        let s: f64 = (c + 1..m).map(|k| a[c][k] * x[k]).sum();
        x[c] = (b[c] - s) / a[c][c];
    }
    Some(x)
}

/// Least squares coefficients of each row of `y` on the pattern-permitted
/// rows of `f` (FixedZero cells get 0), plus the weighted residual sum of
/// squares.
pub(crate) fn restricted_fit(
    y: &Matrix<f64>,
    f: &Matrix<f64>,
    pat: &RestrictionPattern,
    weights: &[f64],
) -> (Matrix<f64>, f64) {
    let (p, d) = (pat.p(), pat.dim());
    let n = f.cols();
    let mut coef = Matrix::zeros(p, d);
    let mut rss = 0.0;
    for l in 0..p {
        let cols: Vec<usize> = (0..d).filter(|&k| pat.cell(l, k) != Cell::FixedZero).collect();
        let gram: Vec<Vec<f64>> = cols
            .iter()
            .map(|&a| {
                cols.iter()
                    .map(|&b| (0..n).map(|i| f[(a, i)] * f[(b, i)]).sum())
                    .collect()
            })
            .collect();
        let rhs: Vec<f64> = cols
            .iter()
            .map(|&a| (0..n).map(|i| f[(a, i)] * y[(l, i)]).sum())
            .collect();
        let beta = solve(gram, rhs).unwrap_or_else(|| vec![0.0; cols.len()]);
        for (&k, &b) in cols.iter().zip(&beta) {
            coef[(l, k)] = b;
        }
        let resid: f64 = (0..n)
            .map(|i| {
                let fit: f64 = cols.iter().zip(&beta).map(|(&k, &b)| b * f[(k, i)]).sum();
                (y[(l, i)] - fit).powi(2)
            })
            .sum();
        rss += resid / weights[l];
    }
    (coef, rss)
}

fn givens(d: usize, a: usize, b: usize, angle: f64) -> Matrix<f64> {
    let mut g = Matrix::from_fn(d, d, |r, c| if r == c { 1.0 } else { 0.0 });
    let (s, c) = angle.sin_cos();
    g[(a, a)] = c;
    g[(b, b)] = c;
    g[(a, b)] = -s;
    g[(b, a)] = s;
    g
}

/// The orthogonal map to apply to the positions, or `None` when the
/// current orientation is already the best found.
pub(crate) fn best_orientation<T: Real>(
    y: &Matrix<T>,
    positions: &Matrix<T>,
    pat: &RestrictionPattern,
    idio_var: &[T],
) -> Option<Matrix<f64>> {
    let d = pat.dim();
    let y = y.map(|v| v.as_f64());
    let f0 = positions.map(|v| v.as_f64());
    let w: Vec<f64> = idio_var.iter().map(|v| v.as_f64()).collect();

    let scale: f64 = (0..y.rows())
        .map(|l| y.row(l).iter().map(|v| v * v).sum::<f64>() / w[l])
        .sum();
    let better = |rss: f64, than: f64| rss < than * (1.0 - REL_TOL) - ABS_TOL * scale;
    let start = restricted_fit(&y, &f0, pat, &w).1;
    let mut q = Matrix::from_fn(d, d, |r, c| if r == c { 1.0 } else { 0.0 });
    let mut best = start;
    for _ in 0..PASSES {
        let mut improved = false;
        for a in 0..d {
            for b in a + 1..d {
                let mut pick = None;
                for s in 1..ANGLE_STEPS {
                    let angle = std::f64::consts::TAU * s as f64 / ANGLE_STEPS as f64;
                    let cand = givens(d, a, b, angle).matmul(&q);
                    let rss = restricted_fit(&y, &cand.matmul(&f0), pat, &w).1;
                    if better(rss, best) {
                        best = rss;
                        pick = Some(cand);
                    }
                }
                if let Some(c) = pick {
                    q = c;
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }

    // Column sign flips leave the fit unchanged; make the pivot
    // coefficients positive.
    let (coef, _) = restricted_fit(&y, &q.matmul(&f0), pat, &w);
    let mut flipped = false;
    for (l, k, &cell) in pat.cells.cells() {
        if cell == Cell::PositiveDiagonal && coef[(l, k)] < 0.0 {
            for c in 0..d {
                q[(k, c)] = -q[(k, c)];
            }
            flipped = true;
        }
    }
    (better(best, start) || flipped).then_some(q)
}
