//! Model objects, loading restriction patterns and invariant validation.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Real;

/// Tolerance on |row sum| of the position matrix for a centered state.
pub const CENTER_TOL: f64 = 1e-8;

/// Undirected integer-weighted network without self-loops.
///
/// Weights are stored densely and symmetrically; the diagonal is always
/// zero and never read by likelihood code.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedNetwork {
    n: usize,
    weights: Vec<u64>,
    log_factorial_sum: f64,
}

impl WeightedNetwork {
    /// Empty network on `n ≥ 2` nodes.
    pub fn empty(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Dimension(format!("network needs at least 2 nodes, got {n}")));
        }
        Ok(WeightedNetwork {
            n,
            weights: vec![0; n * n],
            log_factorial_sum: 0.0,
        })
    }

    /// Builds from 0-based `(i, j, w)` triples. Each unordered pair may
    /// appear at most once; self-loops are rejected.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize, u64)>) -> Result<Self> {
        let mut net = Self::empty(n)?;
        let mut seen = vec![false; n * n];
        for (i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::Data(format!(
                    "edge ({}, {}) outside a network of {n} nodes",
                    i + 1,
                    j + 1
                )));
            }
            if i == j {
                return Err(Error::Data(format!("self-loop on node {}", i + 1)));
            }
            let (a, b) = (i.min(j), i.max(j));
            if seen[a * n + b] {
                let msg = if net.weight(a, b) != w {
                    "asymmetric redundant pair"
                } else {
                    "duplicate pair"
                };
                return Err(Error::Data(format!("{msg} ({}, {})", a + 1, b + 1)));
            }
            seen[a * n + b] = true;
            net.weights[a * n + b] = w;
            net.weights[b * n + a] = w;
        }
        net.refresh_constants();
        Ok(net)
    }

    /// Like [`from_edges`](Self::from_edges) but for real-valued weights
    /// read from text: rejects negative, non-finite and fractional values.
    pub fn from_real_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut checked = Vec::new();
        for (i, j, w) in edges {
            if !w.is_finite() || w < 0.0 || w.fract() != 0.0 || w > u64::MAX as f64 {
                return Err(Error::Data(format!(
                    "weight {w} on pair ({}, {}) is not a non-negative integer",
                    i + 1,
                    j + 1
                )));
            }
            checked.push((i, j, w as u64));
        }
        Self::from_edges(n, checked)
    }

    fn refresh_constants(&mut self) {
        self.log_factorial_sum = self.pairs().map(|(_, _, w)| log_factorial(w)).sum();
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> u64 {
        self.weights[i * self.n + j]
    }

    pub fn set_weight(&mut self, i: usize, j: usize, w: u64) {
        assert!(i != j, "self-loops are not part of the model");
        self.weights[i * self.n + j] = w;
        self.weights[j * self.n + i] = w;
        self.refresh_constants();
    }

    /// Upper-triangle `(i, j, w)` with `i < j`, row-major.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        (0..self.n).flat_map(move |i| (i + 1..self.n).map(move |j| (i, j, self.weight(i, j))))
    }

    pub fn total_weight(&self) -> u64 {
        self.pairs().map(|(_, _, w)| w).sum()
    }

    /// Mean over node pairs with a strictly positive weight, 0 if none.
    pub fn mean_positive_weight(&self) -> f64 {
        let (sum, count) = self
            .pairs()
            .filter(|&(_, _, w)| w > 0)
            .fold((0u64, 0u64), |(s, c), (_, _, w)| (s + w, c + 1));
        if count == 0 {
            0.0
        } else {
            sum as f64 / count as f64
        }
    }

    /// Σ_{i<j} log(w_ij!).
    pub fn log_factorial_sum(&self) -> f64 {
        self.log_factorial_sum
    }
}

pub(crate) fn log_factorial(w: u64) -> f64 {
    statrs::function::gamma::ln_gamma(w as f64 + 1.0)
}

/// Intercept and latent positions. Column `i` of `positions` is node i's
/// d-vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentState<T> {
    pub alpha: T,
    pub positions: Matrix<T>,
    /// Set once every row of `positions` has been recentered to sum 0.
    pub centered: bool,
}

impl<T: Real> LatentState<T> {
    pub fn new(alpha: T, positions: Matrix<T>) -> Result<Self> {
        check_dim(positions.rows())?;
        if positions.cols() < 2 {
            return Err(Error::Dimension("latent state needs at least 2 nodes".into()));
        }
        Ok(LatentState {
            alpha,
            positions,
            centered: false,
        })
    }

    pub fn dim(&self) -> usize {
        self.positions.rows()
    }

    pub fn n(&self) -> usize {
        self.positions.cols()
    }

    pub fn position(&self, i: usize) -> Vec<T> {
        self.positions.col(i)
    }

    /// Subtracts each row's mean and flags the state as centered.
    pub fn recenter(&mut self) {
        let n = T::of(self.n() as f64);
        for k in 0..self.dim() {
            let row = self.positions.row_mut(k);
            let mean = crate::scalar::pairwise_sum(row) / n;
            row.iter_mut().for_each(|v| *v = *v - mean);
        }
        self.centered = true;
    }
}

/// Latent dimension must be at least 2: the position prior variance
/// d/(d−1) is undefined at d = 1.
pub fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::Dimension(format!(
            "latent dimension must be at least 2, got {d}"
        )));
    }
    Ok(())
}

/// Per-coordinate prior variance of a latent position, (1 − 1/d)⁻¹.
pub fn position_prior_variance<T: Real>(d: usize) -> T {
    let d = T::of(d as f64);
    T::one() / (T::one() - T::one() / d)
}

/// Loadings of the interpretation equation and their spike-and-slab
/// hierarchy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadingState<T> {
    /// p×d loading matrix.
    pub lambda: Matrix<T>,
    /// p×d slab indicators; `false` is the point mass at zero.
    pub indicators: Matrix<bool>,
    /// Row inclusion probabilities.
    pub tau: Vec<T>,
    /// Slab column scales σ²_k.
    pub col_scale: Vec<T>,
    /// Global slab scale.
    pub kappa: T,
    /// Idiosyncratic variances (diagonal of the row covariance of ε).
    pub idio_var: Vec<T>,
}

impl<T: Real> LoadingState<T> {
    pub fn p(&self) -> usize {
        self.lambda.rows()
    }

    pub fn dim(&self) -> usize {
        self.lambda.cols()
    }

    /// Λf as a p×n matrix.
    pub fn fitted(&self, positions: &Matrix<T>) -> Matrix<T> {
        self.lambda.matmul(positions)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cell {
    Free,
    FixedZero,
    PositiveDiagonal,
}

/// Loading restriction. GLT pivot rows are 1-based, as users write them.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum RestrictionKind {
    Unrestricted,
    Plt,
    Glt { pivots: Vec<usize> },
}

impl fmt::Display for RestrictionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RestrictionKind::Unrestricted => f.write_str("unrestricted"),
            RestrictionKind::Plt => f.write_str("plt"),
            RestrictionKind::Glt { pivots } => {
                let joined: Vec<String> = pivots.iter().map(usize::to_string).collect();
                write!(f, "glt({})", joined.join(","))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestrictionPattern {
    pub cells: Matrix<Cell>,
    pub kind: RestrictionKind,
}

/// Builds the p×d cell map for a restriction kind.
///
/// PLT is GLT with pivots (1, …, d): column k has its positive pivot on
/// row k and fixed zeros above it.
pub fn build_pattern(kind: &RestrictionKind, p: usize, d: usize) -> Result<RestrictionPattern> {
    check_dim(d)?;
    if p < d {
        return Err(Error::Dimension(format!("need p ≥ d, got p = {p}, d = {d}")));
    }
    let pivots: Option<Vec<usize>> = match kind {
        RestrictionKind::Unrestricted => None,
        RestrictionKind::Plt => Some((0..d).collect()),
        RestrictionKind::Glt { pivots } => {
            if pivots.len() != d {
                return Err(Error::InvalidPivots(format!(
                    "expected {d} pivots, got {}",
                    pivots.len()
                )));
            }
            if pivots.iter().any(|&l| l == 0 || l > p) {
                return Err(Error::InvalidPivots(format!("pivot rows must lie in 1..={p}")));
            }
            if pivots.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidPivots(format!(
                    "pivots must be strictly increasing, got {pivots:?}"
                )));
            }
            Some(pivots.iter().map(|l| l - 1).collect())
        }
    };
    let cells = Matrix::from_fn(p, d, |l, k| match &pivots {
        None => Cell::Free,
        Some(piv) if l == piv[k] => Cell::PositiveDiagonal,
        Some(piv) if l < piv[k] => Cell::FixedZero,
        Some(_) => Cell::Free,
    });
    Ok(RestrictionPattern {
        cells,
        kind: kind.clone(),
    })
}

impl RestrictionPattern {
    pub fn p(&self) -> usize {
        self.cells.rows()
    }

    pub fn dim(&self) -> usize {
        self.cells.cols()
    }

    #[inline]
    pub fn cell(&self, l: usize, k: usize) -> Cell {
        self.cells[(l, k)]
    }

    pub fn count(&self, which: Cell) -> usize {
        self.cells.iter().filter(|&&c| c == which).count()
    }

    /// Columns of row `l` that are sampled (not fixed at zero).
    pub fn sampled_cols(&self, l: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.dim()).filter(move |&k| self.cell(l, k) != Cell::FixedZero)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams<T> {
    pub sigma2_alpha: T,
    pub c0: T,
    #[serde(rename = "C0")]
    pub big_c0: T,
    pub c_sigma: T,
    pub b_sigma: T,
    pub c_kappa: T,
    pub b_kappa: T,
    pub tau_a: T,
    pub tau_b: T,
}

impl<T: Real> Default for Hyperparams<T> {
    /// Weakly informative settings with finite prior means.
    fn default() -> Self {
        let v = T::of(2.5);
        Hyperparams {
            sigma2_alpha: T::of(10.0),
            c0: v,
            big_c0: v,
            c_sigma: v,
            b_sigma: v,
            c_kappa: v,
            b_kappa: v,
            tau_a: T::one(),
            tau_b: T::one(),
        }
    }
}

impl<T: Real> Hyperparams<T> {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("sigma2_alpha", self.sigma2_alpha),
            ("c0", self.c0),
            ("C0", self.big_c0),
            ("c_sigma", self.c_sigma),
            ("b_sigma", self.b_sigma),
            ("c_kappa", self.c_kappa),
            ("b_kappa", self.b_kappa),
            ("tau_a", self.tau_a),
            ("tau_b", self.tau_b),
        ];
        for (name, v) in all {
            if !(v.is_finite() && v > T::zero()) {
                return Err(Error::InvalidState(format!(
                    "hyperparameter {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// One broken invariant. Indices are 1-based.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    FixedZeroNonzero { row: usize, col: usize },
    DiagonalNotPositive { row: usize, col: usize },
    IndicatorMismatch { row: usize, col: usize },
    CenterDrift { row: usize, sum: f64 },
    NonFinite(&'static str),
    NonPositiveVariance(&'static str, usize),
    TauOutOfRange { row: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::FixedZeroNonzero { row, col } => write!(f, "FixedZero cell nonzero at ({row},{col})"),
            Violation::DiagonalNotPositive { row, col } => {
                write!(f, "PositiveDiagonal cell not positive at ({row},{col})")
            }
            Violation::IndicatorMismatch { row, col } => {
                write!(f, "indicator disagrees with loading at ({row},{col})")
            }
            Violation::CenterDrift { row, sum } => write!(f, "center drift row {row} (sum {sum:e})"),
            Violation::NonFinite(what) => write!(f, "non-finite {what}"),
            Violation::NonPositiveVariance(what, idx) => write!(f, "non-positive {what}[{idx}]"),
            Violation::TauOutOfRange { row } => write!(f, "tau outside (0,1) at row {row}"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    /// True when nothing but centering is violated.
    pub(crate) fn only_center_drift(&self) -> bool {
        self.violations
            .iter()
            .all(|v| matches!(v, Violation::CenterDrift { .. }))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msgs: Vec<String> = self.violations.iter().map(Violation::to_string).collect();
        f.write_str(&msgs.join("; "))
    }
}

/// Lists every violated invariant. Only dimension disagreement is an error.
pub fn validate_state<T: Real>(
    lat: &LatentState<T>,
    load: &LoadingState<T>,
    pat: &RestrictionPattern,
) -> Result<ValidationReport> {
    let (p, d) = load.lambda.shape();
    if lat.dim() != d
        || pat.cells.shape() != (p, d)
        || load.indicators.shape() != (p, d)
        || load.tau.len() != p
        || load.idio_var.len() != p
        || load.col_scale.len() != d
    {
        return Err(Error::Dimension(format!(
            "latent d = {}, loadings {p}×{d}, pattern {}×{}, indicators {}×{}, tau {}, idio_var {}, col_scale {}",
            lat.dim(),
            pat.p(),
            pat.dim(),
            load.indicators.rows(),
            load.indicators.cols(),
            load.tau.len(),
            load.idio_var.len(),
            load.col_scale.len()
        )));
    }

    let mut out = Vec::new();
    if !lat.alpha.is_finite() {
        out.push(Violation::NonFinite("alpha"));
    }
    if !lat.positions.all_finite() {
        out.push(Violation::NonFinite("positions"));
    }
    if !load.lambda.all_finite() {
        out.push(Violation::NonFinite("lambda"));
    }

    for (l, k, &cell) in pat.cells.cells() {
        let value = load.lambda[(l, k)];
        let active = load.indicators[(l, k)];
        let (row, col) = (l + 1, k + 1);
        match cell {
            Cell::FixedZero => {
                if active || value != T::zero() {
                    out.push(Violation::FixedZeroNonzero { row, col });
                }
            }
            Cell::PositiveDiagonal => {
                if !active || !(value > T::zero()) {
                    out.push(Violation::DiagonalNotPositive { row, col });
                }
            }
            Cell::Free => {
                if active == (value == T::zero()) {
                    out.push(Violation::IndicatorMismatch { row, col });
                }
            }
        }
    }

    for (l, &t) in load.tau.iter().enumerate() {
        if !(t > T::zero() && t < T::one()) {
            out.push(Violation::TauOutOfRange { row: l + 1 });
        }
    }
    for (what, vals) in [("col_scale", &load.col_scale), ("idio_var", &load.idio_var)] {
        for (idx, &v) in vals.iter().enumerate() {
            if !(v > T::zero() && v.is_finite()) {
                out.push(Violation::NonPositiveVariance(what, idx + 1));
            }
        }
    }
    if !(load.kappa > T::zero() && load.kappa.is_finite()) {
        out.push(Violation::NonPositiveVariance("kappa", 1));
    }

    if lat.centered {
        for k in 0..d {
            let sum = crate::scalar::pairwise_sum(lat.positions.row(k)).as_f64();
            if sum.abs() > CENTER_TOL {
                out.push(Violation::CenterDrift { row: k + 1, sum });
            }
        }
    }
    Ok(ValidationReport { violations: out })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plt_state() -> (LatentState<f64>, LoadingState<f64>, RestrictionPattern) {
        let pat = build_pattern(&RestrictionKind::Plt, 4, 2).unwrap();
        let positions = Matrix::from_rows(&[vec![1.0, -1.0, 0.5, -0.5], vec![0.2, 0.3, -0.1, -0.4]]).unwrap();
        let mut lat = LatentState::new(0.3, positions).unwrap();
        lat.recenter();
        let lambda = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.4, 0.8], vec![0.0, -0.6], vec![0.0, 0.0]]).unwrap();
        let indicators = lambda.map(|&v| v != 0.0);
        let load = LoadingState {
            lambda,
            indicators,
            tau: vec![0.5; 4],
            col_scale: vec![1.0; 2],
            kappa: 1.0,
            idio_var: vec![0.5; 4],
        };
        (lat, load, pat)
    }

    #[test]
    fn plt_p4_d2_cells() {
        let pat = build_pattern(&RestrictionKind::Plt, 4, 2).unwrap();
        assert_eq!(pat.cell(0, 1), Cell::FixedZero);
        assert_eq!(pat.cell(0, 0), Cell::PositiveDiagonal);
        assert_eq!(pat.cell(1, 1), Cell::PositiveDiagonal);
        for (l, k) in [(1, 0), (2, 0), (2, 1), (3, 0), (3, 1)] {
            assert_eq!(pat.cell(l, k), Cell::Free);
        }
    }

    #[test]
    fn unrestricted_is_all_free() {
        let pat = build_pattern(&RestrictionKind::Unrestricted, 4, 2).unwrap();
        assert_eq!(pat.count(Cell::Free), 8);
    }

    #[test]
    fn glt_pivots_2_3() {
        let pat = build_pattern(&RestrictionKind::Glt { pivots: vec![2, 3] }, 4, 2).unwrap();
        // Expected map enumerated by hand from the pivot rule.
        let want = [
            [Cell::FixedZero, Cell::FixedZero],
            [Cell::PositiveDiagonal, Cell::FixedZero],
            [Cell::Free, Cell::PositiveDiagonal],
            [Cell::Free, Cell::Free],
        ];
        for (l, row) in want.iter().enumerate() {
            for (k, &c) in row.iter().enumerate() {
                assert_eq!(pat.cell(l, k), c, "cell ({}, {})", l + 1, k + 1);
            }
        }
    }

    #[test]
    fn pattern_errors() {
        assert!(matches!(
            build_pattern(&RestrictionKind::Glt { pivots: vec![3, 2] }, 4, 2),
            Err(Error::InvalidPivots(_))
        ));
        assert!(matches!(
            build_pattern(&RestrictionKind::Glt { pivots: vec![2, 2] }, 4, 2),
            Err(Error::InvalidPivots(_))
        ));
        assert!(matches!(
            build_pattern(&RestrictionKind::Glt { pivots: vec![1, 5] }, 4, 2),
            Err(Error::InvalidPivots(_))
        ));
        assert!(matches!(
            build_pattern(&RestrictionKind::Plt, 1, 2),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            build_pattern(&RestrictionKind::Plt, 4, 1),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn valid_state_has_empty_report() {
        let (lat, load, pat) = plt_state();
        let report = validate_state(&lat, &load, &pat).unwrap();
        assert!(report.is_valid(), "{report}");
    }

    #[test]
    fn fixed_zero_breach_is_one_violation() {
        let (lat, mut load, pat) = plt_state();
        load.lambda[(0, 1)] = 0.3;
        let report = validate_state(&lat, &load, &pat).unwrap();
        assert_eq!(report.violations, vec![Violation::FixedZeroNonzero { row: 1, col: 2 }]);
        assert_eq!(report.to_string(), "FixedZero cell nonzero at (1,2)");
    }

    #[test]
    fn center_drift_reported() {
        let (mut lat, load, pat) = plt_state();
        lat.positions[(0, 0)] += 0.5;
        let report = validate_state(&lat, &load, &pat).unwrap();
        assert_eq!(report.violations.len(), 1);
        assert!(report.to_string().starts_with("center drift row 1"));
    }

    #[test]
    fn validation_never_mutates_and_rejects_dim_mismatch() {
        let (lat, load, _) = plt_state();
        let pat3 = build_pattern(&RestrictionKind::Plt, 4, 3).unwrap();
        let before = (lat.clone(), load.clone());
        assert!(matches!(validate_state(&lat, &load, &pat3), Err(Error::Dimension(_))));
        assert_eq!(before, (lat, load));
    }

    #[test]
    fn d1_is_rejected() {
        let positions = Matrix::from_rows(&[vec![0.0, 1.0]]).unwrap();
        assert!(matches!(LatentState::new(0.0, positions), Err(Error::Dimension(_))));
    }

    #[test]
    fn network_rejects_duplicates_and_loops() {
        assert!(WeightedNetwork::from_edges(3, [(0, 1, 2), (1, 0, 2)]).is_err());
        let err = WeightedNetwork::from_edges(3, [(0, 1, 2), (1, 0, 3)]).unwrap_err();
        assert!(err.to_string().contains("asymmetric"));
        assert!(WeightedNetwork::from_edges(3, [(1, 1, 2)]).is_err());
        assert!(WeightedNetwork::from_real_edges(3, [(0, 1, 2.5)]).is_err());
        assert!(WeightedNetwork::from_real_edges(3, [(0, 1, -1.0)]).is_err());
        let net = WeightedNetwork::from_real_edges(3, [(0, 1, 2.0), (2, 1, 4.0)]).unwrap();
        assert_eq!(net.weight(1, 2), 4);
        assert_eq!(net.weight(2, 1), 4);
        assert_eq!(net.total_weight(), 6);
        assert_eq!(net.mean_positive_weight(), 3.0);
    }

    #[test]
    fn prior_variance_d2_is_two() {
        assert_eq!(position_prior_variance::<f64>(2), 2.0);
    }
}
