//! Split gains and the histogram scan that picks the best split of a node.
//!
//! Dense and sparse scores drop the constant `½` of the second-order objective since
//! it does not change the ranking. The exact-hessian gain keeps it.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::histogram::Histogram;
use crate::linalg::solve_spd;
use crate::scalar::Scalar;

/// Summed gradient statistics of a set of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct GradStats<T> {
    pub g: Vec<T>,
    pub h: Vec<T>,
    /// Row-major `d x d` sum of per-sample hessians (exact mode only).
    pub full_h: Option<Vec<T>>,
    pub count: usize,
}

impl<T: Scalar> GradStats<T> {
    pub fn zeros(d: usize, full: bool) -> Self {
        Self {
            g: vec![T::zero(); d],
            h: vec![T::zero(); d],
            full_h: full.then(|| vec![T::zero(); d * d]),
            count: 0,
        }
    }

    /// Diagonal-only statistics.
    pub fn new(g: Vec<T>, h: Vec<T>, count: usize) -> Self {
        assert_eq!(g.len(), h.len(), "g and h must have the same length");
        Self {
            g,
            h,
            full_h: None,
            count,
        }
    }

    /// Statistics with a full hessian sum; `h` is taken from its diagonal.
    pub fn with_full_hessian(g: Vec<T>, full_h: Vec<T>, count: usize) -> Self {
        let d = g.len();
        assert_eq!(full_h.len(), d * d, "full hessian must be d x d");
        let h = (0..d).map(|j| full_h[j * d + j]).collect();
        Self {
            g,
            h,
            full_h: Some(full_h),
            count,
        }
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }

    pub fn add_bin(&mut self, hist: &Histogram<T>, bin: usize) {
        for (a, &v) in self.g.iter_mut().zip(hist.g(bin)) {
            *a += v;
        }
        for (a, &v) in self.h.iter_mut().zip(hist.h(bin)) {
            *a += v;
        }
        if let (Some(a), Some(f)) = (self.full_h.as_mut(), hist.full_h(bin)) {
            for (x, &v) in a.iter_mut().zip(f) {
                *x += v;
            }
        }
        self.count += hist.count(bin);
    }

    /// Sum over all bins of a histogram.
    pub fn from_histogram(hist: &Histogram<T>) -> Self {
        let mut s = Self::zeros(hist.num_outputs(), hist.has_full_hessian());
        for bin in 0..hist.num_bins() {
            s.add_bin(hist, bin);
        }
        s
    }

    pub fn add(&self, other: &Self) -> Self {
        let zip = |a: &[T], b: &[T]| a.iter().zip(b).map(|(&x, &y)| x + y).collect::<Vec<_>>();
        Self {
            g: zip(&self.g, &other.g),
            h: zip(&self.h, &other.h),
            full_h: self
                .full_h
                .as_ref()
                .zip(other.full_h.as_ref())
                .map(|(a, b)| zip(a, b)),
            count: self.count + other.count,
        }
    }

    fn sub_into(&self, other: &Self, out: &mut Self) {
        for ((o, &a), &b) in out.g.iter_mut().zip(&self.g).zip(&other.g) {
            *o = a - b;
        }
        for ((o, &a), &b) in out.h.iter_mut().zip(&self.h).zip(&other.h) {
            *o = a - b;
        }
        if let (Some(o), Some(a), Some(b)) = (out.full_h.as_mut(), &self.full_h, &other.full_h) {
            for ((x, &p), &q) in o.iter_mut().zip(a).zip(b) {
                *x = p - q;
            }
        }
        out.count = self.count - other.count;
    }
}

/// `G²/(H+λ)`, or zero when `H+λ` is not positive.
#[inline]
pub fn column_score<T: Scalar>(g: T, h: T, lambda: T) -> T {
    let denom = h + lambda;
    if denom > T::zero() {
        g * g / denom
    } else {
        T::zero()
    }
}

/// `Σ_j G_j²/(H_j+λ)` over every output column.
pub fn dense_score<T: Scalar>(stats: &GradStats<T>, lambda: T) -> T {
    stats
        .g
        .iter()
        .zip(&stats.h)
        .map(|(&g, &h)| column_score(g, h, lambda))
        .sum()
}

/// Dense multi-output gain: the sum over output columns of the single-output gain.
pub fn dense_gain<T: Scalar>(left: &GradStats<T>, right: &GradStats<T>, lambda: T) -> T {
    let mut gain = T::zero();
    for j in 0..left.dim() {
        let (gl, hl, gr, hr) = (left.g[j], left.h[j], right.g[j], right.h[j]);
        gain += column_score(gl, hl, lambda) + column_score(gr, hr, lambda)
            - column_score(gl + gr, hl + hr, lambda);
    }
    gain
}

#[derive(Debug, Clone, Copy)]
struct Ranked<T> {
    value: T,
    column: usize,
}

// "Greater" means better: larger value, then lower column index. The heap is used as a
// min-heap through `Reverse`, so its root is the worst column kept so far.
impl<T: Scalar> Ord for Ranked<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.value
            .partial_cmp(&other.value)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.column.cmp(&self.column))
    }
}

impl<T: Scalar> PartialOrd for Ranked<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Scalar> PartialEq for Ranked<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T: Scalar> Eq for Ranked<T> {}

/// The `k` columns with the largest values (ties to the lower column) and their sum.
/// Columns are returned in ascending order.
pub fn top_k<T: Scalar>(values: impl IntoIterator<Item = T>, k: usize) -> (T, Vec<usize>) {
    let mut heap: BinaryHeap<std::cmp::Reverse<Ranked<T>>> = BinaryHeap::with_capacity(k + 1);
    for (column, value) in values.into_iter().enumerate() {
        let item = Ranked { value, column };
        if heap.len() < k {
            heap.push(std::cmp::Reverse(item));
        } else if let Some(worst) = heap.peek() {
            if item > worst.0 {
                heap.pop();
                heap.push(std::cmp::Reverse(item));
            }
        }
    }
    let mut kept: Vec<Ranked<T>> = heap.into_iter().map(|r| r.0).collect();
    kept.sort_by_key(|r| r.column);
    let sum = kept.iter().map(|r| r.value).sum();
    (sum, kept.into_iter().map(|r| r.column).collect())
}

fn check_k(k: usize, d: usize) -> Result<()> {
    if k == 0 || k > d {
        return Err(Error::config(format!("sparse k must be in [1, {d}], got {k}")));
    }
    Ok(())
}

/// Best sparse objective of one node: the sum of its `k` largest column scores.
pub fn sparse_score<T: Scalar>(stats: &GradStats<T>, lambda: T, k: usize) -> (T, Vec<usize>) {
    top_k(
        stats
            .g
            .iter()
            .zip(&stats.h)
            .map(|(&g, &h)| column_score(g, h, lambda)),
        k,
    )
}

/// Result of an unrestricted sparse gain evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGain<T> {
    /// Sum of the top-`k` left scores plus the top-`k` right scores. The parent's
    /// constant term is not subtracted.
    pub score: T,
    pub left_cols: Vec<usize>,
    pub right_cols: Vec<usize>,
}

/// Each side independently keeps its `k` best output columns.
pub fn sparse_gain<T: Scalar>(
    left: &GradStats<T>,
    right: &GradStats<T>,
    lambda: T,
    k: usize,
) -> Result<SparseGain<T>> {
    check_k(k, left.dim())?;
    let (ls, left_cols) = sparse_score(left, lambda, k);
    let (rs, right_cols) = sparse_score(right, lambda, k);
    Ok(SparseGain {
        score: ls + rs,
        left_cols,
        right_cols,
    })
}

/// Both sides share one set of `k` columns, chosen by the summed per-column score.
/// Returns the score (without the parent constant) and the shared columns.
pub fn restricted_sparse_gain<T: Scalar>(
    left: &GradStats<T>,
    right: &GradStats<T>,
    lambda: T,
    k: usize,
) -> Result<(T, Vec<usize>)> {
    check_k(k, left.dim())?;
    Ok(top_k(
        (0..left.dim()).map(|j| {
            column_score(left.g[j], left.h[j], lambda) + column_score(right.g[j], right.h[j], lambda)
        }),
        k,
    ))
}

/// `−½ Gᵀ (ΣH + λI)⁻¹ G` through a Cholesky solve. `None` if the solve fails.
pub fn exact_objective<T: Scalar>(stats: &GradStats<T>, lambda: T) -> Option<T> {
    let full = stats.full_h.as_ref()?;
    if stats.g.iter().all(|&g| g == T::zero()) {
        return Some(T::zero());
    }
    let w = solve_spd(full, stats.dim(), lambda, &stats.g)?;
    let quad: T = stats.g.iter().zip(&w).map(|(&g, &x)| g * x).sum();
    Some(-T::half() * quad)
}

/// `L*(parent) − L*(left) − L*(right)` with the full hessian; `None` on solve failure
/// or when either side lacks a full hessian.
pub fn exact_gain<T: Scalar>(left: &GradStats<T>, right: &GradStats<T>, lambda: T) -> Option<T> {
    let parent = left.add(right);
    Some(exact_objective(&parent, lambda)? - exact_objective(left, lambda)? - exact_objective(right, lambda)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SplitMode {
    Dense,
    Sparse,
    Restricted,
    Exact,
}

impl SplitMode {
    pub fn is_sparse(self) -> bool {
        matches!(self, SplitMode::Sparse | SplitMode::Restricted)
    }
}

impl fmt::Display for SplitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitMode::Dense => "dense",
            SplitMode::Sparse => "sparse",
            SplitMode::Restricted => "restricted",
            SplitMode::Exact => "exact",
        })
    }
}

impl FromStr for SplitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(SplitMode::Dense),
            "sparse" => Ok(SplitMode::Sparse),
            "restricted" => Ok(SplitMode::Restricted),
            "exact" => Ok(SplitMode::Exact),
            _ => Err(Error::config(format!("unknown split mode {s:?}"))),
        }
    }
}

/// Knobs of a histogram scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitParams<T> {
    pub mode: SplitMode,
    pub lambda: T,
    /// Columns kept per leaf in sparse modes; ignored otherwise.
    pub k: usize,
    /// Candidates leaving fewer samples on either side are skipped. At least 1.
    pub min_samples: usize,
}

impl<T: Scalar> SplitParams<T> {
    pub fn dense(lambda: T) -> Self {
        Self {
            mode: SplitMode::Dense,
            lambda,
            k: 0,
            min_samples: 1,
        }
    }
}

/// A candidate split: bins `<= bin` of `feature` go left.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitInfo<T> {
    pub feature: usize,
    pub bin: usize,
    /// Decrease of the mode's objective. For sparse modes this is relative to the
    /// parent's own best `k`-sparse objective.
    pub gain: T,
    /// Selected output columns (sparse modes); equal to `right_cols` when restricted.
    pub left_cols: Vec<usize>,
    pub right_cols: Vec<usize>,
    pub valid: bool,
}

impl<T: Scalar> SplitInfo<T> {
    pub fn invalid() -> Self {
        Self {
            feature: 0,
            bin: 0,
            gain: T::neg_infinity(),
            left_cols: Vec::new(),
            right_cols: Vec::new(),
            valid: false,
        }
    }

    fn beats(&self, other: &Self) -> bool {
        self.valid && (!other.valid || self.gain > other.gain)
    }
}

/// Scans one feature's histogram left to right and returns its best candidate.
pub fn best_split_for_feature<T: Scalar>(hist: &Histogram<T>, params: &SplitParams<T>) -> Result<SplitInfo<T>> {
    let d = hist.num_outputs();
    let lambda = params.lambda;
    let min_samples = params.min_samples.max(1);
    if params.mode.is_sparse() {
        check_k(params.k, d)?;
    }
    if params.mode == SplitMode::Exact && !hist.has_full_hessian() {
        return Err(Error::config("exact mode requires full hessians"));
    }
    let total = GradStats::from_histogram(hist);
    let parent_const = match params.mode {
        SplitMode::Dense => dense_score(&total, lambda),
        SplitMode::Sparse | SplitMode::Restricted => sparse_score(&total, lambda, params.k).0,
        SplitMode::Exact => T::zero(),
    };
    let parent_exact = if params.mode == SplitMode::Exact {
        exact_objective(&total, lambda)
    } else {
        None
    };

    let full = params.mode == SplitMode::Exact;
    let mut left = GradStats::zeros(d, full);
    let mut right = GradStats::zeros(d, full);
    let mut best = SplitInfo::invalid();
    for bin in 0..hist.num_bins().saturating_sub(1) {
        left.add_bin(hist, bin);
        if left.count < min_samples {
            continue;
        }
        if total.count - left.count < min_samples {
            break;
        }
        total.sub_into(&left, &mut right);
        let candidate = match params.mode {
            SplitMode::Dense => {
                let mut score = -parent_const;
                for j in 0..d {
                    score += column_score(left.g[j], left.h[j], lambda)
                        + column_score(right.g[j], right.h[j], lambda);
                }
                SplitInfo {
                    feature: hist.feature(),
                    bin,
                    gain: score,
                    left_cols: Vec::new(),
                    right_cols: Vec::new(),
                    valid: true,
                }
            }
            SplitMode::Sparse => {
                let s = sparse_gain(&left, &right, lambda, params.k)?;
                SplitInfo {
                    feature: hist.feature(),
                    bin,
                    gain: s.score - parent_const,
                    left_cols: s.left_cols,
                    right_cols: s.right_cols,
                    valid: true,
                }
            }
            SplitMode::Restricted => {
                let (score, cols) = restricted_sparse_gain(&left, &right, lambda, params.k)?;
                SplitInfo {
                    feature: hist.feature(),
                    bin,
                    gain: score - parent_const,
                    left_cols: cols.clone(),
                    right_cols: cols,
                    valid: true,
                }
            }
            SplitMode::Exact => {
                let gain = match (parent_exact, exact_objective(&left, lambda), exact_objective(&right, lambda)) {
                    (Some(p), Some(l), Some(r)) => p - l - r,
                    _ => continue,
                };
                SplitInfo {
                    feature: hist.feature(),
                    bin,
                    gain,
                    left_cols: Vec::new(),
                    right_cols: Vec::new(),
                    valid: true,
                }
            }
        };
        if candidate.gain.is_finite() && candidate.beats(&best) {
            best = candidate;
        }
    }
    Ok(best)
}

/// Best split over all features of a node. Ties go to the lower feature, then the
/// lower bin; the result is independent of how features are scheduled on workers.
pub fn find_best_split<T: Scalar>(hists: &[Histogram<T>], params: &SplitParams<T>) -> Result<SplitInfo<T>> {
    let per_feature: Vec<SplitInfo<T>> = hists
        .par_iter()
        .map(|h| best_split_for_feature(h, params))
        .collect::<Result<_>>()?;
    let mut best = SplitInfo::invalid();
    for candidate in per_feature {
        if candidate.beats(&best) {
            best = candidate;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::BinnedMatrix;
    use crate::histogram::build_histograms;
    use crate::losses::GradHessBuffer;

    fn stats(g: &[f64], h: &[f64]) -> GradStats<f64> {
        GradStats::new(g.to_vec(), h.to_vec(), 1)
    }

    #[test]
    fn dense_gain_examples() {
        let g = dense_gain(&stats(&[2.0, 0.0], &[1.0, 1.0]), &stats(&[-2.0, 0.0], &[1.0, 1.0]), 1.0);
        assert_eq!(g, 4.0);
        let g = dense_gain(&stats(&[3.0], &[2.0]), &stats(&[-1.0], &[2.0]), 1.0);
        assert!((g - (3.0 + 1.0 / 3.0 - 0.8)).abs() < 1e-15);
        let g = dense_gain(&stats(&[1.5, -0.5], &[2.0, 1.0]), &stats(&[0.0, 0.0], &[0.0, 0.0]), 1.0);
        assert_eq!(g, 0.0);
    }

    #[test]
    fn division_guard_at_zero_lambda() {
        let g = dense_gain(&stats(&[0.0], &[0.0]), &stats(&[1.0], &[1.0]), 0.0);
        assert!((g - 0.0).abs() < 1e-15);
        assert_eq!(column_score(1.0, 0.0, 0.0), 0.0);
    }

    #[test]
    fn sparse_gain_example() {
        let l = stats(&[2.0, 1.0], &[1.0, 1.0]);
        let r = stats(&[0.0, 3.0], &[1.0, 2.0]);
        let s = sparse_gain(&l, &r, 1.0, 1).unwrap();
        assert_eq!((s.score, s.left_cols.clone(), s.right_cols.clone()), (5.0, vec![0], vec![1]));
        let (score, cols) = restricted_sparse_gain(&l, &r, 1.0, 1).unwrap();
        assert_eq!((score, cols), (3.5, vec![1]));
        assert!(sparse_gain(&l, &r, 1.0, 3).is_err());
        assert!(restricted_sparse_gain(&l, &r, 1.0, 0).is_err());
    }

    #[test]
    fn sparse_with_all_columns_matches_dense_terms() {
        let l = stats(&[2.0, 1.0, -0.5], &[1.0, 1.0, 3.0]);
        let r = stats(&[0.0, 3.0, 0.25], &[1.0, 2.0, 0.5]);
        let s = sparse_gain(&l, &r, 1.0, 3).unwrap();
        let (rs, cols) = restricted_sparse_gain(&l, &r, 1.0, 3).unwrap();
        let terms = dense_score(&l, 1.0) + dense_score(&r, 1.0);
        assert!((s.score - terms).abs() <= 1e-12 * terms);
        assert!((rs - terms).abs() <= 1e-12 * terms);
        assert_eq!(cols, vec![0, 1, 2]);
    }

    #[test]
    fn zero_gradients_select_lowest_columns() {
        let z = stats(&[0.0; 4], &[1.0; 4]);
        let s = sparse_gain(&z, &z, 1.0, 2).unwrap();
        assert_eq!((s.score, s.left_cols, s.right_cols), (0.0, vec![0, 1], vec![0, 1]));
    }

    #[test]
    fn symmetric_restricted_selects_side_top_k() {
        let l = stats(&[1.0, 3.0, 2.0], &[1.0, 1.0, 1.0]);
        let (_, cols) = restricted_sparse_gain(&l, &l, 1.0, 2).unwrap();
        assert_eq!(cols, sparse_score(&l, 1.0, 2).1);
    }

    #[test]
    fn exact_objective_examples() {
        let s = GradStats::<f64>::with_full_hessian(vec![3.0, 3.0], vec![2.0, 1.0, 1.0, 2.0], 2);
        assert!((exact_objective(&s, 1.0).unwrap() + 2.25).abs() < 1e-14);
        let z = GradStats::with_full_hessian(vec![0.0, 0.0], vec![2.0, 1.0, 1.0, 2.0], 2);
        assert_eq!(exact_objective(&z, 1.0), Some(0.0));
    }

    #[test]
    fn exact_gain_reduces_to_half_dense_for_diagonal_hessians() {
        let l = GradStats::with_full_hessian(vec![2.0, -1.0], vec![1.0, 0.0, 0.0, 3.0], 3);
        let r = GradStats::with_full_hessian(vec![-2.0, 0.5], vec![2.0, 0.0, 0.0, 1.0], 3);
        let exact: f64 = exact_gain(&l, &r, 1.0).unwrap();
        assert!((exact - 0.5 * dense_gain(&l, &r, 1.0)).abs() < 1e-14);
    }

    fn node(bins: &[usize], b: usize, g: &[f64], d: usize) -> Vec<Histogram<f64>> {
        let binned = BinnedMatrix::from_columns(&[bins.to_vec()], vec![b]).unwrap();
        let n = bins.len();
        let grads = GradHessBuffer::new(n, d, g.to_vec(), vec![1.0; n * d], None).unwrap();
        build_histograms(&(0..n).collect::<Vec<_>>(), &binned, &grads)
    }

    #[test]
    fn best_split_on_two_bins() {
        // Bin 0 carries G=[2,0], H=[1,1]; bin 1 carries G=[-2,0], H=[1,1].
        let hists = node(&[0, 1], 2, &[2.0, 0.0, -2.0, 0.0], 2);
        let s = find_best_split(&hists, &SplitParams::dense(1.0)).unwrap();
        assert!(s.valid);
        assert_eq!((s.feature, s.bin, s.gain), (0, 0, 4.0));
    }

    #[test]
    fn constant_feature_has_no_split() {
        let hists = node(&[0, 0, 0], 1, &[1.0, 2.0, 3.0], 1);
        assert!(!find_best_split(&hists, &SplitParams::dense(1.0)).unwrap().valid);
        // Two bins but all samples in one: every candidate leaves an empty side.
        let hists = node(&[1, 1, 1], 2, &[1.0, 2.0, 3.0], 1);
        assert!(!find_best_split(&hists, &SplitParams::dense(1.0)).unwrap().valid);
    }

    #[test]
    fn duplicate_feature_ties_to_lower_index() {
        let cols = vec![vec![0, 1, 0, 1], vec![0, 0, 1, 1], vec![0, 1, 0, 1]];
        let binned = BinnedMatrix::from_columns(&cols, vec![2, 2, 2]).unwrap();
        let grads = GradHessBuffer::new(4, 1, vec![1.0, -1.0, 1.0, -1.0], vec![1.0; 4], None).unwrap();
        let hists = build_histograms(&[0, 1, 2, 3], &binned, &grads);
        let s = find_best_split(&hists, &SplitParams::dense(1.0)).unwrap();
        assert_eq!(s.feature, 0);
    }

    #[test]
    fn min_samples_filters_candidates() {
        let hists = node(&[0, 1, 1, 1], 2, &[5.0, -1.0, -1.0, -1.0], 1);
        let mut p = SplitParams::dense(1.0);
        assert!(find_best_split(&hists, &p).unwrap().valid);
        p.min_samples = 2;
        assert!(!find_best_split(&hists, &p).unwrap().valid);
    }

    #[test]
    fn left_scan_conserves_totals() {
        let hists = node(&[0, 3, 1, 2, 3, 0], 4, &[0.5, -1.0, 2.0, 0.25, -0.75, 1.5], 1);
        let total = GradStats::from_histogram(&hists[0]);
        let mut left = GradStats::zeros(1, false);
        for b in 0..4 {
            left.add_bin(&hists[0], b);
        }
        assert!((left.g[0] - total.g[0]).abs() <= 1e-12);
        assert_eq!(left.count, 6);
        assert!((total.g[0] - 2.5).abs() < 1e-12);
    }
}
