//! Best-first growth of one decision tree with vector-valued leaves.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::data::BinnedMatrix;
use crate::error::{Error, Result};
use crate::histogram::{build_histograms, subtract_histograms, Histogram};
use crate::linalg::solve_spd;
use crate::losses::GradHessBuffer;
use crate::scalar::Scalar;
use crate::split::{column_score, find_best_split, top_k, GradStats, SplitInfo, SplitMode, SplitParams};

/// Undivided nodes whose histograms are kept in memory during growth.
pub const DEFAULT_NODE_STORE_LIMIT: usize = 48;

#[derive(Debug, Clone, PartialEq)]
pub enum Leaf<T> {
    /// One weight per output column.
    Dense(Vec<T>),
    /// `(column, weight)` pairs in ascending column order; absent columns are zero.
    Sparse(Vec<(usize, T)>),
}

impl<T: Scalar> Leaf<T> {
    /// Adds `scale * weights` into `out`.
    pub fn add_scaled(&self, scale: T, out: &mut [T]) {
        match self {
            Leaf::Dense(w) => {
                for (o, &v) in out.iter_mut().zip(w) {
                    *o += scale * v;
                }
            }
            Leaf::Sparse(pairs) => {
                for &(j, v) in pairs {
                    out[j] += scale * v;
                }
            }
        }
    }

    pub fn num_stored(&self) -> usize {
        match self {
            Leaf::Dense(w) => w.len(),
            Leaf::Sparse(p) => p.len(),
        }
    }

    pub fn to_dense(&self, d: usize) -> Vec<T> {
        let mut out = vec![T::zero(); d];
        match self {
            Leaf::Dense(w) => out.copy_from_slice(w),
            Leaf::Sparse(p) => {
                for &(j, v) in p {
                    out[j] = v;
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode<T> {
    Split {
        feature: usize,
        /// Training-time bin threshold; bins `<= bin` went left.
        bin: usize,
        /// Upper boundary of `bin`: inputs `x <= threshold` go left.
        threshold: T,
        left: usize,
        right: usize,
    },
    Leaf(Leaf<T>),
}

/// A binary tree stored as a node arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree<T> {
    nodes: Vec<TreeNode<T>>,
    num_outputs: usize,
}

impl<T: Scalar> Tree<T> {
    /// Validates references and leaf shapes.
    pub fn from_nodes(nodes: Vec<TreeNode<T>>, num_outputs: usize) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::shape("a tree needs at least one node"));
        }
        let mut referenced = vec![false; nodes.len()];
        for (id, node) in nodes.iter().enumerate() {
            match node {
                TreeNode::Split { left, right, threshold, .. } => {
                    for &c in [left, right] {
                        if c >= nodes.len() || c <= id || referenced[c] {
                            return Err(Error::shape(format!("node {id}: bad child reference {c}")));
                        }
                        referenced[c] = true;
                    }
                    if threshold.is_nan() {
                        return Err(Error::shape(format!("node {id}: NaN threshold")));
                    }
                }
                TreeNode::Leaf(Leaf::Dense(w)) if w.len() != num_outputs => {
                    return Err(Error::shape(format!(
                        "node {id}: dense leaf has {} weights, expected {num_outputs}",
                        w.len()
                    )));
                }
                TreeNode::Leaf(Leaf::Sparse(p)) => {
                    if p.windows(2).any(|w| w[0].0 >= w[1].0) || p.iter().any(|&(j, _)| j >= num_outputs) {
                        return Err(Error::shape(format!("node {id}: bad sparse leaf columns")));
                    }
                }
                TreeNode::Leaf(_) => {}
            }
        }
        if referenced.iter().skip(1).any(|r| !r) {
            return Err(Error::shape("tree contains unreachable nodes"));
        }
        Ok(Self { nodes, num_outputs })
    }

    pub fn single_leaf(leaf: Leaf<T>, num_outputs: usize) -> Self {
        Self {
            nodes: vec![TreeNode::Leaf(leaf)],
            num_outputs,
        }
    }

    pub fn nodes(&self) -> &[TreeNode<T>] {
        &self.nodes
    }

    pub fn num_outputs(&self) -> usize {
        self.num_outputs
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, TreeNode::Leaf(_))).count()
    }

    pub fn depth(&self) -> usize {
        fn walk<T>(nodes: &[TreeNode<T>], id: usize) -> usize {
            match &nodes[id] {
                TreeNode::Leaf(_) => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Leaf reached by a raw feature row.
    pub fn leaf(&self, row: &[T]) -> &Leaf<T> {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                TreeNode::Leaf(l) => return l,
                TreeNode::Split { feature, threshold, left, right, .. } => {
                    id = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn predict_row(&self, row: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.num_outputs];
        self.leaf(row).add_scaled(T::one(), &mut out);
        out
    }
}

/// `w_j = −G_j/(H_j+λ)`; a column with `H_j+λ <= 0` gets 0.
pub fn compute_leaf_diagonal<T: Scalar>(stats: &GradStats<T>, lambda: T) -> Vec<T> {
    stats
        .g
        .iter()
        .zip(&stats.h)
        .map(|(&g, &h)| {
            let denom = h + lambda;
            if denom > T::zero() {
                -g / denom
            } else {
                T::zero()
            }
        })
        .collect()
}

fn weights_for<T: Scalar>(stats: &GradStats<T>, lambda: T, cols: &[usize]) -> Vec<(usize, T)> {
    let dense = compute_leaf_diagonal(stats, lambda);
    cols.iter().map(|&j| (j, dense[j])).collect()
}

/// Keeps the `k` columns with the largest `G_j²/(H_j+λ)` (ties to the lower column).
pub fn compute_leaf_sparse<T: Scalar>(stats: &GradStats<T>, lambda: T, k: usize) -> Result<Vec<(usize, T)>> {
    if k == 0 || k > stats.dim() {
        return Err(Error::config(format!("sparse k must be in [1, {}], got {k}", stats.dim())));
    }
    let (_, cols) = top_k(
        stats
            .g
            .iter()
            .zip(&stats.h)
            .map(|(&g, &h)| column_score(g, h, lambda)),
        k,
    );
    Ok(weights_for(stats, lambda, &cols))
}

/// Solves `(ΣH + λI) w = −G`. `None` if the factorization fails at every jitter level.
pub fn compute_leaf_exact<T: Scalar>(stats: &GradStats<T>, lambda: T) -> Option<Vec<T>> {
    let full = stats.full_h.as_ref()?;
    if stats.g.iter().all(|&g| g == T::zero()) {
        return Some(vec![T::zero(); stats.dim()]);
    }
    let neg_g: Vec<T> = stats.g.iter().map(|&g| -g).collect();
    solve_spd(full, stats.dim(), lambda, &neg_g)
}

/// Partitions samples by `bin <= split.bin`, preserving input order.
pub fn apply_split<T: Scalar>(
    samples: &[usize],
    binned: &BinnedMatrix,
    split: &SplitInfo<T>,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let column = binned.column(split.feature);
    let (left, right): (Vec<usize>, Vec<usize>) =
        samples.iter().partition(|&&i| column.get(i) <= split.bin);
    if left.is_empty() || right.is_empty() {
        return Err(Error::Internal(format!(
            "split on feature {} at bin {} leaves an empty side",
            split.feature, split.bin
        )));
    }
    Ok((left, right))
}

/// Growth limits and the split rule of one tree.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeConfig<T> {
    pub split: SplitParams<T>,
    pub max_depth: usize,
    pub max_leaves: usize,
    /// A node is split only if its average gain per involved output exceeds this.
    pub gain_threshold: T,
    pub node_store_limit: usize,
}

impl<T: Scalar> TreeConfig<T> {
    pub fn validate(&self, d: usize) -> Result<()> {
        if self.max_depth < 1 {
            return Err(Error::config("max_depth must be at least 1"));
        }
        if self.max_leaves < 2 {
            return Err(Error::config("max_leaves must be at least 2"));
        }
        if self.split.min_samples < 1 {
            return Err(Error::config("min_samples must be at least 1"));
        }
        if self.node_store_limit < 1 {
            return Err(Error::config("node store limit must be at least 1"));
        }
        if !(self.split.lambda >= T::zero()) {
            return Err(Error::config("lambda must be non-negative"));
        }
        if self.split.mode.is_sparse() && (self.split.k == 0 || self.split.k > d) {
            return Err(Error::config(format!("sparse k must be in [1, {d}], got {}", self.split.k)));
        }
        Ok(())
    }

    fn average_gain(&self, gain: T, d: usize) -> T {
        let involved = if self.split.mode.is_sparse() { self.split.k } else { d };
        gain / T::from_count(involved.max(1))
    }
}

/// Bookkeeping produced alongside a grown tree.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GrowthLog<T> {
    /// `(node id, gain)` in expansion order.
    pub expansions: Vec<(usize, T)>,
    /// Largest gain still waiting in the frontier when each expansion happened.
    pub frontier_max: Vec<Option<T>>,
    /// `(built child size, parent size)` for each histogram subtraction.
    pub built_children: Vec<(usize, usize)>,
    /// Nodes whose histograms had to be rebuilt because the store was full.
    pub rebuilt: usize,
    /// Leaves that fell back to diagonal weights after an exact solve failed.
    pub exact_fallbacks: usize,
}

/// A tree plus the training samples that landed in each leaf.
#[derive(Debug, Clone)]
pub struct GrownTree<T> {
    pub tree: Tree<T>,
    /// `(leaf node id, samples)` for every leaf.
    pub leaf_samples: Vec<(usize, Vec<usize>)>,
    pub log: GrowthLog<T>,
}

struct Candidate<T> {
    node: usize,
    depth: usize,
    samples: Vec<usize>,
    hists: Option<Vec<Histogram<T>>>,
    stats: GradStats<T>,
    split: SplitInfo<T>,
    /// Columns a restricted parent split selected for this child.
    inherited_cols: Option<Vec<usize>>,
}

impl<T: Scalar> Ord for Candidate<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.split
            .gain
            .partial_cmp(&other.split.gain)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl<T: Scalar> PartialOrd for Candidate<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Scalar> PartialEq for Candidate<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T: Scalar> Eq for Candidate<T> {}

struct Grower<'a, T> {
    binned: &'a BinnedMatrix,
    grads: &'a GradHessBuffer<T>,
    config: &'a TreeConfig<T>,
    d: usize,
    nodes: Vec<TreeNode<T>>,
    heap: BinaryHeap<Candidate<T>>,
    materialized: usize,
    leaf_samples: Vec<(usize, Vec<usize>)>,
    log: GrowthLog<T>,
}

impl<T: Scalar> Grower<'_, T> {
    fn leaf_for(&mut self, stats: &GradStats<T>, inherited: Option<&[usize]>) -> Result<Leaf<T>> {
        let lambda = self.config.split.lambda;
        Ok(match self.config.split.mode {
            SplitMode::Dense => Leaf::Dense(compute_leaf_diagonal(stats, lambda)),
            SplitMode::Sparse => Leaf::Sparse(compute_leaf_sparse(stats, lambda, self.config.split.k)?),
            SplitMode::Restricted => match inherited {
                Some(cols) => Leaf::Sparse(weights_for(stats, lambda, cols)),
                None => Leaf::Sparse(compute_leaf_sparse(stats, lambda, self.config.split.k)?),
            },
            SplitMode::Exact => match compute_leaf_exact(stats, lambda) {
                Some(w) => Leaf::Dense(w),
                None => {
                    log::warn!("exact leaf solve failed; using diagonal weights");
                    self.log.exact_fallbacks += 1;
                    Leaf::Dense(compute_leaf_diagonal(stats, lambda))
                }
            },
        })
    }

    fn finalize(&mut self, node: usize, samples: Vec<usize>, stats: &GradStats<T>, inherited: Option<&[usize]>) -> Result<()> {
        let leaf = self.leaf_for(stats, inherited)?;
        self.nodes[node] = TreeNode::Leaf(leaf);
        self.leaf_samples.push((node, samples));
        Ok(())
    }

    /// Either queues the node for expansion or turns it into a leaf.
    fn consider(
        &mut self,
        node: usize,
        depth: usize,
        samples: Vec<usize>,
        hists: Vec<Histogram<T>>,
        inherited_cols: Option<Vec<usize>>,
    ) -> Result<()> {
        let stats = match hists.first() {
            Some(h) => GradStats::from_histogram(h),
            None => GradStats::zeros(self.d, self.grads.has_full_hessian()),
        };
        let splittable = depth < self.config.max_depth
            && samples.len() >= 2 * self.config.split.min_samples
            && !hists.is_empty();
        let split = if splittable {
            find_best_split(&hists, &self.config.split)?
        } else {
            SplitInfo::invalid()
        };
        let worth_it = split.valid
            && self.config.average_gain(split.gain, self.d) > self.config.gain_threshold;
        if !worth_it {
            return self.finalize(node, samples, &stats, inherited_cols.as_deref());
        }
        let hists = if self.materialized < self.config.node_store_limit {
            self.materialized += 1;
            Some(hists)
        } else {
            None
        };
        self.heap.push(Candidate {
            node,
            depth,
            samples,
            hists,
            stats,
            split,
            inherited_cols,
        });
        Ok(())
    }

    fn expand(&mut self, c: Candidate<T>) -> Result<()> {
        let parent_hists = match c.hists {
            Some(h) => {
                self.materialized -= 1;
                h
            }
            None => {
                self.log.rebuilt += 1;
                build_histograms(&c.samples, self.binned, self.grads)
            }
        };
        let (left, right) = apply_split(&c.samples, self.binned, &c.split)?;
        let left_smaller = left.len() <= right.len();
        let small = if left_smaller { &left } else { &right };
        let small_hists = build_histograms(small, self.binned, self.grads);
        let large_hists = subtract_histograms(&parent_hists, &small_hists)?;
        self.log.built_children.push((small.len(), c.samples.len()));
        drop(parent_hists);
        let (left_hists, right_hists) = if left_smaller {
            (small_hists, large_hists)
        } else {
            (large_hists, small_hists)
        };

        let left_id = self.nodes.len();
        let right_id = left_id + 1;
        self.nodes.push(TreeNode::Leaf(Leaf::Dense(Vec::new())));
        self.nodes.push(TreeNode::Leaf(Leaf::Dense(Vec::new())));
        self.nodes[c.node] = TreeNode::Split {
            feature: c.split.feature,
            bin: c.split.bin,
            threshold: T::nan(),
            left: left_id,
            right: right_id,
        };
        let restricted = self.config.split.mode == SplitMode::Restricted;
        let left_cols = restricted.then(|| c.split.left_cols.clone());
        let right_cols = restricted.then(|| c.split.right_cols.clone());
        self.consider(left_id, c.depth + 1, left, left_hists, left_cols)?;
        self.consider(right_id, c.depth + 1, right, right_hists, right_cols)?;
        Ok(())
    }
}

/// Grows one tree over `samples` best-first: the frontier node with the largest gain
/// is always expanded next, until the frontier empties or the leaf budget is spent.
///
/// Split nodes come back with `threshold` set from `thresholds(feature, bin)`, which
/// should return the raw upper boundary of `bin`.
pub fn grow_tree<T: Scalar>(
    samples: &[usize],
    binned: &BinnedMatrix,
    grads: &GradHessBuffer<T>,
    config: &TreeConfig<T>,
    thresholds: impl Fn(usize, usize) -> T,
) -> Result<GrownTree<T>> {
    let d = grads.num_outputs();
    config.validate(d)?;
    if config.split.mode == SplitMode::Exact && !grads.has_full_hessian() {
        return Err(Error::config("exact mode needs full hessians"));
    }
    if samples.is_empty() {
        return Err(Error::Data("cannot grow a tree on zero samples".into()));
    }
    let mut grower = Grower {
        binned,
        grads,
        config,
        d,
        nodes: vec![TreeNode::Leaf(Leaf::Dense(Vec::new()))],
        heap: BinaryHeap::new(),
        materialized: 0,
        leaf_samples: Vec::new(),
        log: GrowthLog::default(),
    };
    let root_hists = build_histograms(samples, binned, grads);
    grower.consider(0, 0, samples.to_vec(), root_hists, None)?;

    let mut leaves = 1;
    while let Some(c) = grower.heap.pop() {
        if leaves + 1 > config.max_leaves {
            if c.hists.is_some() {
                grower.materialized -= 1;
            }
            let stats = c.stats.clone();
            grower.finalize(c.node, c.samples, &stats, c.inherited_cols.as_deref())?;
            continue;
        }
        grower.log.expansions.push((c.node, c.split.gain));
        grower.log.frontier_max.push(grower.heap.peek().map(|o| o.split.gain));
        grower.expand(c)?;
        leaves += 1;
    }

    let mut nodes = grower.nodes;
    for node in nodes.iter_mut() {
        if let TreeNode::Split { feature, bin, threshold, .. } = node {
            *threshold = thresholds(*feature, *bin);
        }
    }
    grower.leaf_samples.sort_by_key(|(id, _)| *id);
    Ok(GrownTree {
        tree: Tree { nodes, num_outputs: d },
        leaf_samples: grower.leaf_samples,
        log: grower.log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(mode: SplitMode, lambda: f64, depth: usize, leaves: usize) -> TreeConfig<f64> {
        TreeConfig {
            split: SplitParams {
                mode,
                lambda,
                k: 1,
                min_samples: 1,
            },
            max_depth: depth,
            max_leaves: leaves,
            gain_threshold: 0.0,
            node_store_limit: DEFAULT_NODE_STORE_LIMIT,
        }
    }

    fn mse_grads(pred: &[f64], y: &[f64], d: usize) -> GradHessBuffer<f64> {
        let g = pred.iter().zip(y).map(|(p, t)| p - t).collect();
        GradHessBuffer::new(y.len() / d, d, g, vec![1.0; y.len()], None).unwrap()
    }

    fn bin_threshold(_f: usize, b: usize) -> f64 {
        b as f64 + 0.5
    }

    #[test]
    fn diagonal_leaf_values() {
        let s = GradStats::new(vec![3.0, 3.0], vec![2.0, 2.0], 4);
        assert_eq!(compute_leaf_diagonal(&s, 1.0), vec![-1.0, -1.0]);
        let s = GradStats::new(vec![0.0, 0.0], vec![2.0, 2.0], 4);
        assert_eq!(compute_leaf_diagonal(&s, 1.0), vec![0.0, 0.0]);
        let s = GradStats::new(vec![2.0], vec![3.0], 4);
        assert_eq!(compute_leaf_diagonal(&s, 1.0), vec![-0.5]);
        let s = GradStats::new(vec![2.0], vec![0.0], 4);
        assert_eq!(compute_leaf_diagonal(&s, 0.0), vec![0.0]);
    }

    #[test]
    fn sparse_leaf_values() {
        let s = GradStats::new(vec![4.0, -2.0, 1.0], vec![1.0; 3], 4);
        let leaf = compute_leaf_sparse(&s, 1.0, 2).unwrap();
        assert_eq!(leaf, vec![(0, -2.0), (1, 1.0)]);
        let objective: f64 = -0.5 * leaf.iter().map(|&(j, _)| column_score(s.g[j], s.h[j], 1.0)).sum::<f64>();
        assert_eq!(objective, -5.0);

        let dense = compute_leaf_sparse(&s, 1.0, 3).unwrap();
        let expect: Vec<(usize, f64)> = compute_leaf_diagonal(&s, 1.0).into_iter().enumerate().collect();
        assert_eq!(dense, expect);

        let tie = GradStats::new(vec![1.0, -1.0, 1.0], vec![1.0; 3], 4);
        assert_eq!(compute_leaf_sparse(&tie, 1.0, 1).unwrap(), vec![(0, -0.5)]);
        assert!(compute_leaf_sparse(&tie, 1.0, 4).is_err());
    }

    #[test]
    fn exact_leaf_values() {
        let s = GradStats::<f64>::with_full_hessian(vec![3.0, 3.0], vec![2.0, 1.0, 1.0, 2.0], 4);
        let w = compute_leaf_exact(&s, 1.0).unwrap();
        assert!((w[0] + 0.75).abs() < 1e-15 && (w[1] + 0.75).abs() < 1e-15);
        let diag = GradStats::with_full_hessian(vec![3.0, -1.0], vec![2.0, 0.0, 0.0, 5.0], 4);
        assert_eq!(compute_leaf_exact(&diag, 1.0).unwrap(), compute_leaf_diagonal(&diag, 1.0));
        let zero = GradStats::with_full_hessian(vec![0.0, 0.0], vec![2.0, 1.0, 1.0, 2.0], 4);
        assert_eq!(compute_leaf_exact(&zero, 1.0).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn apply_split_is_stable() {
        let binned = BinnedMatrix::from_columns(&[vec![0, 1, 0, 2]], vec![3]).unwrap();
        let mut split = SplitInfo::<f64>::invalid();
        split.bin = 0;
        let (l, r) = apply_split(&[0, 1, 2, 3], &binned, &split).unwrap();
        assert_eq!((l, r), (vec![0, 2], vec![1, 3]));
        split.bin = 2;
        assert!(matches!(apply_split(&[0, 1, 2, 3], &binned, &split), Err(Error::Internal(_))));
    }

    #[test]
    fn zero_gradients_give_single_leaf() {
        let binned = BinnedMatrix::from_columns(&[vec![0, 1, 2, 3]], vec![4]).unwrap();
        let grads = mse_grads(&[1.0; 4], &[1.0; 4], 1);
        let t = grow_tree(&[0, 1, 2, 3], &binned, &grads, &cfg(SplitMode::Dense, 1.0, 3, 6), bin_threshold).unwrap();
        assert_eq!(t.tree.num_leaves(), 1);
        assert_eq!(t.tree.nodes()[0], TreeNode::Leaf(Leaf::Dense(vec![0.0])));
    }

    #[test]
    fn xor_fits_exactly_at_depth_two() {
        let binned = BinnedMatrix::from_columns(&[vec![0, 0, 1, 1], vec![0, 1, 0, 1]], vec![2, 2]).unwrap();
        let y = [0.0, 1.0, 1.0, 0.0];
        let grads = mse_grads(&[0.0; 4], &y, 1);
        let mut c = cfg(SplitMode::Dense, 0.0, 2, 4);
        // The root split of XOR has zero gain; allow it.
        c.gain_threshold = -1.0;
        let t = grow_tree(&[0, 1, 2, 3], &binned, &grads, &c, bin_threshold).unwrap();
        assert_eq!(t.tree.num_leaves(), 4);
        for (i, &yi) in y.iter().enumerate() {
            let row = [binned.get(i, 0) as f64, binned.get(i, 1) as f64];
            assert_eq!(t.tree.predict_row(&row), vec![yi]);
        }
    }

    #[test]
    fn two_leaf_budget_takes_best_root_split() {
        let binned = BinnedMatrix::from_columns(&[vec![0, 1, 2, 3, 4, 5]], vec![6]).unwrap();
        let y = [0.0, 0.0, 5.0, 5.0, 9.0, 9.0];
        let grads = mse_grads(&[0.0; 6], &y, 1);
        let t = grow_tree(&[0, 1, 2, 3, 4, 5], &binned, &grads, &cfg(SplitMode::Dense, 1.0, 5, 2), bin_threshold).unwrap();
        assert_eq!(t.tree.num_leaves(), 2);
        let hists = build_histograms(&[0, 1, 2, 3, 4, 5], &binned, &grads);
        let best = find_best_split(&hists, &SplitParams::dense(1.0)).unwrap();
        match &t.tree.nodes()[0] {
            TreeNode::Split { bin, .. } => assert_eq!(*bin, best.bin),
            other => panic!("root is {other:?}"),
        }
    }

    #[test]
    fn sparse_leaves_respect_k() {
        let binned = BinnedMatrix::from_columns(&[vec![0, 0, 1, 1, 2, 2]], vec![3]).unwrap();
        let y: Vec<f64> = (0..18).map(|v| ((v * 7) % 5) as f64).collect();
        let grads = mse_grads(&[0.0; 18], &y, 3);
        for mode in [SplitMode::Sparse, SplitMode::Restricted] {
            let mut c = cfg(mode, 1.0, 3, 6);
            c.split.k = 2;
            let t = grow_tree(&[0, 1, 2, 3, 4, 5], &binned, &grads, &c, bin_threshold).unwrap();
            for n in t.tree.nodes() {
                if let TreeNode::Leaf(l) = n {
                    assert!(matches!(l, Leaf::Sparse(p) if p.len() == 2));
                }
            }
        }
    }

    #[test]
    fn config_is_validated() {
        let binned = BinnedMatrix::from_columns(&[vec![0, 1]], vec![2]).unwrap();
        let grads = mse_grads(&[0.0; 2], &[0.0, 1.0], 1);
        let mut c = cfg(SplitMode::Dense, 1.0, 0, 4);
        assert!(grow_tree(&[0, 1], &binned, &grads, &c, bin_threshold).is_err());
        c.max_depth = 2;
        c.max_leaves = 1;
        assert!(grow_tree(&[0, 1], &binned, &grads, &c, bin_threshold).is_err());
        let mut c = cfg(SplitMode::Sparse, 1.0, 2, 4);
        c.split.k = 2;
        assert!(grow_tree(&[0, 1], &binned, &grads, &c, bin_threshold).is_err());
        let c = cfg(SplitMode::Exact, 1.0, 2, 4);
        assert!(grow_tree(&[0, 1], &binned, &grads, &c, bin_threshold).is_err());
    }

    #[test]
    fn tree_validation_rejects_bad_references() {
        let leaf = || TreeNode::Leaf(Leaf::Dense(vec![0.0]));
        let split = |l, r| TreeNode::Split { feature: 0, bin: 0, threshold: 0.5, left: l, right: r };
        assert!(Tree::from_nodes(vec![split(1, 2), leaf(), leaf()], 1).is_ok());
        assert!(Tree::from_nodes(vec![split(1, 1), leaf(), leaf()], 1).is_err());
        assert!(Tree::from_nodes(vec![split(1, 5), leaf(), leaf()], 1).is_err());
        assert!(Tree::from_nodes(vec![leaf(), leaf()], 1).is_err());
        assert!(Tree::from_nodes(vec![TreeNode::Leaf(Leaf::Dense(vec![0.0, 1.0]))], 1).is_err());
    }
}
