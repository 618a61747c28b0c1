//! The boosting loop and the ensemble it produces.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::data::{BinMapper, BinnedMatrix, RawDataset};
use crate::error::{Error, Result};
use crate::losses::{evaluate_metric, softmax_probabilities, GradHessBuffer, LossKind, Metric};
use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::split::{SplitMode, SplitParams};
use crate::tree::{grow_tree, GrownTree, Tree, TreeConfig, DEFAULT_NODE_STORE_LIMIT};

/// How trees are fitted each round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoostMode {
    /// One tree per round, dense `d`-vector leaves, diagonal hessian.
    MoDense,
    /// One tree per round, each child keeps its own top-`k` columns.
    MoSparse,
    /// One tree per round, siblings share one top-`k` column set.
    MoRestricted,
    /// One tree per round, full `d x d` hessian in gains and leaves.
    MoExact,
    /// `d` single-output trees per round, one per output column.
    SoBaseline,
}

impl BoostMode {
    pub fn split_mode(self) -> SplitMode {
        match self {
            BoostMode::MoDense | BoostMode::SoBaseline => SplitMode::Dense,
            BoostMode::MoSparse => SplitMode::Sparse,
            BoostMode::MoRestricted => SplitMode::Restricted,
            BoostMode::MoExact => SplitMode::Exact,
        }
    }

    pub fn is_sparse(self) -> bool {
        matches!(self, BoostMode::MoSparse | BoostMode::MoRestricted)
    }
}

impl fmt::Display for BoostMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoostMode::MoDense => "mo_dense",
            BoostMode::MoSparse => "mo_sparse",
            BoostMode::MoRestricted => "mo_restricted",
            BoostMode::MoExact => "mo_exact",
            BoostMode::SoBaseline => "so_baseline",
        })
    }
}

impl FromStr for BoostMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mo_dense" => Ok(BoostMode::MoDense),
            "mo_sparse" => Ok(BoostMode::MoSparse),
            "mo_restricted" => Ok(BoostMode::MoRestricted),
            "mo_exact" => Ok(BoostMode::MoExact),
            "so_baseline" => Ok(BoostMode::SoBaseline),
            _ => Err(Error::config(format!(
                "unknown mode {s:?} (mo_dense, mo_sparse, mo_restricted, mo_exact, so_baseline)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BaseScore {
    /// Every output starts at zero.
    #[default]
    Zero,
    /// Every output starts at its training-target mean.
    Mean,
}

/// Leaf budget used when none is configured: `⌊0.75 · 2^depth⌋`, at least 2.
pub fn default_max_leaves(max_depth: usize) -> usize {
    let full = 1usize.checked_shl(max_depth.min(62) as u32).unwrap_or(usize::MAX);
    (full / 4 * 3 + (full % 4) * 3 / 4).max(2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoosterConfig<T> {
    pub loss: LossKind,
    /// Early-stopping and history metric; defaults to the loss's natural metric.
    pub metric: Option<Metric>,
    pub mode: BoostMode,
    pub learning_rate: T,
    pub lambda: T,
    pub max_depth: usize,
    /// Defaults to [`default_max_leaves`] of `max_depth`.
    pub max_leaves: Option<usize>,
    pub min_samples: usize,
    pub gain_threshold: T,
    pub max_bins: usize,
    /// Columns kept per leaf in the sparse modes.
    pub sparse_k: Option<usize>,
    pub max_rounds: usize,
    /// `None` disables early stopping.
    pub early_stop_patience: Option<usize>,
    pub seed: u64,
    pub base_score: BaseScore,
    pub node_store_limit: usize,
    /// Worker threads; `None` uses the ambient rayon pool.
    pub workers: Option<usize>,
}

impl<T: Scalar> Default for BoosterConfig<T> {
    fn default() -> Self {
        Self {
            loss: LossKind::Mse,
            metric: None,
            mode: BoostMode::MoDense,
            learning_rate: T::from_f64_lossy(0.1),
            lambda: T::one(),
            max_depth: 5,
            max_leaves: None,
            min_samples: 4,
            gain_threshold: T::from_f64_lossy(1e-6),
            max_bins: 32,
            sparse_k: None,
            max_rounds: 1000,
            early_stop_patience: Some(25),
            seed: 0,
            base_score: BaseScore::Zero,
            node_store_limit: DEFAULT_NODE_STORE_LIMIT,
            workers: None,
        }
    }
}

impl<T: Scalar> BoosterConfig<T> {
    pub fn metric(&self) -> Metric {
        self.metric.unwrap_or_else(|| self.loss.default_metric())
    }

    pub fn max_leaves(&self) -> usize {
        self.max_leaves.unwrap_or_else(|| default_max_leaves(self.max_depth))
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if d == 0 {
            return Err(Error::config("at least one output is required"));
        }
        if !(self.learning_rate >= T::zero()) || !self.learning_rate.is_finite() {
            return Err(Error::config("learning rate must be finite and non-negative"));
        }
        if !(self.lambda >= T::zero()) || !self.lambda.is_finite() {
            return Err(Error::config("lambda must be finite and non-negative"));
        }
        if self.gain_threshold.is_nan() {
            return Err(Error::config("gain threshold must not be NaN"));
        }
        if self.max_bins < 2 {
            return Err(Error::config("max_bins must be at least 2"));
        }
        if self.mode.is_sparse() {
            match self.sparse_k {
                Some(k) if (1..=d).contains(&k) => {}
                Some(k) => return Err(Error::config(format!("sparse k must be in [1, {d}], got {k}"))),
                None => return Err(Error::config(format!("mode {} requires sparse k", self.mode))),
            }
        }
        if self.workers == Some(0) {
            return Err(Error::config("workers must be positive"));
        }
        self.tree_config(d).validate(d)
    }

    fn tree_config(&self, d: usize) -> TreeConfig<T> {
        TreeConfig {
            split: SplitParams {
                mode: self.mode.split_mode(),
                lambda: self.lambda,
                k: if self.mode.is_sparse() { self.sparse_k.unwrap_or(d) } else { 0 },
                min_samples: self.min_samples,
            },
            max_depth: self.max_depth,
            max_leaves: self.max_leaves(),
            gain_threshold: self.gain_threshold,
            node_store_limit: self.node_store_limit,
        }
    }
}

/// Which outputs a tree contributes to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreeTarget {
    All,
    /// A single-output tree serving output `j`.
    Output(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble<T> {
    pub(crate) trees: Vec<(TreeTarget, Tree<T>)>,
    pub(crate) learning_rate: T,
    pub(crate) base_score: Vec<T>,
    pub(crate) loss: LossKind,
    pub(crate) mode: BoostMode,
    pub(crate) num_features: usize,
    pub(crate) feature_names: Option<Vec<String>>,
}

impl<T: Scalar> Ensemble<T> {
    /// An ensemble without trees.
    pub fn new(
        loss: LossKind,
        mode: BoostMode,
        num_features: usize,
        learning_rate: T,
        base_score: Vec<T>,
    ) -> Result<Self> {
        if base_score.is_empty() {
            return Err(Error::config("base score needs at least one output"));
        }
        if num_features == 0 {
            return Err(Error::config("an ensemble needs at least one feature"));
        }
        Ok(Self {
            trees: Vec::new(),
            learning_rate,
            base_score,
            loss,
            mode,
            num_features,
            feature_names: None,
        })
    }

    pub fn push_tree(&mut self, target: TreeTarget, tree: Tree<T>) -> Result<()> {
        let expected = match target {
            TreeTarget::All => self.num_outputs(),
            TreeTarget::Output(j) if j < self.num_outputs() => 1,
            TreeTarget::Output(j) => {
                return Err(Error::shape(format!("tree targets output {j} of {}", self.num_outputs())))
            }
        };
        if tree.num_outputs() != expected {
            return Err(Error::shape(format!(
                "tree predicts {} outputs, expected {expected}",
                tree.num_outputs()
            )));
        }
        for node in tree.nodes() {
            if let crate::tree::TreeNode::Split { feature, .. } = node {
                if *feature >= self.num_features {
                    return Err(Error::shape(format!(
                        "tree splits on feature {feature} of {}",
                        self.num_features
                    )));
                }
            }
        }
        self.trees.push((target, tree));
        Ok(())
    }

    pub fn set_feature_names(&mut self, names: Option<Vec<String>>) {
        self.feature_names = names;
    }

    pub fn trees(&self) -> &[(TreeTarget, Tree<T>)] {
        &self.trees
    }

    pub fn num_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn learning_rate(&self) -> T {
        self.learning_rate
    }

    pub fn base_score(&self) -> &[T] {
        &self.base_score
    }

    pub fn loss(&self) -> LossKind {
        self.loss
    }

    pub fn mode(&self) -> BoostMode {
        self.mode
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn num_outputs(&self) -> usize {
        self.base_score.len()
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    /// Trees grown per boosting round.
    pub fn trees_per_round(&self) -> usize {
        if self.mode == BoostMode::SoBaseline {
            self.num_outputs()
        } else {
            1
        }
    }

    fn add_tree(&self, target: TreeTarget, tree: &Tree<T>, row: &[T], out: &mut [T]) {
        let leaf = tree.leaf(row);
        match target {
            TreeTarget::All => leaf.add_scaled(self.learning_rate, out),
            TreeTarget::Output(j) => leaf.add_scaled(self.learning_rate, &mut out[j..j + 1]),
        }
    }

    /// `base_score + α · Σ tree(x)`, accumulated tree by tree in ensemble order.
    pub fn predict_raw(&self, features: &Matrix<T>) -> Result<Matrix<T>> {
        if features.cols() != self.num_features {
            return Err(Error::shape(format!(
                "model expects {} features, input has {}",
                self.num_features,
                features.cols()
            )));
        }
        let d = self.num_outputs();
        let mut out = Vec::with_capacity(features.rows() * d);
        for _ in 0..features.rows() {
            out.extend_from_slice(&self.base_score);
        }
        out.par_chunks_mut(d.max(1))
            .enumerate()
            .for_each(|(i, o)| {
                let row = features.row(i);
                for (target, tree) in &self.trees {
                    self.add_tree(*target, tree, row, o);
                }
            });
        Matrix::from_vec(features.rows(), d, out)
    }

    /// Class probabilities for softmax models; raw predictions otherwise.
    pub fn predict(&self, features: &Matrix<T>, probabilities: bool) -> Result<Matrix<T>> {
        let raw = self.predict_raw(features)?;
        Ok(if probabilities && self.loss == LossKind::SoftmaxCe {
            softmax_probabilities(&raw)
        } else {
            raw
        })
    }

    /// Keeps only the trees of the first `rounds` rounds.
    pub fn truncate_rounds(&mut self, rounds: usize) {
        let keep = rounds.saturating_mul(self.trees_per_round());
        self.trees.truncate(keep);
    }
}

/// One line of training history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundRecord<T> {
    /// 1-based round number.
    pub round: usize,
    pub train_loss: T,
    /// Metric on the eval set, when one was given.
    pub eval_metric: Option<T>,
    pub seconds: f64,
}

impl<T: Scalar> fmt::Display for RoundRecord<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},", self.round, self.train_loss)?;
        if let Some(m) = self.eval_metric {
            write!(f, "{m}")?;
        }
        write!(f, ",{:.6}", self.seconds)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput<T> {
    /// Truncated at the best round.
    pub ensemble: Ensemble<T>,
    /// Every round actually run.
    pub history: Vec<RoundRecord<T>>,
    /// 1-based; 0 only when no round ran.
    pub best_round: usize,
    /// Monitored value at the best round.
    pub best_value: Option<T>,
}

struct Prepared {
    binned: BinnedMatrix,
}

fn check_compatible<T: Scalar>(train: &RawDataset<T>, other: &RawDataset<T>) -> Result<()> {
    if train.num_features() != other.num_features() || train.num_outputs() != other.num_outputs() {
        return Err(Error::shape(format!(
            "eval set is {}x{} (features x outputs), training set is {}x{}",
            other.num_features(),
            other.num_outputs(),
            train.num_features(),
            train.num_outputs()
        )));
    }
    Ok(())
}

fn apply_leaves<T: Scalar>(grown: &GrownTree<T>, target: TreeTarget, lr: T, pred: &mut Matrix<T>) {
    for (leaf_id, samples) in &grown.leaf_samples {
        let crate::tree::TreeNode::Leaf(leaf) = &grown.tree.nodes()[*leaf_id] else {
            unreachable!("leaf_samples only lists leaves");
        };
        for &i in samples {
            let row = pred.row_mut(i);
            match target {
                TreeTarget::All => leaf.add_scaled(lr, row),
                TreeTarget::Output(j) => leaf.add_scaled(lr, &mut row[j..j + 1]),
            }
        }
    }
}

/// Fits an ensemble. With an eval set, early stopping monitors the eval metric;
/// otherwise it monitors the training loss.
pub fn train<T: Scalar>(
    dataset: &RawDataset<T>,
    eval_set: Option<&RawDataset<T>>,
    config: &BoosterConfig<T>,
) -> Result<TrainOutput<T>> {
    match config.workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::config(format!("cannot build worker pool: {e}")))?;
            pool.install(|| train_inner(dataset, eval_set, config))
        }
        None => train_inner(dataset, eval_set, config),
    }
}

fn train_inner<T: Scalar>(
    dataset: &RawDataset<T>,
    eval_set: Option<&RawDataset<T>>,
    config: &BoosterConfig<T>,
) -> Result<TrainOutput<T>> {
    let n = dataset.num_samples();
    let d = dataset.num_outputs();
    config.validate(d)?;
    if let Some(e) = eval_set {
        check_compatible(dataset, e)?;
    }
    if config.loss == LossKind::SoftmaxCe {
        dataset.check_one_hot()?;
        if let Some(e) = eval_set {
            e.check_one_hot()?;
        }
    }
    let mode = canonical_mode(config, d);

    let mapper = BinMapper::build(dataset.features(), config.max_bins)?;
    let prepared = Prepared {
        binned: mapper.bin_matrix(dataset.features())?,
    };
    let thresholds = |f: usize, b: usize| mapper.upper_bound(f, b);

    let base = match config.base_score {
        BaseScore::Zero => vec![T::zero(); d],
        BaseScore::Mean => (0..d)
            .map(|j| dataset.targets().column(j).sum::<T>() / T::from_count(n))
            .collect(),
    };
    let mut ensemble = Ensemble::new(config.loss, mode, dataset.num_features(), config.learning_rate, base.clone())?;
    ensemble.set_feature_names(dataset.feature_names().map(<[String]>::to_vec));

    let mut pred = Matrix::from_vec(n, d, base.repeat(n))?;
    let mut eval_pred = eval_set
        .map(|e| Matrix::from_vec(e.num_samples(), d, base.repeat(e.num_samples())))
        .transpose()?;
    let metric = config.metric();
    let samples: Vec<usize> = (0..n).collect();
    let mut tree_config = config.tree_config(d);
    tree_config.split.mode = mode.split_mode();

    let mut history = Vec::new();
    let mut best: Option<(usize, T)> = None;
    for round in 1..=config.max_rounds {
        let start = Instant::now();
        let grads = config
            .loss
            .grad_hess(&pred, dataset.targets(), mode == BoostMode::MoExact)?;
        let new_trees = grow_round(&samples, &prepared, &grads, &tree_config, mode, d, &thresholds)?;
        for (target, grown) in &new_trees {
            apply_leaves(grown, *target, config.learning_rate, &mut pred);
        }
        for (target, grown) in new_trees {
            ensemble.trees.push((target, grown.tree));
        }
        let first_new = ensemble.trees.len() - ensemble.trees_per_round();
        if let (Some(ep), Some(e)) = (eval_pred.as_mut(), eval_set) {
            let trees = &ensemble.trees[first_new..];
            for i in 0..e.num_samples() {
                let row = e.features().row(i);
                let out = ep.row_mut(i);
                for (target, tree) in trees {
                    ensemble.add_tree(*target, tree, row, out);
                }
            }
        }
        let train_loss = config.loss.mean_loss(&pred, dataset.targets())?;
        let eval_metric = match (eval_pred.as_ref(), eval_set) {
            (Some(ep), Some(e)) => Some(evaluate_metric(metric, ep, e.targets())?),
            _ => None,
        };
        if !train_loss.is_finite() {
            return Err(Error::Numeric(format!("training loss became {train_loss} at round {round}")));
        }
        history.push(RoundRecord {
            round,
            train_loss,
            eval_metric,
            seconds: start.elapsed().as_secs_f64(),
        });
        log::debug!("{}", history.last().unwrap());

        let (monitored, improves) = match eval_metric {
            Some(m) => (m, best.is_none_or(|(_, b)| metric.improves(m, b))),
            None => (train_loss, best.is_none_or(|(_, b)| train_loss < b)),
        };
        if improves {
            best = Some((round, monitored));
        }
        if let (Some(patience), Some((best_round, _))) = (config.early_stop_patience, best) {
            if round - best_round >= patience {
                break;
            }
        }
    }
    let (best_round, best_value) = match best {
        Some((r, v)) => (r, Some(v)),
        None => (0, None),
    };
    ensemble.truncate_rounds(best_round);
    Ok(TrainOutput {
        ensemble,
        history,
        best_round,
        best_value,
    })
}

/// Degenerate settings that reduce to plain dense multi-output boosting: a single
/// output in the baseline, or a sparse `k` that keeps every column.
fn canonical_mode<T: Scalar>(config: &BoosterConfig<T>, d: usize) -> BoostMode {
    match config.mode {
        BoostMode::SoBaseline if d == 1 => BoostMode::MoDense,
        BoostMode::MoSparse | BoostMode::MoRestricted if config.sparse_k == Some(d) => BoostMode::MoDense,
        mode => mode,
    }
}

fn grow_round<T: Scalar>(
    samples: &[usize],
    prepared: &Prepared,
    grads: &GradHessBuffer<T>,
    tree_config: &TreeConfig<T>,
    mode: BoostMode,
    d: usize,
    thresholds: &(impl Fn(usize, usize) -> T + Sync),
) -> Result<Vec<(TreeTarget, GrownTree<T>)>> {
    if mode != BoostMode::SoBaseline {
        let grown = grow_tree(samples, &prepared.binned, grads, tree_config, thresholds)?;
        return Ok(vec![(TreeTarget::All, grown)]);
    }
    // All d trees see the same prediction snapshot.
    (0..d)
        .into_par_iter()
        .map(|j| {
            let column = grads.column(j);
            grow_tree(samples, &prepared.binned, &column, tree_config, thresholds)
                .map(|g| (TreeTarget::Output(j), g))
        })
        .collect()
}
