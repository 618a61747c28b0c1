//! Twice-differentiable losses and evaluation metrics.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Per-sample first and second derivatives of the loss w.r.t. the raw prediction.
///
/// `g` and `h` are row-major `n x d`; `h` holds the hessian diagonal. `full_h`, when
/// present, holds one row-major `d x d` hessian per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct GradHessBuffer<T> {
    n: usize,
    d: usize,
    g: Vec<T>,
    h: Vec<T>,
    full_h: Option<Vec<T>>,
}

impl<T: Scalar> GradHessBuffer<T> {
    pub fn new(n: usize, d: usize, g: Vec<T>, h: Vec<T>, full_h: Option<Vec<T>>) -> Result<Self> {
        if g.len() != n * d || h.len() != n * d {
            return Err(Error::shape(format!("gradient buffers must hold {n}x{d} values")));
        }
        if let Some(f) = &full_h {
            if f.len() != n * d * d {
                return Err(Error::shape(format!("full hessian must hold {n}x{d}x{d} values")));
            }
        }
        Ok(Self { n, d, g, h, full_h })
    }

    pub fn num_samples(&self) -> usize {
        self.n
    }

    pub fn num_outputs(&self) -> usize {
        self.d
    }

    pub fn g(&self, i: usize) -> &[T] {
        &self.g[i * self.d..(i + 1) * self.d]
    }

    pub fn h(&self, i: usize) -> &[T] {
        &self.h[i * self.d..(i + 1) * self.d]
    }

    pub fn full_h(&self, i: usize) -> Option<&[T]> {
        let dd = self.d * self.d;
        self.full_h.as_ref().map(|f| &f[i * dd..(i + 1) * dd])
    }

    pub fn has_full_hessian(&self) -> bool {
        self.full_h.is_some()
    }

    /// The single-output buffer of output column `j` (diagonal hessian only).
    pub fn column(&self, j: usize) -> Self {
        let pick = |v: &[T]| v.iter().skip(j).step_by(self.d).copied().collect();
        Self {
            n: self.n,
            d: 1,
            g: pick(&self.g),
            h: pick(&self.h),
            full_h: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    /// `½‖ŷ − y‖²`.
    Mse,
    /// Softmax cross-entropy against one-hot targets.
    SoftmaxCe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Rmse,
    Top1Accuracy,
}

impl LossKind {
    pub fn default_metric(self) -> Metric {
        match self {
            LossKind::Mse => Metric::Rmse,
            LossKind::SoftmaxCe => Metric::Top1Accuracy,
        }
    }

    /// Gradients and hessians at the raw predictions; `full` also fills per-sample
    /// `d x d` hessians.
    pub fn grad_hess<T: Scalar>(
        self,
        pred: &Matrix<T>,
        target: &Matrix<T>,
        full: bool,
    ) -> Result<GradHessBuffer<T>> {
        match self {
            LossKind::Mse => mse_grad_hess(pred, target, full),
            LossKind::SoftmaxCe => softmax_grad_hess(pred, target, full),
        }
    }

    /// Mean per-sample loss.
    pub fn mean_loss<T: Scalar>(self, pred: &Matrix<T>, target: &Matrix<T>) -> Result<T> {
        check_shapes(pred, target)?;
        let n = pred.rows();
        if n == 0 {
            return Ok(T::zero());
        }
        let total: T = match self {
            LossKind::Mse => pred
                .iter_rows()
                .zip(target.iter_rows())
                .map(|(p, y)| {
                    T::half()
                        * p.iter()
                            .zip(y)
                            .map(|(&a, &b)| (a - b) * (a - b))
                            .sum::<T>()
                })
                .sum(),
            LossKind::SoftmaxCe => pred
                .iter_rows()
                .zip(target.iter_rows())
                .map(|(logits, y)| {
                    let lse = log_sum_exp(logits);
                    logits
                        .iter()
                        .zip(y)
                        .map(|(&z, &t)| t * (lse - z))
                        .sum::<T>()
                })
                .sum(),
        };
        Ok(total / T::from_count(n))
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::Mse => "mse",
            LossKind::SoftmaxCe => "softmax",
        })
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mse" => Ok(LossKind::Mse),
            "softmax" | "softmax_ce" | "ce" => Ok(LossKind::SoftmaxCe),
            _ => Err(Error::config(format!("unknown loss {s:?} (mse, softmax)"))),
        }
    }
}

impl Metric {
    pub fn higher_is_better(self) -> bool {
        matches!(self, Metric::Top1Accuracy)
    }

    /// True when `candidate` is strictly better than `incumbent`.
    pub fn improves<T: Scalar>(self, candidate: T, incumbent: T) -> bool {
        if self.higher_is_better() {
            candidate > incumbent
        } else {
            candidate < incumbent
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Rmse => "rmse",
            Metric::Top1Accuracy => "accuracy",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rmse" => Ok(Metric::Rmse),
            "accuracy" | "top1" | "top1_accuracy" => Ok(Metric::Top1Accuracy),
            _ => Err(Error::config(format!("unknown metric {s:?} (rmse, accuracy)"))),
        }
    }
}

fn check_shapes<T: Scalar>(pred: &Matrix<T>, target: &Matrix<T>) -> Result<()> {
    if pred.rows() != target.rows() || pred.cols() != target.cols() {
        return Err(Error::shape(format!(
            "predictions are {}x{}, targets are {}x{}",
            pred.rows(),
            pred.cols(),
            target.rows(),
            target.cols()
        )));
    }
    Ok(())
}

/// `g = ŷ − y`, `h = 1`, full hessian the identity.
pub fn mse_grad_hess<T: Scalar>(
    pred: &Matrix<T>,
    target: &Matrix<T>,
    full: bool,
) -> Result<GradHessBuffer<T>> {
    check_shapes(pred, target)?;
    let (n, d) = (pred.rows(), pred.cols());
    let g = pred
        .as_slice()
        .iter()
        .zip(target.as_slice())
        .map(|(&p, &y)| p - y)
        .collect();
    let h = vec![T::one(); n * d];
    let full_h = full.then(|| {
        let mut eye = vec![T::zero(); d * d];
        for j in 0..d {
            eye[j * d + j] = T::one();
        }
        eye.repeat(n)
    });
    GradHessBuffer::new(n, d, g, h, full_h)
}

fn log_sum_exp<T: Scalar>(z: &[T]) -> T {
    let max = z.iter().copied().fold(T::neg_infinity(), T::max);
    max + z.iter().map(|&v| (v - max).exp()).sum::<T>().ln()
}

/// Numerically stable softmax of one row, written into `out`.
pub fn softmax_into<T: Scalar>(logits: &[T], out: &mut [T]) {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let mut total = T::zero();
    for (o, &z) in out.iter_mut().zip(logits) {
        *o = (z - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

/// Row-wise softmax probabilities.
pub fn softmax_probabilities<T: Scalar>(logits: &Matrix<T>) -> Matrix<T> {
    let mut out = logits.clone();
    for i in 0..logits.rows() {
        softmax_into(logits.row(i), out.row_mut(i));
    }
    out
}

/// `g = p − y`, `h = p ⊙ (1 − p)`, full hessian `diag(p) − p pᵀ`.
pub fn softmax_grad_hess<T: Scalar>(
    logits: &Matrix<T>,
    target: &Matrix<T>,
    full: bool,
) -> Result<GradHessBuffer<T>> {
    check_shapes(logits, target)?;
    let (n, d) = (logits.rows(), logits.cols());
    let mut g = Vec::with_capacity(n * d);
    let mut h = Vec::with_capacity(n * d);
    let mut full_h = full.then(|| Vec::with_capacity(n * d * d));
    let mut p = vec![T::zero(); d];
    for i in 0..n {
        let y = target.row(i);
        let ones = y.iter().filter(|&&v| v == T::one()).count();
        let zeros = y.iter().filter(|&&v| v == T::zero()).count();
        if ones != 1 || ones + zeros != d {
            return Err(Error::Ingestion {
                row: i + 1,
                column: 1,
                message: "softmax targets must be one-hot".into(),
            });
        }
        softmax_into(logits.row(i), &mut p);
        for j in 0..d {
            g.push(p[j] - y[j]);
            h.push(p[j] * (T::one() - p[j]));
        }
        if let Some(f) = full_h.as_mut() {
            for a in 0..d {
                for b in 0..d {
                    let diag = if a == b { p[a] } else { T::zero() };
                    f.push(diag - p[a] * p[b]);
                }
            }
        }
    }
    GradHessBuffer::new(n, d, g, h, full_h)
}

fn argmax<T: Scalar>(row: &[T]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = j;
        }
    }
    best
}

/// RMSE over all `n·d` entries, or the fraction of rows whose argmax matches
/// (ties resolve to the lowest index).
pub fn evaluate_metric<T: Scalar>(metric: Metric, pred: &Matrix<T>, target: &Matrix<T>) -> Result<T> {
    check_shapes(pred, target)?;
    let n = pred.rows();
    if n == 0 {
        return Ok(T::zero());
    }
    Ok(match metric {
        Metric::Rmse => {
            let sq: T = pred
                .as_slice()
                .iter()
                .zip(target.as_slice())
                .map(|(&p, &y)| (p - y) * (p - y))
                .sum();
            (sq / T::from_count(n * pred.cols())).sqrt()
        }
        Metric::Top1Accuracy => {
            let hits = pred
                .iter_rows()
                .zip(target.iter_rows())
                .filter(|(p, y)| argmax(p) == argmax(y))
                .count();
            T::from_count(hits) / T::from_count(n)
        }
    })
}
