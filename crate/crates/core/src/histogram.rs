//! Per-feature gradient histograms over all output dimensions.

use rayon::prelude::*;

use crate::data::{BinColumn, BinnedMatrix};
use crate::error::{Error, Result};
use crate::losses::GradHessBuffer;
use crate::scalar::Scalar;

/// Gradient statistics of one feature, accumulated per bin.
///
/// Bins-major layout: the `d` sums of bin `k` are contiguous at `k*d..(k+1)*d`
/// (and `k*d*d..` for the optional full hessian sums).
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram<T> {
    feature: usize,
    bins: usize,
    d: usize,
    g: Vec<T>,
    h: Vec<T>,
    count: Vec<usize>,
    full_h: Option<Vec<T>>,
}

impl<T: Scalar> Histogram<T> {
    pub fn zeros(feature: usize, bins: usize, d: usize, full: bool) -> Self {
        Self {
            feature,
            bins,
            d,
            g: vec![T::zero(); bins * d],
            h: vec![T::zero(); bins * d],
            count: vec![0; bins],
            full_h: full.then(|| vec![T::zero(); bins * d * d]),
        }
    }

    pub fn feature(&self) -> usize {
        self.feature
    }

    pub fn num_bins(&self) -> usize {
        self.bins
    }

    pub fn num_outputs(&self) -> usize {
        self.d
    }

    pub fn g(&self, bin: usize) -> &[T] {
        &self.g[bin * self.d..(bin + 1) * self.d]
    }

    pub fn h(&self, bin: usize) -> &[T] {
        &self.h[bin * self.d..(bin + 1) * self.d]
    }

    pub fn full_h(&self, bin: usize) -> Option<&[T]> {
        let dd = self.d * self.d;
        self.full_h.as_ref().map(|f| &f[bin * dd..(bin + 1) * dd])
    }

    pub fn count(&self, bin: usize) -> usize {
        self.count[bin]
    }

    pub fn total_count(&self) -> usize {
        self.count.iter().sum()
    }

    pub fn has_full_hessian(&self) -> bool {
        self.full_h.is_some()
    }

    /// Adds one sample's statistics into `bin`.
    pub fn add_sample(&mut self, bin: usize, g: &[T], h: &[T], full_h: Option<&[T]>) {
        let d = self.d;
        self.count[bin] += 1;
        for (acc, &v) in self.g[bin * d..(bin + 1) * d].iter_mut().zip(g) {
            *acc += v;
        }
        for (acc, &v) in self.h[bin * d..(bin + 1) * d].iter_mut().zip(h) {
            *acc += v;
        }
        if let (Some(acc), Some(fh)) = (self.full_h.as_mut(), full_h) {
            let dd = d * d;
            for (a, &v) in acc[bin * dd..(bin + 1) * dd].iter_mut().zip(fh) {
                *a += v;
            }
        }
    }
}

fn accumulate<T: Scalar>(
    hist: &mut Histogram<T>,
    samples: &[usize],
    column: BinColumn<'_>,
    grads: &GradHessBuffer<T>,
) {
    let d = hist.d;
    let full = hist.full_h.is_some();
    // Specialised loops per storage width keep the inner loop free of a match.
    macro_rules! scan {
        ($col:expr) => {
            for &i in samples {
                let bin = $col[i] as usize;
                hist.count[bin] += 1;
                let (gs, hs) = (grads.g(i), grads.h(i));
                let base = bin * d;
                for j in 0..d {
                    hist.g[base + j] += gs[j];
                    hist.h[base + j] += hs[j];
                }
                if full {
                    let dd = d * d;
                    let acc = hist.full_h.as_mut().unwrap();
                    let fh = grads.full_h(i).unwrap();
                    for (a, &v) in acc[bin * dd..(bin + 1) * dd].iter_mut().zip(fh) {
                        *a += v;
                    }
                }
            }
        };
    }
    match column {
        BinColumn::U8(c) => scan!(c),
        BinColumn::U16(c) => scan!(c),
    }
}

/// Histogram of `feature` over `samples`. Full hessian sums are accumulated whenever
/// `grads` carries full hessians.
pub fn build_histogram<T: Scalar>(
    samples: &[usize],
    feature: usize,
    binned: &BinnedMatrix,
    grads: &GradHessBuffer<T>,
) -> Histogram<T> {
    let mut hist = Histogram::zeros(
        feature,
        binned.num_bins(feature),
        grads.num_outputs(),
        grads.has_full_hessian(),
    );
    accumulate(&mut hist, samples, binned.column(feature), grads);
    hist
}

/// Histograms of every feature, built in parallel across features.
pub fn build_histograms<T: Scalar>(
    samples: &[usize],
    binned: &BinnedMatrix,
    grads: &GradHessBuffer<T>,
) -> Vec<Histogram<T>> {
    (0..binned.num_features())
        .into_par_iter()
        .map(|f| build_histogram(samples, f, binned, grads))
        .collect()
}

/// Element-wise `parent − child`: the histogram of the parent's other samples.
pub fn subtract_histogram<T: Scalar>(parent: &Histogram<T>, child: &Histogram<T>) -> Result<Histogram<T>> {
    if parent.feature != child.feature
        || parent.bins != child.bins
        || parent.d != child.d
        || parent.full_h.is_some() != child.full_h.is_some()
    {
        return Err(Error::shape(format!(
            "cannot subtract histogram (feature {}, {} bins, d={}) from (feature {}, {} bins, d={})",
            child.feature, child.bins, child.d, parent.feature, parent.bins, parent.d
        )));
    }
    let mut count = Vec::with_capacity(parent.bins);
    for (k, (&p, &c)) in parent.count.iter().zip(&child.count).enumerate() {
        count.push(p.checked_sub(c).ok_or_else(|| {
            Error::shape(format!("bin {k}: child count {c} exceeds parent count {p}"))
        })?);
    }
    let sub = |a: &[T], b: &[T]| a.iter().zip(b).map(|(&x, &y)| x - y).collect::<Vec<_>>();
    Ok(Histogram {
        feature: parent.feature,
        bins: parent.bins,
        d: parent.d,
        g: sub(&parent.g, &child.g),
        h: sub(&parent.h, &child.h),
        count,
        full_h: parent
            .full_h
            .as_ref()
            .zip(child.full_h.as_ref())
            .map(|(p, c)| sub(p, c)),
    })
}

pub fn subtract_histograms<T: Scalar>(
    parent: &[Histogram<T>],
    child: &[Histogram<T>],
) -> Result<Vec<Histogram<T>>> {
    if parent.len() != child.len() {
        return Err(Error::shape("histogram sets cover different feature counts"));
    }
    parent
        .par_iter()
        .zip(child.par_iter())
        .map(|(p, c)| subtract_histogram(p, c))
        .collect()
}
