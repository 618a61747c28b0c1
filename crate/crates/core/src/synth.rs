//! Synthetic regression problems with known structure.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::data::RawDataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

pub const FRIEDMAN1_FEATURES: usize = 10;
pub const FRIEDMAN1_OUTPUTS: usize = 5;
pub const FRIEDMAN1_NOISE: f64 = 0.1;
pub const PROJECTION_FEATURES: usize = 4;
pub const PROJECTION_OUTPUTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    Friedman1,
    RandomProjection,
}

impl fmt::Display for SynthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SynthKind::Friedman1 => "friedman1",
            SynthKind::RandomProjection => "random_projection",
        })
    }
}

impl FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "friedman1" => Ok(SynthKind::Friedman1),
            "random_projection" => Ok(SynthKind::RandomProjection),
            _ => Err(Error::config(format!(
                "unknown synthetic kind {s:?} (friedman1, random_projection)"
            ))),
        }
    }
}

impl SynthKind {
    pub fn generate<T: Scalar>(self, n: usize, seed: u64) -> Result<RawDataset<T>> {
        match self {
            SynthKind::Friedman1 => friedman1(n, seed),
            SynthKind::RandomProjection => random_projection(n, seed),
        }
    }
}

/// Noiseless friedman1 response over the first five coordinates.
pub fn friedman1_response(x: &[f64]) -> f64 {
    (PI * x[0] * x[1]).sin() + 2.0 * (x[2] - 0.5).powi(2) + x[3] + 0.5 * x[4]
}

fn unit_box() -> Uniform<f64> {
    Uniform::new(-1.0, 1.0).expect("valid range")
}

fn named<T: Scalar>(features: Vec<f64>, m: usize, targets: Vec<f64>, d: usize) -> Result<RawDataset<T>> {
    let cast = |v: Vec<f64>| v.into_iter().map(T::from_f64_lossy).collect::<Vec<_>>();
    let n = features.len() / m;
    let ds = RawDataset::new(
        Matrix::from_vec(n, m, cast(features))?,
        Matrix::from_vec(n, d, cast(targets))?,
    )?;
    ds.with_feature_names((0..m).map(|j| format!("x{j}")).collect())
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::config("sample count must be positive"));
    }
    Ok(())
}

/// `x ~ U(-1, 1)^10`; each of the five outputs is the friedman1 response plus
/// independent `0.1 · N(0, 1)` noise.
pub fn friedman1<T: Scalar>(n: usize, seed: u64) -> Result<RawDataset<T>> {
    check_n(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (m, d) = (FRIEDMAN1_FEATURES, FRIEDMAN1_OUTPUTS);
    let mut x = Vec::with_capacity(n * m);
    let mut y = Vec::with_capacity(n * d);
    let unif = unit_box();
    for _ in 0..n {
        let row: Vec<f64> = (0..m).map(|_| unif.sample(&mut rng)).collect();
        let f = friedman1_response(&row);
        for _ in 0..d {
            let eps: f64 = StandardNormal.sample(&mut rng);
            y.push(f + FRIEDMAN1_NOISE * eps);
        }
        x.extend(row);
    }
    named(x, m, y, d)
}

/// Projection matrix `w` (4 x 8, entries `U(-1, 1)`) drawn from `seed`.
pub fn projection_matrix(seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    draw_projection(&mut rng)
}

fn draw_projection(rng: &mut impl Rng) -> Vec<f64> {
    let unif = unit_box();
    (0..PROJECTION_FEATURES * PROJECTION_OUTPUTS)
        .map(|_| unif.sample(rng))
        .collect()
}

/// `y = wᵀx` for `x ~ U(-1, 1)^4`, with one `w` per seed (row-major, 4 x 8).
pub fn project(w: &[f64], x: &[f64]) -> Vec<f64> {
    (0..PROJECTION_OUTPUTS)
        .map(|j| {
            x.iter()
                .enumerate()
                .map(|(i, xi)| w[i * PROJECTION_OUTPUTS + j] * xi)
                .sum()
        })
        .collect()
}

pub fn random_projection<T: Scalar>(n: usize, seed: u64) -> Result<RawDataset<T>> {
    check_n(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = draw_projection(&mut rng);
    let m = PROJECTION_FEATURES;
    let unif = unit_box();
    let mut x = Vec::with_capacity(n * m);
    let mut y = Vec::with_capacity(n * PROJECTION_OUTPUTS);
    for _ in 0..n {
        let row: Vec<f64> = (0..m).map(|_| unif.sample(&mut rng)).collect();
        y.extend(project(&w, &row));
        x.extend(row);
    }
    named(x, m, y, PROJECTION_OUTPUTS)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn friedman1_hand_value() {
        let x = [0.5, 0.5, 0.5, 0.2, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let expected = (PI / 4.0).sin() + 0.7;
        assert!((friedman1_response(&x) - expected).abs() < 1e-15);
        assert!((friedman1_response(&x) - 1.407_106_781_186_547_5).abs() < 1e-12);
    }

    #[test]
    fn projection_of_origin_is_zero() {
        let w = projection_matrix(7);
        assert!(project(&w, &[0.0; 4]).iter().all(|&v| v == 0.0));
        assert!(w.iter().all(|v| (-1.0..1.0).contains(v)));
    }

    #[test]
    fn same_seed_same_data() {
        let a: RawDataset<f64> = friedman1(50, 3).unwrap();
        let b: RawDataset<f64> = friedman1(50, 3).unwrap();
        let c: RawDataset<f64> = friedman1(50, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn shapes_and_ranges() {
        let f: RawDataset<f64> = friedman1(200, 1).unwrap();
        assert_eq!((f.num_features(), f.num_outputs()), (10, 5));
        assert!(f.features().as_slice().iter().all(|v| (-1.0..1.0).contains(v)));
        let p: RawDataset<f64> = random_projection(30, 1).unwrap();
        assert_eq!((p.num_features(), p.num_outputs()), (4, 8));
        let w = projection_matrix(1);
        for i in 0..30 {
            assert_eq!(p.targets().row(i), &project(&w, p.features().row(i))[..]);
        }
        assert!(friedman1::<f64>(0, 1).is_err());
    }

    #[test]
    fn noise_scale() {
        let f: RawDataset<f64> = friedman1(4000, 9).unwrap();
        let mut sq = 0.0;
        for i in 0..4000 {
            let r = friedman1_response(f.features().row(i));
            sq += f.targets().row(i).iter().map(|y| (y - r).powi(2)).sum::<f64>();
        }
        let sd = (sq / 20000.0).sqrt();
        assert!((sd - 0.1).abs() < 0.005, "noise sd {sd}");
    }
}
