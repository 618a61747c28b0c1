//! Paired-trial confidence that one method beats another.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Confidence that `a - b > 0`.
    Greater,
    /// Confidence that `a - b < 0`.
    Less,
}

impl std::str::FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greater" => Ok(Direction::Greater),
            "less" => Ok(Direction::Less),
            _ => Err(Error::config(format!("unknown direction {s:?} (greater, less)"))),
        }
    }
}

/// The t statistic `mean · √n / sd` of the paired differences `a - b`.
pub fn t_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape(format!("{} trials against {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::config("at least two trials are required"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Data("trial results must be finite".into()));
    }
    let n = a.len() as f64;
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    if !(sd > 0.0) {
        return Err(Error::Numeric(
            "differences have zero variance, confidence is degenerate".into(),
        ));
    }
    Ok(mean * n.sqrt() / sd)
}

/// `P(T > -t)` with `n - 1` degrees of freedom for [`Direction::Greater`], and the
/// mirror image for [`Direction::Less`].
pub fn confidence(a: &[f64], b: &[f64], direction: Direction) -> Result<f64> {
    let t = t_statistic(a, b)?;
    let dist = StudentsT::new(0.0, 1.0, (a.len() - 1) as f64)
        .map_err(|e| Error::Internal(format!("t distribution: {e}")))?;
    Ok(match direction {
        Direction::Greater => dist.cdf(t),
        Direction::Less => dist.cdf(-t),
    })
}
