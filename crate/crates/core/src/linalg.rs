//! Small dense symmetric solves for the exact-hessian mode.

use crate::scalar::Scalar;

/// Diagonal jitter tried in order when a factorization fails.
pub const JITTER_SCHEDULE: [f64; 4] = [0.0, 1e-10, 1e-8, 1e-6];

/// In-place Cholesky factorization of a row-major `d x d` symmetric matrix into its
/// lower triangle. Returns `false` if the matrix is not numerically positive definite.
fn cholesky_in_place<T: Scalar>(a: &mut [T], d: usize) -> bool {
    for j in 0..d {
        let mut diag = a[j * d + j];
        for k in 0..j {
            diag -= a[j * d + k] * a[j * d + k];
        }
        if !(diag > T::zero()) || !diag.is_finite() {
            return false;
        }
        let diag = diag.sqrt();
        a[j * d + j] = diag;
        for i in j + 1..d {
            let mut v = a[i * d + j];
            for k in 0..j {
                v -= a[i * d + k] * a[j * d + k];
            }
            a[i * d + j] = v / diag;
        }
    }
    true
}

fn cholesky_solve<T: Scalar>(l: &[T], d: usize, b: &[T]) -> Vec<T> {
    let mut y = b.to_vec();
    for i in 0..d {
        for k in 0..i {
            let t = l[i * d + k] * y[k];
            y[i] -= t;
        }
        y[i] /= l[i * d + i];
    }
    for i in (0..d).rev() {
        for k in i + 1..d {
            let t = l[k * d + i] * y[k];
            y[i] -= t;
        }
        y[i] /= l[i * d + i];
    }
    y
}

/// Solves `(a + shift·I) x = b` for symmetric `a`, escalating diagonal jitter through
/// [`JITTER_SCHEDULE`]. `None` when every attempt fails.
pub fn solve_spd<T: Scalar>(a: &[T], d: usize, shift: T, b: &[T]) -> Option<Vec<T>> {
    debug_assert_eq!(a.len(), d * d);
    debug_assert_eq!(b.len(), d);
    let diagonal = (0..d).all(|i| (0..d).all(|j| i == j || a[i * d + j] == T::zero()));
    let mut work = vec![T::zero(); d * d];
    for jitter in JITTER_SCHEDULE {
        let add = shift + T::from_f64_lossy(jitter);
        if diagonal {
            let x: Vec<T> = (0..d).map(|j| b[j] / (a[j * d + j] + add)).collect();
            if (0..d).all(|j| a[j * d + j] + add > T::zero()) && x.iter().all(|v| v.is_finite()) {
                return Some(x);
            }
            continue;
        }
        work.copy_from_slice(a);
        for j in 0..d {
            work[j * d + j] += add;
        }
        if cholesky_in_place(&mut work, d) {
            let x = cholesky_solve(&work, d, b);
            if x.iter().all(|v| v.is_finite()) {
                return Some(x);
            }
        }
    }
    None
}
