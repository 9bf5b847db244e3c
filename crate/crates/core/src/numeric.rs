//! Small numerical helpers shared across modules.

use nalgebra::{DMatrix, DVector};

/// Inputs longer than this are summed with Neumaier compensation.
const COMPENSATED_ABOVE: usize = 10_000;

/// Sums an iterator, switching to compensated summation for long inputs.
pub fn sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let values: Vec<f64> = values.into_iter().collect();
    if values.len() <= COMPENSATED_ABOVE {
        values.iter().sum()
    } else {
        neumaier_sum(&values)
    }
}

pub fn neumaier_sum(values: &[f64]) -> f64 {
    let mut total = 0.0;
    let mut comp = 0.0;
    for &v in values {
        let t = total + v;
        if total.abs() >= v.abs() {
            comp += (total - t) + v;
        } else {
            comp += (v - t) + total;
        }
        total = t;
    }
    total + comp
}

/// Minimum-Euclidean-norm least-squares solution of `A x ≈ b` and the
/// Euclidean norm of its residual.
pub fn min_norm_lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, f64) {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = f64::EPSILON * (a.nrows().max(a.ncols()) as f64) * smax.max(f64::MIN_POSITIVE);
    let x = svd
        .solve(b, eps)
        .expect("svd with both factors computed always solves");
    let r = (a * &x - b).norm();
    (x, r)
}

/// Numerical rank with the usual `max(m, n)·ε·σ_max` cutoff.
pub fn rank(a: &DMatrix<f64>) -> usize {
    if a.ncols() == 0 {
        return 0;
    }
    let sv = a.clone().svd(false, false).singular_values;
    let smax = sv.max();
    let tol = f64::EPSILON * (a.nrows().max(a.ncols()) as f64) * smax;
    sv.iter().filter(|s| **s > tol).count()
}

/// Spectral norm `‖A‖₂` by power iteration on `AᵀA` from a fixed start
/// vector, iterated to the given relative tolerance.
pub fn spectral_norm_power(a: &DMatrix<f64>, rel_tol: f64, max_iter: usize) -> f64 {
    let n = a.ncols();
    // Fixed, deterministic start with no special alignment to coordinate axes.
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.5 * ((i as f64 + 1.0) * 0.618_033_988_75).fract());
    v /= v.norm();
    let mut sigma_sq = 0.0;
    for _ in 0..max_iter {
        let w = a.tr_mul(&(a * &v));
        let next = w.norm();
        if next == 0.0 {
            return 0.0;
        }
        v = w / next;
        if (next - sigma_sq).abs() <= rel_tol * next {
            sigma_sq = next;
            break;
        }
        sigma_sq = next;
    }
    sigma_sq.sqrt()
}

/// Spectral norm from the eigendecomposition of the Gram matrix.
pub fn spectral_norm_eig(a: &DMatrix<f64>) -> f64 {
    let gram = a.tr_mul(a);
    let top = gram
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(0.0f64, f64::max);
    top.max(0.0).sqrt()
}

/// Spectral norm: power iteration, cross-checked against the Gram-matrix
/// eigendecomposition when `n ≤ 50`. On disagreement the eigendecomposition
/// value wins (power iteration can stall on clustered top singular values).
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    let power = spectral_norm_power(a, 1e-10, 100_000);
    if a.ncols() <= 50 {
        let eig = spectral_norm_eig(a);
        if (power - eig).abs() > 1e-9 * eig.max(f64::MIN_POSITIVE) {
            return eig;
        }
    }
    power
}
