//! Dense symmetric eigendecomposition and Cholesky helpers shared by the
//! kernel, PCA and spectral modules.

use alloc::format;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::error::{numerical, Result};

/// Eigendecomposition of a symmetric matrix with eigenvalues sorted in
/// non-increasing order (stable tie order by original index) and a
/// deterministic sign convention: the first coordinate of each eigenvector
/// with magnitude above `1e-12` is made positive.
pub fn sym_eigen_desc(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut values = DVector::zeros(n);
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = eig.eigenvalues[src];
        let mut col = eig.eigenvectors.column(src).clone_owned();
        if let Some(lead) = col.iter().find(|v| v.abs() > 1e-12) {
            if *lead < 0.0 {
                col.neg_mut();
            }
        }
        vectors.set_column(dst, &col);
    }
    (values, vectors)
}

/// Copies row `i` of a points matrix into an owned vector.
pub fn row_vec(m: &DMatrix<f64>, i: usize) -> Vec<f64> {
    m.row(i).iter().copied().collect()
}

/// Outcome of a linear solve of `(A) x = b` for symmetric positive
/// semi-definite `A`, recording how much diagonal jitter was needed.
pub struct SpdSolve {
    pub solution: DVector<f64>,
    pub jitter_applied: f64,
}

/// Solves `A x = b` for symmetric `A` expected to be positive definite.
///
/// Cholesky first; if that fails, one retry with `1e-10 * max diag` jitter;
/// as a last resort an eigendecomposition-based pseudo-solve.
pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<SpdSolve> {
    if let Some(chol) = a.clone().cholesky() {
        return Ok(SpdSolve {
            solution: chol.solve(b),
            jitter_applied: 0.0,
        });
    }
    let jitter = 1e-10 * a.diagonal().amax();
    let mut aj = a.clone();
    for i in 0..aj.nrows() {
        aj[(i, i)] += jitter;
    }
    if let Some(chol) = aj.clone().cholesky() {
        return Ok(SpdSolve {
            solution: chol.solve(b),
            jitter_applied: jitter,
        });
    }
    // Pseudo-solve on the numerically positive part of the spectrum.
    let (values, vectors) = sym_eigen_desc(&aj);
    let cutoff = 1e-14 * values[0].abs().max(1.0);
    let mut x = DVector::zeros(b.len());
    for i in 0..values.len() {
        if values[i] > cutoff {
            let v = vectors.column(i);
            x += v * (v.dot(b) / values[i]);
        }
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(numerical(format!(
            "pseudo-solve produced non-finite values (leading eigenvalue {})",
            values[0]
        )));
    }
    Ok(SpdSolve {
        solution: x,
        jitter_applied: jitter,
    })
}

/// Spectral (largest-singular-value) norm of a general square matrix.
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let sv = m.clone().singular_values();
    sv.max()
}

/// Symmetric square root `M^{1/2}` with negative eigenvalues clamped to 0.
pub fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (values, vectors) = sym_eigen_desc(m);
    let d = DVector::from_iterator(
        values.len(),
        values.iter().map(|&v| if v > 0.0 { num_traits::Float::sqrt(v) } else { 0.0 }),
    );
    &vectors * DMatrix::from_diagonal(&d) * vectors.transpose()
}
