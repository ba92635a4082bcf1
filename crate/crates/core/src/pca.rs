//! Empirical PCA projections, reconstruction errors, projector distances
//! and the structural-error bound.

use alloc::format;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use num_traits::Float;

use crate::error::{invalid, Result};
use crate::linalg;

/// A rank-`d` orthogonal projection of `R^D`, stored as an orthonormal
/// basis `A` (rows) together with the projector `P = A^T A`.
#[derive(Debug, Clone)]
pub struct Projection {
    /// d x D matrix with orthonormal rows.
    pub basis: DMatrix<f64>,
    /// D x D projector `A^T A`.
    pub projector: DMatrix<f64>,
    pub rank: usize,
    /// All D eigenvalues of the (optionally centered) second-moment
    /// matrix, non-increasing.
    pub eigenvalues: DVector<f64>,
    /// Mean subtracted before projecting (zero when fitted uncentered).
    pub mean_used: DVector<f64>,
    /// Set when the spectral gap at the cut is numerically zero; the
    /// projection is then non-unique.
    pub degenerate_gap: bool,
}

impl Projection {
    /// Builds a projection from a basis with orthonormal rows (validated).
    pub fn from_basis(basis: DMatrix<f64>, eigenvalues: DVector<f64>, mean: DVector<f64>) -> Result<Self> {
        let d = basis.nrows();
        let big_d = basis.ncols();
        if d == 0 || d >= big_d {
            return Err(invalid(format!("need 1 <= d < D, got d={d}, D={big_d}")));
        }
        let gram = &basis * basis.transpose();
        if (gram - DMatrix::<f64>::identity(d, d)).abs().max() > 1e-10 {
            return Err(invalid("basis rows are not orthonormal"));
        }
        let projector = basis.transpose() * &basis;
        Ok(Projection {
            basis,
            projector,
            rank: d,
            eigenvalues,
            mean_used: mean,
            degenerate_gap: false,
        })
    }

    /// Spectral gap `sigma_d - sigma_{d+1}` at the cut.
    pub fn gap(&self) -> f64 {
        self.eigenvalues[self.rank - 1] - self.eigenvalues[self.rank]
    }

    /// `P (x - mean) + mean`, a point of `R^D` on the fitted plane.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.projector.ncols() {
            return Err(invalid("dimension mismatch in project"));
        }
        let xv = DVector::from_row_slice(x) - &self.mean_used;
        let p = &self.projector * xv + &self.mean_used;
        Ok(p.iter().copied().collect())
    }

    /// `A (x - mean)`, the d-dimensional coordinates.
    pub fn reduce(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.basis.ncols() {
            return Err(invalid("dimension mismatch in reduce"));
        }
        let xv = DVector::from_row_slice(x) - &self.mean_used;
        let r = &self.basis * xv;
        Ok(r.iter().copied().collect())
    }

    /// Applies [`Projection::project`] to every row.
    pub fn project_rows(&self, xs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(xs.nrows(), xs.ncols());
        for i in 0..xs.nrows() {
            let p = self.project(&linalg::row_vec(xs, i))?;
            for j in 0..xs.ncols() {
                out[(i, j)] = p[j];
            }
        }
        Ok(out)
    }

    /// Applies [`Projection::reduce`] to every row.
    pub fn reduce_rows(&self, xs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(xs.nrows(), self.rank);
        for i in 0..xs.nrows() {
            let r = self.reduce(&linalg::row_vec(xs, i))?;
            for j in 0..self.rank {
                out[(i, j)] = r[j];
            }
        }
        Ok(out)
    }
}

/// Fits the rank-`d` PCA projection minimizing the empirical
/// reconstruction error. By default the second-moment matrix is NOT
/// mean-centered (the population model assumes `E[X] = 0`); pass
/// `center = true` to subtract the empirical mean first.
pub fn fit_pca(xs: &DMatrix<f64>, d: usize, center: bool) -> Result<Projection> {
    let n = xs.nrows();
    let big_d = xs.ncols();
    if n == 0 {
        return Err(invalid("empty sample"));
    }
    if d == 0 || d >= big_d {
        return Err(invalid(format!("need 1 <= d < D, got d={d}, D={big_d}")));
    }
    let mean = if center {
        DVector::from_iterator(big_d, (0..big_d).map(|j| xs.column(j).sum() / n as f64))
    } else {
        DVector::zeros(big_d)
    };
    let mut second_moment = DMatrix::zeros(big_d, big_d);
    for i in 0..n {
        let xi = xs.row(i).transpose() - &mean;
        second_moment.ger(1.0 / n as f64, &xi, &xi, 1.0);
    }
    let (values, vectors) = linalg::sym_eigen_desc(&second_moment);
    let basis = DMatrix::from_fn(d, big_d, |r, c| vectors[(c, r)]);
    let mut proj = Projection::from_basis(basis, values, mean)?;
    proj.degenerate_gap = proj.gap() <= 1e-12;
    Ok(proj)
}

/// Mean squared reconstruction error of `xs` under `p`.
pub fn reconstruction_error(p: &Projection, xs: &DMatrix<f64>) -> Result<f64> {
    let n = xs.nrows();
    if n == 0 {
        return Err(invalid("empty evaluation sample"));
    }
    let mut acc = 0.0;
    for i in 0..n {
        let x = linalg::row_vec(xs, i);
        let proj = p.project(&x)?;
        acc += x
            .iter()
            .zip(proj.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
    }
    Ok(acc / n as f64)
}

/// `R(p_hat) - R(p_star)` on the evaluation sample. May be slightly
/// negative on finite samples; non-negative in expectation when
/// `p_star` is the population optimum.
pub fn excess_reconstruction_error(
    p_hat: &Projection,
    p_star: &Projection,
    xs_eval: &DMatrix<f64>,
) -> Result<f64> {
    if p_hat.projector.ncols() != p_star.projector.ncols() || p_hat.rank != p_star.rank {
        return Err(invalid("projections of different shape"));
    }
    Ok(reconstruction_error(p_hat, xs_eval)? - reconstruction_error(p_star, xs_eval)?)
}

/// Operator and Hilbert-Schmidt norms of `P1 - P2`.
pub fn projector_distance(p1: &Projection, p2: &Projection) -> (f64, f64) {
    let diff = &p1.projector - &p2.projector;
    let op = linalg::operator_norm(&diff);
    let hs = diff.norm();
    (op, hs)
}

/// `2 L sqrt(sum_{i > d} sigma_i)`: the structural-error bound for an
/// `L`-Lipschitz regression function under a rank-`d` projection.
pub fn structural_error_bound(lipschitz: f64, eigenvalues: &[f64], d: usize) -> Result<f64> {
    if d >= eigenvalues.len() {
        return Err(invalid("d must be smaller than the number of eigenvalues"));
    }
    let tail: f64 = eigenvalues[d..].iter().map(|&v| v.max(0.0)).sum();
    Ok(2.0 * lipschitz * Float::sqrt(tail))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn planar_sample(n: usize, seed: u64) -> DMatrix<f64> {
        // Data on the 2-plane spanned by the first two coordinates of R^4.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, 4, |_, j| {
            if j < 2 {
                rng.gen_range(-1.0..1.0)
            } else {
                0.0
            }
        })
    }

    #[test]
    fn on_plane_data_reconstructs_exactly() {
        let xs = planar_sample(50, 1);
        let p = fit_pca(&xs, 2, false).unwrap();
        assert!(reconstruction_error(&p, &xs).unwrap() < 1e-24);
        // Invariants of the fitted projector.
        let pp = &p.projector * &p.projector;
        assert!((pp - &p.projector).abs().max() < 1e-10);
        assert!((&p.projector - p.projector.transpose()).abs().max() < 1e-12);
        assert!((p.projector.trace() - 2.0).abs() < 1e-8);
    }

    #[test]
    fn project_reduce_geometry() {
        let xs = planar_sample(40, 2);
        let p = fit_pca(&xs, 2, false).unwrap();
        let x = [0.3, -0.7, 0.0, 0.0];
        let proj = p.project(&x).unwrap();
        for (a, b) in x.iter().zip(proj.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        let ortho = [0.0, 0.0, 0.4, -0.9];
        let proj = p.project(&ortho).unwrap();
        assert!(proj.iter().all(|v| v.abs() < 1e-12));

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let x: alloc::vec::Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let proj = p.project(&x).unwrap();
            let red = p.reduce(&x).unwrap();
            let norm_x: f64 = x.iter().map(|v| v * v).sum();
            let norm_p: f64 = proj.iter().map(|v| v * v).sum();
            let norm_r: f64 = red.iter().map(|v| v * v).sum();
            let resid: f64 = x.iter().zip(proj.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            // |reduce(x)| = |project(x)| and Pythagoras (mean is zero here).
            assert!((norm_p - norm_r).abs() < 1e-12);
            assert!((resid + norm_p - norm_x).abs() < 1e-12);
        }
    }

    #[test]
    fn fitting_data_identity_with_eigen_tail() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let xs = DMatrix::from_fn(60, 5, |_, j| rng.gen_range(-1.0..1.0) * (1.0 + j as f64));
        for d in 1..5 {
            let p = fit_pca(&xs, d, false).unwrap();
            let tail: f64 = (d..5).map(|i| p.eigenvalues[i]).sum();
            let err = reconstruction_error(&p, &xs).unwrap();
            assert!((err - tail).abs() < 1e-8, "d={d}: {err} vs {tail}");
        }
    }

    #[test]
    fn excess_error_zero_for_same_projection() {
        let xs = planar_sample(30, 9);
        let p = fit_pca(&xs, 2, false).unwrap();
        assert_eq!(excess_reconstruction_error(&p, &p, &xs).unwrap(), 0.0);
    }

    #[test]
    fn rotated_basis_excess_error() {
        // Rotating the true top/bottom eigenplane by theta costs
        // (sigma_top - sigma_bottom) sin^2(theta) in expectation; checked
        // against a brute-force average over a large sample.
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 200_000;
        let (s_top, s_bottom) = (2.0f64, 0.5f64);
        let xs = DMatrix::from_fn(n, 2, |_, j| {
            let sd = if j == 0 { Float::sqrt(s_top) } else { Float::sqrt(s_bottom) };
            // Uniform with the requested variance.
            sd * Float::sqrt(3.0) * rng.gen_range(-1.0f64..1.0)
        });
        let theta = 0.3f64;
        let (c, s) = (Float::cos(theta), Float::sin(theta));
        let truth = Projection::from_basis(
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DVector::from_row_slice(&[s_top, s_bottom]),
            DVector::zeros(2),
        )
        .unwrap();
        let rotated = Projection::from_basis(
            DMatrix::from_row_slice(1, 2, &[c, s]),
            DVector::from_row_slice(&[s_top, s_bottom]),
            DVector::zeros(2),
        )
        .unwrap();
        let excess = excess_reconstruction_error(&rotated, &truth, &xs).unwrap();
        let predicted = (s_top - s_bottom) * s * s;
        assert!(
            (excess - predicted).abs() < 0.02,
            "excess {excess} vs predicted {predicted}"
        );
    }

    #[test]
    fn projector_distance_cases() {
        let xs = planar_sample(30, 4);
        let p = fit_pca(&xs, 2, false).unwrap();
        let (op, hs) = projector_distance(&p, &p);
        assert!(op < 1e-12 && hs < 1e-12);

        // Orthogonal ranges of rank d: HS distance sqrt(2d).
        let p1 = Projection::from_basis(
            DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]),
            DVector::zeros(4),
            DVector::zeros(4),
        )
        .unwrap();
        let p2 = Projection::from_basis(
            DMatrix::from_row_slice(2, 4, &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0]),
            DVector::zeros(4),
            DVector::zeros(4),
        )
        .unwrap();
        let (op, hs) = projector_distance(&p1, &p2);
        assert!((hs - 2.0).abs() < 1e-12); // sqrt(2*2)
        assert!(op <= hs + 1e-12);
        assert!((op - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rotation_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let xs = DMatrix::from_fn(80, 3, |_, j| rng.gen_range(-1.0..1.0) * (3.0 - j as f64));
        let theta = 0.7f64;
        let (c, s) = (Float::cos(theta), Float::sin(theta));
        let q = DMatrix::from_row_slice(3, 3, &[c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0]);
        let rotated = &xs * q.transpose();
        let p = fit_pca(&xs, 1, false).unwrap();
        let pr = fit_pca(&rotated, 1, false).unwrap();
        let expected = &q * &p.projector * q.transpose();
        assert!((expected - &pr.projector).abs().max() < 1e-8);
    }

    #[test]
    fn degenerate_gap_flagged() {
        // Isotropic data: sigma_1 == sigma_2 in population; use exactly
        // symmetric points so the empirical spectrum is degenerate too.
        let xs = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0]);
        let p = fit_pca(&xs, 1, false).unwrap();
        assert!(p.degenerate_gap);
    }

    #[test]
    fn structural_error_bound_cases() {
        assert_eq!(structural_error_bound(3.0, &[1.0, 0.5, 0.0, 0.0], 2).unwrap(), 0.0);
        let spectrum = [1.0 / 3.0, 1.0 / 3.0, 1.0 / 30.0, 1.0 / 30.0, 1.0 / 30.0, 1.0 / 30.0,
            1.0 / 30.0, 1.0 / 30.0, 1.0 / 30.0, 1.0 / 30.0];
        let l = Float::sqrt(10.0f64);
        let b = structural_error_bound(l, &spectrum, 2).unwrap();
        assert!((b - 2.0 * l * Float::sqrt(8.0 / 30.0)).abs() < 1e-12);
        assert!((b - 3.2659).abs() < 1e-3);
        let b2 = structural_error_bound(2.0 * l, &spectrum, 2).unwrap();
        assert!((b2 - 2.0 * b).abs() < 1e-12);
    }

    #[test]
    fn centered_fit_uses_empirical_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut xs = DMatrix::from_fn(200, 3, |_, j| if j == 0 { rng.gen_range(-1.0..1.0) } else { 0.0 });
        for i in 0..xs.nrows() {
            xs[(i, 1)] += 5.0; // constant offset off the plane
        }
        let p = fit_pca(&xs, 1, true).unwrap();
        assert!((p.mean_used[1] - 5.0).abs() < 1e-12);
        assert!(reconstruction_error(&p, &xs).unwrap() < 1e-20);
    }
}
