//! Regularized least-squares kernel regression: fitting, prediction,
//! clipping, RKHS norms, effective dimension and cross-validation.

use alloc::format;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::kernel::RadialKernel;
use crate::linalg;

/// Training data with outputs known to lie in `[-M, M]`.
#[derive(Debug, Clone)]
pub struct LabeledSample {
    pub xs: DMatrix<f64>,
    pub ys: DVector<f64>,
    pub output_bound: f64,
}

impl LabeledSample {
    pub fn new(xs: DMatrix<f64>, ys: DVector<f64>, output_bound: f64) -> Result<Self> {
        if xs.nrows() != ys.len() {
            return Err(invalid(format!(
                "{} input rows but {} outputs",
                xs.nrows(),
                ys.len()
            )));
        }
        if !(output_bound > 0.0) {
            return Err(invalid("output bound M must be positive"));
        }
        if let Some(y) = ys.iter().find(|y| y.abs() > output_bound) {
            return Err(invalid(format!(
                "output {y} exceeds declared bound {output_bound}"
            )));
        }
        Ok(LabeledSample { xs, ys, output_bound })
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.len() == 0
    }
}

/// A fitted kernel ridge regressor `f = sum_i c_i K(X_i, .)`.
#[derive(Debug, Clone)]
pub struct KrrFit {
    pub support_points: DMatrix<f64>,
    pub coefficients: DVector<f64>,
    pub lambda: f64,
    pub kernel: RadialKernel,
    pub clip_level: f64,
    pub rkhs_norm_cache: f64,
    pub jitter_applied: f64,
}

/// Solves `(G + n lambda I) c = y` and wraps the representer expansion.
pub fn fit(kernel: RadialKernel, sample: &LabeledSample, lambda: f64) -> Result<KrrFit> {
    if !(lambda > 0.0) {
        return Err(invalid(format!("lambda must be positive, got {lambda}")));
    }
    if sample.is_empty() {
        return Err(invalid("empty training sample"));
    }
    let n = sample.len();
    let gram = kernel.gram(&sample.xs)?;
    let mut a = gram.entries.clone();
    let shift = n as f64 * lambda;
    for i in 0..n {
        a[(i, i)] += shift;
    }
    let solve = linalg::solve_spd(&a, &sample.ys)?;
    let c = solve.solution;
    let norm_sq = c.dot(&(&gram.entries * &c));
    Ok(KrrFit {
        support_points: sample.xs.clone(),
        coefficients: c,
        lambda,
        kernel,
        clip_level: sample.output_bound,
        rkhs_norm_cache: Float::sqrt(norm_sq.max(0.0)),
        jitter_applied: solve.jitter_applied,
    })
}

/// Weighted variant used for finitely supported measures: solves
/// `(W G + lambda I) c = W y` where `W = diag(weights)`. With uniform
/// weights `1/n` this coincides with [`fit`].
pub fn fit_weighted(
    kernel: RadialKernel,
    xs: &DMatrix<f64>,
    ys: &DVector<f64>,
    weights: &DVector<f64>,
    lambda: f64,
    clip_level: f64,
) -> Result<KrrFit> {
    if !(lambda > 0.0) {
        return Err(invalid("lambda must be positive"));
    }
    if xs.nrows() == 0 || xs.nrows() != ys.len() || ys.len() != weights.len() {
        return Err(invalid("inconsistent weighted sample"));
    }
    let gram = kernel.gram(xs)?;
    let n = xs.nrows();
    // Solve the symmetric system (W^{1/2} G W^{1/2} + lambda I) z = W^{1/2} W y,
    // c = W^{1/2} z. Equivalent to (W G + lambda I) c = W y but SPD-friendly,
    // and handles zero weights (those coefficients vanish).
    let sqrt_w = DVector::from_iterator(n, weights.iter().map(|&w| Float::sqrt(w.max(0.0))));
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = sqrt_w[i] * gram.entries[(i, j)] * sqrt_w[j];
        }
        a[(i, i)] += lambda;
    }
    let b = DVector::from_iterator(n, (0..n).map(|i| sqrt_w[i] * ys[i]));
    let solve = linalg::solve_spd(&a, &b)?;
    let c = DVector::from_iterator(n, (0..n).map(|i| sqrt_w[i] * solve.solution[i]));
    let norm_sq = c.dot(&(&gram.entries * &c));
    Ok(KrrFit {
        support_points: xs.clone(),
        coefficients: c,
        lambda,
        kernel,
        clip_level,
        rkhs_norm_cache: Float::sqrt(norm_sq.max(0.0)),
        jitter_applied: solve.jitter_applied,
    })
}

impl KrrFit {
    /// Representer expansion `sum_i c_i K(X_i, x)`.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.support_points.ncols() {
            return Err(invalid(format!(
                "point dimension {} does not match support dimension {}",
                x.len(),
                self.support_points.ncols()
            )));
        }
        let mut acc = 0.0;
        for i in 0..self.support_points.nrows() {
            let xi = linalg::row_vec(&self.support_points, i);
            acc += self.coefficients[i] * self.kernel.eval(&xi, x)?;
        }
        Ok(acc)
    }

    /// Prediction truncated to `[-M, M]`.
    pub fn predict_clipped(&self, x: &[f64]) -> Result<f64> {
        let m = self.clip_level;
        Ok(self.predict(x)?.clamp(-m, m))
    }

    /// `sqrt(c^T G c)`, cached at fit time.
    pub fn rkhs_norm(&self) -> f64 {
        self.rkhs_norm_cache
    }

    pub fn dim(&self) -> usize {
        self.support_points.ncols()
    }
}

/// Effective dimension `N(lambda) = sum_i mu_i / (mu_i + lambda)` where
/// `mu_i` are the eigenvalues of `G/n`, the empirical surrogate of the
/// kernel integral operator.
pub fn effective_dimension(kernel: RadialKernel, xs: &DMatrix<f64>, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(invalid("lambda must be positive"));
    }
    let gram = kernel.gram(xs)?;
    let n = xs.nrows() as f64;
    let eigs = gram.eigenvalues_clamped()?;
    Ok(eigs.iter().map(|&g| (g / n) / (g / n + lambda)).sum())
}

/// Sample-size precondition: `lambda <= c1` and
/// `n >= 64 log^2(6/eta) N(lambda) / lambda`.
pub fn sample_size_check(n: usize, lambda: f64, eta: f64, n_eff: f64, c1: f64) -> bool {
    if !(lambda > 0.0) || !(0.0..1.0).contains(&eta) || eta == 0.0 {
        return false;
    }
    let log_term = Float::ln(6.0 / eta);
    lambda <= c1 && (n as f64) >= 64.0 * log_term * log_term * n_eff / lambda
}

/// One row of the cross-validation table.
#[derive(Debug, Clone, PartialEq)]
pub struct CvRow {
    pub lambda: f64,
    pub fold: usize,
    pub mse: f64,
}

/// Result of a k-fold grid search.
#[derive(Debug, Clone)]
pub struct CvOutcome {
    pub lambda_star: f64,
    pub table: Vec<CvRow>,
}

/// Default regularization grid: 25 log-spaced points in `[1e-6, 1]`.
pub fn default_lambda_grid() -> Vec<f64> {
    log_spaced_grid(1e-6, 1.0, 25)
}

pub fn log_spaced_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (llo, lhi) = (Float::ln(lo), Float::ln(hi));
    (0..count)
        .map(|k| Float::exp(llo + (lhi - llo) * (k as f64) / ((count - 1) as f64)))
        .collect()
}

/// k-fold cross-validation of the regularization parameter. Fold
/// assignment is a seeded shuffle (ChaCha8); the selected `lambda`
/// minimizes the mean held-out squared error of the clipped predictor,
/// ties broken toward larger `lambda`.
pub fn cross_validate(
    kernel: RadialKernel,
    sample: &LabeledSample,
    lambda_grid: &[f64],
    folds: usize,
    seed: u64,
) -> Result<CvOutcome> {
    if folds < 2 {
        return Err(invalid("need at least 2 folds"));
    }
    if lambda_grid.is_empty() {
        return Err(invalid("empty lambda grid"));
    }
    let n = sample.len();
    if n < folds {
        return Err(invalid(format!("{n} samples cannot fill {folds} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let d = sample.xs.ncols();
    let mut table = Vec::with_capacity(lambda_grid.len() * folds);
    let mut mean_err = alloc::vec![0.0f64; lambda_grid.len()];
    for fold in 0..folds {
        let held: Vec<usize> = order
            .iter()
            .copied()
            .skip(fold)
            .step_by(folds)
            .collect();
        let train: Vec<usize> = order
            .iter()
            .copied()
            .filter(|i| !held.contains(i))
            .collect();
        let train_xs = DMatrix::from_fn(train.len(), d, |r, c| sample.xs[(train[r], c)]);
        let train_ys = DVector::from_iterator(train.len(), train.iter().map(|&i| sample.ys[i]));
        let fold_sample = LabeledSample::new(train_xs, train_ys, sample.output_bound)?;

        // One Gram assembly and one eigendecomposition per fold; each
        // lambda then costs only two dense matrix-vector products via
        // (G + n lambda I)^{-1} y = V (D + n lambda)^{-1} V^T y.
        let gram = kernel.gram(&fold_sample.xs)?;
        let (mut evals, evecs) = linalg::sym_eigen_desc(&gram.entries);
        for v in evals.iter_mut() {
            if *v < -1e-8 {
                return Err(crate::error::numerical(alloc::format!(
                    "fold Gram eigenvalue {v} below -1e-8"
                )));
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let vty = evecs.transpose() * &fold_sample.ys;
        let held_rows: Vec<Vec<f64>> = held.iter().map(|&i| linalg::row_vec(&sample.xs, i)).collect();
        let mut cross = DMatrix::zeros(held.len(), train.len());
        for (r, hx) in held_rows.iter().enumerate() {
            for (c, &ti) in train.iter().enumerate() {
                let tx = linalg::row_vec(&sample.xs, ti);
                cross[(r, c)] = kernel.eval(hx, &tx)?;
            }
        }

        for (li, &lambda) in lambda_grid.iter().enumerate() {
            if !(lambda > 0.0) {
                return Err(invalid("lambda grid entries must be positive"));
            }
            let shift = fold_sample.len() as f64 * lambda;
            let scaled = DVector::from_iterator(
                vty.len(),
                vty.iter().zip(evals.iter()).map(|(&b, &d)| b / (d + shift)),
            );
            let c = &evecs * scaled;
            let preds = &cross * &c;
            let m = sample.output_bound;
            let mut err = 0.0;
            for (r, &hi) in held.iter().enumerate() {
                let p = preds[r].clamp(-m, m);
                let delta = p - sample.ys[hi];
                err += delta * delta;
            }
            err /= held.len() as f64;
            mean_err[li] += err / folds as f64;
            table.push(CvRow { lambda, fold, mse: err });
        }
    }

    let mut best = 0usize;
    for li in 1..lambda_grid.len() {
        // `<=` prefers the later (larger) lambda on ties; the grid is
        // expected in ascending order.
        if mean_err[li] <= mean_err[best] {
            best = li;
        }
    }
    Ok(CvOutcome {
        lambda_star: lambda_grid[best],
        table,
    })
}
