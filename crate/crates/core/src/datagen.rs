//! Seeded synthetic data generator: inputs uniform on a thin box
//! `[-1,1]^d x [-eps,eps]^{D-d}` rotated into general position, sinusoidal
//! targets, and closed-form conditional means for the projected problem.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::pca::Projection;

/// Output bound for the generated targets: `|f| <= 1` plus noise in
/// `[-0.1, 0.1]`.
pub const OUTPUT_BOUND: f64 = 1.1;

/// Which joint distribution the labels follow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Case {
    /// `Y = f(P X) + U`: the target depends on the projected input only.
    Case1,
    /// `Y = f(X) + U`: the target sees the full input.
    Case2,
}

/// Target function choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetFn {
    /// `sin(sum_i x_i)` — smooth.
    F1,
    /// `|sin(2 sum_i x_i)|` — continuous but not differentiable.
    F2,
}

/// Configuration of the synthetic generator.
#[derive(Debug, Clone, Copy)]
pub struct GenConfig {
    /// Intrinsic dimension (box half-width 1 coordinates).
    pub d: usize,
    /// Ambient dimension.
    pub big_d: usize,
    /// Half-width of the thin coordinates.
    pub epsilon: f64,
    /// Label model.
    pub case: Case,
    /// Target function.
    pub target_fn: TargetFn,
    /// Half-width of the uniform label noise.
    pub noise_halfwidth: f64,
    /// Seed of the hidden rotation.
    pub rotation_seed: u64,
    /// Seed of the sample streams (inputs on stream 0, noise on stream 1).
    pub sample_seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            d: 2,
            big_d: 10,
            epsilon: 0.1,
            case: Case::Case1,
            target_fn: TargetFn::F1,
            noise_halfwidth: 0.1,
            rotation_seed: 7,
            sample_seed: 0,
        }
    }
}

impl GenConfig {
    fn validate(&self) -> Result<()> {
        if self.d == 0 || self.d >= self.big_d {
            return Err(invalid(format!(
                "need 1 <= d < D, got d = {}, D = {}",
                self.d, self.big_d
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(invalid(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.noise_halfwidth >= 0.0) {
            return Err(invalid(format!(
                "noise half-width must be non-negative, got {}",
                self.noise_halfwidth
            )));
        }
        Ok(())
    }

    fn target(&self, x: &[f64]) -> f64 {
        match self.target_fn {
            TargetFn::F1 => target_f1(x),
            TargetFn::F2 => target_f2(x),
        }
    }
}

/// `sin(sum_i x_i)`.
pub fn target_f1(x: &[f64]) -> f64 {
    x.iter().sum::<f64>().sin()
}

/// `|sin(2 sum_i x_i)|`.
pub fn target_f2(x: &[f64]) -> f64 {
    (2.0 * x.iter().sum::<f64>()).sin().abs()
}

/// Deterministic random rotation: QR of a seeded standard-Gaussian matrix,
/// sign-fixed to a positive R diagonal, then determinant normalized to +1
/// by flipping the last column if needed.
pub fn random_rotation(big_d: usize, seed: u64) -> Result<DMatrix<f64>> {
    if big_d == 0 {
        return Err(invalid("rotation dimension must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Box-Muller standard normals.
    let mut normals = Vec::with_capacity(big_d * big_d + 1);
    while normals.len() < big_d * big_d {
        let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        let r = (-2.0 * u1.ln()).sqrt();
        normals.push(r * (2.0 * PI * u2).cos());
        normals.push(r * (2.0 * PI * u2).sin());
    }
    let g = DMatrix::from_fn(big_d, big_d, |i, j| normals[i * big_d + j]);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..big_d {
        if r[(j, j)] < 0.0 {
            for i in 0..big_d {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    if q.determinant() < 0.0 {
        let last = big_d - 1;
        for i in 0..big_d {
            q[(i, last)] = -q[(i, last)];
        }
    }
    Ok(q)
}

fn box_sample(config: &GenConfig, n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, config.big_d, |_, c| {
        if c < config.d {
            rng.gen_range(-1.0..1.0)
        } else {
            rng.gen_range(-config.epsilon..config.epsilon)
        }
    })
}

/// Draws `n` inputs `X = Q Xtilde` with `Xtilde` uniform on the box
/// `[-1,1]^d x [-eps,eps]^{D-d}` (stream 0 of the sample seed).
pub fn gen_x(config: &GenConfig, n: usize) -> Result<DMatrix<f64>> {
    config.validate()?;
    if n == 0 {
        return Err(invalid("need at least one sample"));
    }
    let q = random_rotation(config.big_d, config.rotation_seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.sample_seed);
    rng.set_stream(0);
    let latent = box_sample(config, n, &mut rng);
    // Rows are points: x^T = xtilde^T Q^T.
    Ok(latent * q.transpose())
}

/// The population-optimal rank-`d` projection for this generator: the
/// projector onto the first `d` rotated coordinates, whose covariance
/// eigenvalues are `1/3` (top `d`) and `eps^2/3` (tail).
pub fn true_projection(config: &GenConfig) -> Result<Projection> {
    config.validate()?;
    let q = random_rotation(config.big_d, config.rotation_seed)?;
    // Basis rows = first d columns of Q, transposed.
    let basis = q.columns(0, config.d).transpose().into_owned();
    let mut eigenvalues = DVector::zeros(config.big_d);
    for i in 0..config.big_d {
        eigenvalues[i] = if i < config.d {
            1.0 / 3.0
        } else {
            config.epsilon * config.epsilon / 3.0
        };
    }
    Projection::from_basis(basis, eigenvalues, DVector::zeros(config.big_d))
}

/// Draws labels for the given inputs: `Y = f(P X) + U` (case 1) or
/// `Y = f(X) + U` (case 2) with `U` i.i.d. uniform on
/// `[-noise_halfwidth, noise_halfwidth]` from an independent stream
/// (stream 1 of the sample seed), so case 1 and case 2 runs share
/// identical inputs and noise.
pub fn gen_y(config: &GenConfig, xs: &DMatrix<f64>, true_p: &Projection) -> Result<DVector<f64>> {
    config.validate()?;
    if xs.ncols() != config.big_d {
        return Err(invalid(format!(
            "inputs have dimension {}, config says {}",
            xs.ncols(),
            config.big_d
        )));
    }
    let n = xs.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(config.sample_seed);
    rng.set_stream(1);
    let mut ys = DVector::zeros(n);
    for i in 0..n {
        let x = crate::linalg::row_vec(xs, i);
        let signal = match config.case {
            Case::Case1 => config.target(&true_p.project(&x)?),
            Case::Case2 => config.target(&x),
        };
        let noise = if config.noise_halfwidth > 0.0 {
            rng.gen_range(-config.noise_halfwidth..config.noise_halfwidth)
        } else {
            0.0
        };
        ys[i] = signal + noise;
    }
    Ok(ys)
}

/// Closed-form evaluator for the projected regression function
/// `E[f(X) | P X]` of case 2, taking reduced coordinates (outputs of
/// `Projection::reduce` under [`true_projection`]).
///
/// Writing `f(x) = g(v^T xtilde)` in rotated coordinates with
/// `v = Q^T 1`, conditioning on the first `d` rotated coordinates leaves
/// `a + S` with `a = sum_{i<=d} v_i xtilde_i` and
/// `S = sum_{i>d} v_i U_i`, `U_i ~ U[-eps, eps]` independent, so
/// `E[cos(t S)] = prod_{i>d} sinc(t v_i eps)`.
///
/// For `f1 = sin`, `E[sin(a + S)] = sin(a) prod sinc(v_i eps)`.
/// For `f2 = |sin(2 .)|` the Fourier expansion
/// `|sin t| = 2/pi - (4/pi) sum_k cos(2kt)/(4k^2 - 1)` gives the exact
/// series `2/pi - (4/pi) sum_k cos(4ka) prod_i sinc(4k v_i eps) / (4k^2-1)`,
/// truncated once the tail bound drops below `1e-12`.
pub struct ConditionalMean {
    config: GenConfig,
    /// `v = Q^T 1`.
    v: DVector<f64>,
}

fn sinc(t: f64) -> f64 {
    if t.abs() < 1e-8 {
        1.0 - t * t / 6.0
    } else {
        t.sin() / t
    }
}

impl ConditionalMean {
    /// Prepares the evaluator for a configuration.
    pub fn new(config: &GenConfig) -> Result<Self> {
        config.validate()?;
        let q = random_rotation(config.big_d, config.rotation_seed)?;
        let ones = DVector::from_element(config.big_d, 1.0);
        let v = q.transpose() * ones;
        Ok(Self {
            config: *config,
            v,
        })
    }

    /// Evaluates `E[f(X) | P X]` at a point given in reduced coordinates.
    pub fn eval(&self, x_reduced: &[f64]) -> Result<f64> {
        let d = self.config.d;
        if x_reduced.len() != d {
            return Err(invalid(format!(
                "expected {} reduced coordinates, got {}",
                d,
                x_reduced.len()
            )));
        }
        let a: f64 = (0..d).map(|i| self.v[i] * x_reduced[i]).sum();
        let eps = self.config.epsilon;
        match self.config.target_fn {
            TargetFn::F1 => {
                let mut damp = 1.0;
                for i in d..self.config.big_d {
                    damp *= sinc(self.v[i] * eps);
                }
                Ok(a.sin() * damp)
            }
            TargetFn::F2 => {
                // E |sin(2a + 2S)|.
                let mut total = 2.0 / PI;
                for k in 1..=100_000u64 {
                    let kf = k as f64;
                    let denom = 4.0 * kf * kf - 1.0;
                    let mut damp = 1.0;
                    for i in d..self.config.big_d {
                        damp *= sinc(4.0 * kf * self.v[i] * eps);
                    }
                    total -= 4.0 / PI * (4.0 * kf * a).cos() * damp / denom;
                    // Remaining tail is at most (4/pi) sum_{j>k} 1/(4j^2-1)
                    // = (2/pi) / (2k+1).
                    if 2.0 / (PI * (2.0 * kf + 1.0)) < 1e-12 {
                        break;
                    }
                }
                Ok(total.clamp(0.0, 1.0))
            }
        }
    }
}

/// One-shot convenience wrapper around [`ConditionalMean`].
pub fn conditional_mean_case2(config: &GenConfig, x_reduced: &[f64]) -> Result<f64> {
    ConditionalMean::new(config)?.eval(x_reduced)
}
