//! Radial kernels, Gram matrices and the quadratic growth condition.
//!
//! All profiles are normalized so that `phi(0) = 1`, i.e. `sup K(x, x) = 1`,
//! and are non-increasing in the radius. Bandwidth enters as `phi(gamma * r)`
//! which keeps the normalization for any `gamma > 0`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use nalgebra::DMatrix;
use num_traits::Float;

use crate::error::{invalid, numerical, Error, Result};
use crate::linalg;

/// The four radial profiles used throughout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// `phi(r) = exp(-r^2)`
    Gaussian,
    /// `phi(r) = max(0, 1-r)^8 (8r + 1)`, twice continuously differentiable
    WendlandC2,
    /// `phi(r) = max(0, 1-r)^6`, continuous
    WendlandC0,
    /// `phi(r) = max(0, 1-r)`; violates the quadratic growth condition
    Triangle,
}

/// Informational smoothness class of a profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smoothness {
    Cinf,
    C2,
    C0,
}

/// A radial kernel `K(x, y) = phi(gamma * |x - y|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialKernel {
    pub profile: Profile,
    pub gamma: f64,
}

/// A symmetric kernel matrix `G[i][j] = K(x_i, x_j)`.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    pub entries: DMatrix<f64>,
    pub jitter_applied: f64,
}

impl Profile {
    pub fn value(&self, r: f64) -> f64 {
        match self {
            Profile::Gaussian => Float::exp(-(r * r)),
            Profile::WendlandC2 => {
                let t = (1.0 - r).max(0.0);
                let t2 = t * t;
                let t4 = t2 * t2;
                t4 * t4 * (8.0 * r + 1.0)
            }
            Profile::WendlandC0 => {
                let t = (1.0 - r).max(0.0);
                let t2 = t * t;
                t2 * t2 * t2
            }
            Profile::Triangle => (1.0 - r).max(0.0),
        }
    }

    /// `phi(0) - phi(r)`, evaluated without the cancellation the naive
    /// difference suffers from at small radii.
    pub fn gap(&self, r: f64) -> f64 {
        match self {
            Profile::Gaussian => -Float::exp_m1(-(r * r)),
            Profile::WendlandC2 => {
                let u = r.min(1.0);
                // 1 - (1-u)^8 (8u+1), expanded.
                u * u
                    * (36.0
                        + u * (-168.0
                            + u * (378.0
                                + u * (-504.0
                                    + u * (420.0 + u * (-216.0 + u * (63.0 - 8.0 * u)))))))
            }
            Profile::WendlandC0 => {
                let u = r.min(1.0);
                // 1 - (1-u)^6, expanded.
                u * (6.0 + u * (-15.0 + u * (20.0 + u * (-15.0 + u * (6.0 - u)))))
            }
            Profile::Triangle => r.min(1.0),
        }
    }

    pub fn smoothness(&self) -> Smoothness {
        match self {
            Profile::Gaussian => Smoothness::Cinf,
            Profile::WendlandC2 => Smoothness::C2,
            Profile::WendlandC0 | Profile::Triangle => Smoothness::C0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Profile::Gaussian => "gaussian",
            Profile::WendlandC2 => "wendland_c2",
            Profile::WendlandC0 => "wendland_c0",
            Profile::Triangle => "triangle",
        }
    }
}

fn euclidean(x1: &[f64], x2: &[f64]) -> f64 {
    let mut s = 0.0;
    for (a, b) in x1.iter().zip(x2.iter()) {
        let d = a - b;
        s += d * d;
    }
    Float::sqrt(s)
}

impl RadialKernel {
    pub fn new(profile: Profile, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(invalid(format!("bandwidth gamma must be positive, got {gamma}")));
        }
        Ok(RadialKernel { profile, gamma })
    }

    pub fn gaussian() -> Self {
        RadialKernel { profile: Profile::Gaussian, gamma: 1.0 }
    }

    pub fn wendland_c2() -> Self {
        RadialKernel { profile: Profile::WendlandC2, gamma: 1.0 }
    }

    pub fn wendland_c0() -> Self {
        RadialKernel { profile: Profile::WendlandC0, gamma: 1.0 }
    }

    pub fn triangle() -> Self {
        RadialKernel { profile: Profile::Triangle, gamma: 1.0 }
    }

    /// Parses a kernel spec string: `"gaussian"`, `"wendland_c2"`,
    /// `"wendland_c0"` or `"triangle"`, with an optional `":gamma=<float>"`
    /// suffix, e.g. `"gaussian:gamma=0.5"`.
    pub fn parse(spec: &str) -> Result<Self> {
        let (name, rest) = match spec.split_once(':') {
            Some((n, r)) => (n, Some(r)),
            None => (spec, None),
        };
        let profile = match name {
            "gaussian" => Profile::Gaussian,
            "wendland_c2" => Profile::WendlandC2,
            "wendland_c0" => Profile::WendlandC0,
            "triangle" => Profile::Triangle,
            other => {
                return Err(invalid(format!(
                    "unknown kernel '{other}'; valid options: gaussian, wendland_c2, wendland_c0, triangle"
                )))
            }
        };
        let gamma = match rest {
            None => 1.0,
            Some(r) => {
                let v = r
                    .strip_prefix("gamma=")
                    .ok_or_else(|| invalid(format!("malformed kernel option '{r}', expected 'gamma=<float>'")))?;
                v.parse::<f64>()
                    .map_err(|_| invalid(format!("cannot parse bandwidth '{v}'")))?
            }
        };
        RadialKernel::new(profile, gamma)
    }

    /// Spec string round-trippable through [`RadialKernel::parse`].
    pub fn spec_string(&self) -> String {
        if self.gamma == 1.0 {
            String::from(self.profile.name())
        } else {
            format!("{}:gamma={}", self.profile.name(), self.gamma)
        }
    }

    /// Profile value at radius `r >= 0` (bandwidth applied).
    pub fn profile_at(&self, r: f64) -> f64 {
        self.profile.value(self.gamma * r)
    }

    /// `K(x1, x2) = phi(gamma |x1 - x2|)`.
    pub fn eval(&self, x1: &[f64], x2: &[f64]) -> Result<f64> {
        if x1.len() != x2.len() {
            return Err(invalid(format!(
                "dimension mismatch: {} vs {}",
                x1.len(),
                x2.len()
            )));
        }
        if !x1.iter().chain(x2.iter()).all(|v| v.is_finite()) {
            return Err(invalid("non-finite coordinate in kernel evaluation"));
        }
        Ok(self.profile_at(euclidean(x1, x2)))
    }

    /// Assembles the Gram matrix for `points` (rows are points).
    pub fn gram(&self, points: &DMatrix<f64>) -> Result<GramMatrix> {
        if points.nrows() == 0 {
            return Err(invalid("empty point set"));
        }
        if !points.iter().all(|v| v.is_finite()) {
            return Err(invalid("non-finite coordinate in point set"));
        }
        let n = points.nrows();
        let rows: Vec<Vec<f64>> = (0..n).map(|i| linalg::row_vec(points, i)).collect();
        let mut entries = DMatrix::zeros(n, n);
        let one = self.profile.value(0.0);
        for i in 0..n {
            entries[(i, i)] = one;
            for j in (i + 1)..n {
                let v = self.profile_at(euclidean(&rows[i], &rows[j]));
                entries[(i, j)] = v;
                entries[(j, i)] = v;
            }
        }
        Ok(GramMatrix { entries, jitter_applied: 0.0 })
    }

    /// Numerical estimate of the smallest feature-map Lipschitz constant:
    /// `sup_r sqrt(2 (phi(0) - phi(gamma r))) / r` over a logarithmic grid
    /// on `(0, r_max]`. For the triangle profile this diverges as the grid
    /// is refined towards 0, documenting that it violates the growth
    /// condition.
    pub fn lipschitz_feature_constant(&self, r_max: f64, grid_size: usize) -> Result<f64> {
        if !(r_max > 0.0) {
            return Err(invalid("r_max must be positive"));
        }
        if grid_size < 2 {
            return Err(invalid("grid_size must be at least 2"));
        }
        // Linear grid r_max * k / grid_size, k = 1..grid_size; refinement
        // extends the grid towards 0, so the estimate is (essentially)
        // non-decreasing under refinement and diverges for profiles with
        // nonzero slope at the origin.
        let mut sup: f64 = 0.0;
        for k in 1..=grid_size {
            let r = r_max * (k as f64) / (grid_size as f64);
            let slope = Float::sqrt(2.0 * self.profile.gap(self.gamma * r).max(0.0)) / r;
            if slope > sup {
                sup = slope;
            }
        }
        Ok(sup)
    }

    /// RKHS distance of the canonical features,
    /// `|| K(x1, .) - K(x2, .) ||_H = sqrt(2 (phi(0) - phi(gamma |x1-x2|)))`.
    pub fn feature_distance(&self, x1: &[f64], x2: &[f64]) -> Result<f64> {
        // eval validates dimensions/finiteness; the distance itself uses
        // the cancellation-free gap.
        self.eval(x1, x2)?;
        let mut s = 0.0;
        for (a, b) in x1.iter().zip(x2.iter()) {
            let d = a - b;
            s += d * d;
        }
        let radicand = 2.0 * self.profile.gap(self.gamma * Float::sqrt(s));
        if radicand < -1e-12 {
            return Err(numerical(format!(
                "negative feature-distance radicand {radicand}: profile not non-increasing?"
            )));
        }
        Ok(Float::sqrt(radicand.max(0.0)))
    }
}

impl GramMatrix {
    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    /// Eigenvalues in non-increasing order; returns an error if an
    /// eigenvalue falls below `-1e-8` (a non-PSD kernel bug), otherwise
    /// clamps small negatives to zero.
    pub fn eigenvalues_clamped(&self) -> Result<Vec<f64>> {
        let (vals, _) = linalg::sym_eigen_desc(&self.entries);
        if vals.min() < -1e-8 {
            return Err(numerical(format!(
                "Gram matrix eigenvalue {} below PSD tolerance",
                vals.min()
            )));
        }
        Ok(vals.iter().map(|&v| v.max(0.0)).collect())
    }
}

impl core::str::FromStr for RadialKernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RadialKernel::parse(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn profiles_normalized_at_zero() {
        for p in [Profile::Gaussian, Profile::WendlandC2, Profile::WendlandC0, Profile::Triangle] {
            assert_eq!(p.value(0.0), 1.0);
        }
    }

    #[test]
    fn eval_examples() {
        let g = RadialKernel::gaussian();
        let x = [0.3, -0.2];
        assert_eq!(g.eval(&x, &x).unwrap(), 1.0);

        let t = RadialKernel::triangle();
        let v = t.eval(&[0.0], &[0.3]).unwrap();
        assert!((v - 0.7).abs() < 1e-15);

        let w = RadialKernel::wendland_c2();
        let v = w.eval(&[0.0], &[0.5]).unwrap();
        assert!((v - 0.01953125).abs() < 1e-15);
    }

    #[test]
    fn eval_rejects_non_finite() {
        let g = RadialKernel::gaussian();
        assert!(matches!(
            g.eval(&[f64::NAN], &[0.0]),
            Err(Error::InvalidArgument(_))
        ));
        assert!(g.eval(&[0.0, 1.0], &[0.0]).is_err());
    }

    #[test]
    fn gram_examples() {
        let g = RadialKernel::gaussian();
        let single = DMatrix::from_row_slice(1, 1, &[0.4]);
        let gm = g.gram(&single).unwrap();
        assert_eq!(gm.entries[(0, 0)], 1.0);

        let dup = DMatrix::from_row_slice(2, 1, &[0.4, 0.4]);
        let gm = g.gram(&dup).unwrap();
        for v in gm.entries.iter() {
            assert_eq!(*v, 1.0);
        }

        let pts = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let gm = g.gram(&pts).unwrap();
        let e1 = Float::exp(-1.0f64);
        assert!((gm.entries[(0, 1)] - e1).abs() < 1e-15);
        assert!((gm.entries[(1, 0)] - e1).abs() < 1e-15);
    }

    #[test]
    fn lipschitz_gaussian_approaches_sqrt2() {
        let g = RadialKernel::gaussian();
        let l = g.lipschitz_feature_constant(3.0, 4000).unwrap();
        let sqrt2 = Float::sqrt(2.0f64);
        assert!(l <= sqrt2 + 1e-9, "{l}");
        assert!(l > sqrt2 - 1e-3, "{l}");
        // Monotone non-decreasing in grid refinement.
        let coarse = g.lipschitz_feature_constant(3.0, 50).unwrap();
        assert!(coarse <= l + 1e-12);
    }

    #[test]
    fn lipschitz_triangle_diverges() {
        let t = RadialKernel::triangle();
        let coarse = t.lipschitz_feature_constant(1.0, 100).unwrap();
        let fine = t.lipschitz_feature_constant(1.0, 100_000).unwrap();
        assert!(fine > coarse);
        // sup sqrt(2 r)/r = sqrt(2 / r_min) blows up as the grid refines.
        assert!(fine > 100.0, "triangle profile should violate the growth condition, got {fine}");
    }

    #[test]
    fn feature_distance_closed_form() {
        let g = RadialKernel::gaussian();
        assert_eq!(g.feature_distance(&[0.2], &[0.2]).unwrap(), 0.0);
        let d = g.feature_distance(&[0.0], &[1.0]).unwrap();
        let expect = Float::sqrt(2.0 * (1.0 - Float::exp(-1.0f64)));
        assert!((d - expect).abs() < 1e-12);
        assert!((expect - 1.124385).abs() < 1e-5);
    }

    #[test]
    fn gap_matches_naive_difference() {
        for p in [Profile::Gaussian, Profile::WendlandC2, Profile::WendlandC0, Profile::Triangle] {
            for k in 0..60 {
                let r = 0.025 * k as f64;
                assert!(
                    (p.gap(r) - (1.0 - p.value(r))).abs() < 1e-16 + 1e-12 * p.gap(r),
                    "{p:?} at r={r}"
                );
            }
        }
    }

    #[test]
    fn parse_specs() {
        let k = RadialKernel::parse("wendland_c0").unwrap();
        assert_eq!(k.profile, Profile::WendlandC0);
        assert_eq!(k.gamma, 1.0);
        let k = RadialKernel::parse("gaussian:gamma=0.5").unwrap();
        assert_eq!(k.gamma, 0.5);
        assert!(RadialKernel::parse("rbf").is_err());
        assert!(RadialKernel::parse("gaussian:gamma=-1").is_err());
        assert!(RadialKernel::parse("gaussian:width=2").is_err());
        let rt = RadialKernel::parse(&k.spec_string()).unwrap();
        assert_eq!(rt, k);
    }

    fn arb_kernel() -> impl Strategy<Value = RadialKernel> {
        (0..3usize, 0.25f64..4.0).prop_map(|(i, gamma)| {
            let profile = [Profile::Gaussian, Profile::WendlandC2, Profile::WendlandC0][i];
            RadialKernel::new(profile, gamma).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn gram_is_psd_at_tolerance(
            kernel in arb_kernel(),
            pts in proptest::collection::vec(proptest::collection::vec(-2.0f64..2.0, 4), 1..40),
        ) {
            let n = pts.len();
            let m = DMatrix::from_fn(n, 4, |i, j| pts[i][j]);
            let gm = kernel.gram(&m).unwrap();
            let eigs = gm.eigenvalues_clamped().unwrap();
            prop_assert!(eigs.iter().all(|&v| v >= 0.0));
        }

        #[test]
        fn feature_distance_polarization(
            kernel in arb_kernel(),
            x1 in proptest::collection::vec(-2.0f64..2.0, 3),
            x2 in proptest::collection::vec(-2.0f64..2.0, 3),
        ) {
            let d = kernel.feature_distance(&x1, &x2).unwrap();
            let rhs = kernel.eval(&x1, &x1).unwrap() - 2.0 * kernel.eval(&x1, &x2).unwrap()
                + kernel.eval(&x2, &x2).unwrap();
            prop_assert!((d * d - rhs).abs() < 1e-12);
        }

        #[test]
        fn gram_rigid_motion_invariance(
            kernel in arb_kernel(),
            pts in proptest::collection::vec(proptest::collection::vec(-2.0f64..2.0, 2), 2..12),
            angle in 0.0f64..6.28,
            shift in proptest::collection::vec(-1.0f64..1.0, 2),
        ) {
            let n = pts.len();
            let m = DMatrix::from_fn(n, 2, |i, j| pts[i][j]);
            let (c, s) = (Float::cos(angle), Float::sin(angle));
            let q = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
            let mut moved = &m * q.transpose();
            for i in 0..n {
                moved[(i, 0)] += shift[0];
                moved[(i, 1)] += shift[1];
            }
            let g1 = kernel.gram(&m).unwrap();
            let g2 = kernel.gram(&moved).unwrap();
            prop_assert!((g1.entries - g2.entries).abs().max() < 1e-12);
        }
    }
}
