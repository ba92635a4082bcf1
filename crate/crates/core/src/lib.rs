//! Two-step regression: PCA dimensionality reduction followed by kernel
//! ridge regression, together with the quantitative error machinery needed
//! to audit the procedure — Wasserstein-1 stability bounds, PCA
//! reconstruction-error rates and kernel integral-operator spectra.
//!
//! The crate is `no_std` (with `alloc`); all IO, file formats and the
//! experiment harness live in the companion `dimkrr-cli` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod bounds;
pub mod datagen;
pub mod error;
pub mod kernel;
pub mod krr;
pub mod linalg;
pub mod pca;
pub mod spectral;
pub mod transport;

pub use bounds::{EstimatorConstants, StabilityReport};
pub use datagen::{Case, GenConfig, TargetFn};
pub use error::{Error, Result};
pub use kernel::{GramMatrix, Profile, RadialKernel, Smoothness};
pub use krr::{KrrFit, LabeledSample};
pub use pca::Projection;
pub use spectral::DiscreteMeasure;
pub use transport::{CostSpec, LabeledMeasure};
