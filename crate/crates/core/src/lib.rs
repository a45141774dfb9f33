//! Numerical laboratory for stochastic heat equations
//! `∂u/∂t = ½Δu + σ(u) Ẇ` driven by Gaussian noise that is white in time
//! and spatially correlated through a (possibly singular) Riesz kernel.
//!
//! The crate covers noise synthesis on a periodic grid ([`noise`]),
//! exponential-Euler integration of the mild form ([`solver`]), the
//! Yamada–Watanabe smoothing functions ([`ywtools`]), regularity and
//! divergence estimators ([`estimators`]), and quadrature checks of the
//! Gaussian kernel estimates used in the uniqueness arguments
//! ([`oracles`]).

pub mod error;
pub mod estimators;
pub mod grid;
pub mod io;
pub mod kernels;
pub mod noise;
pub mod oracles;
pub mod quad;
pub mod rng;
pub mod sigma;
pub mod solver;
pub mod special;
pub mod spectral;
pub mod ywtools;

pub use error::{LabError, Result};
pub use grid::GridSpec;
pub use kernels::{KernelKind, KernelSpec};
pub use rng::RngStream;
pub use sigma::SigmaSpec;

/// Version string embedded in every artifact.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
