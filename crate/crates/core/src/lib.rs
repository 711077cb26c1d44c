//! Spectral-coefficient toolkit for MAP estimation in linear inverse problems
//! with Gaussian priors.
//!
//! Everything lives in the eigenbasis of a positive self-adjoint operator `A`
//! with eigenvalues `α_k`. Elements of the Hilbert space are truncated
//! coefficient vectors, priors are Gaussian product measures `N(0, r²A^{-τ})`,
//! and the noise is a Gaussian or Laplacian product measure with covariance
//! `b²A^{-β}`. The forward operator of the severely ill-posed model problem is
//! `K = e^{-A}`.
//!
//! Modules:
//! - [`spectral`]: eigenvalue laws, powers of `A`, Hilbert-scale norms, `e^{-A}`.
//! - [`measures`]: product measures, shift densities, Hellinger affinities.
//! - [`inference`]: likelihood potentials, the Onsager–Machlup functional, MAP solvers.
//! - [`montecarlo`]: small-ball estimators, MSE oracles and the rate experiment.
//! - [`config`]: serializable experiment configuration and validation.

pub mod config;
pub mod error;
pub mod exec;
pub mod inference;
pub mod measures;
pub mod montecarlo;
pub mod numeric;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};
pub use exec::Execution;
pub use spectral::{CoeffVec, EigenLaw, HilbertScale, SpectralBasis};
