//! Variance of partial sums S_n = X_1 + ... + X_n of a stationary sequence,
//! computed from its folded spectral measure G on [0, π].
//!
//! The crate evaluates Var(S_n) through the Fejér kernel and through the
//! covariance sum, brackets it with the two-sided G(1/n) bounds, relates its
//! growth to the behaviour of G near 0 for regularly varying rates, and
//! simulates Gaussian paths for Monte Carlo cross-checks.

pub mod asymptotics;
pub mod cli;
pub mod error;
pub mod fejer;
pub mod gallery;
pub mod measure;
mod quadrature;
pub mod simulate;
pub mod special;

pub use error::{Error, Result};
pub use fejer::{fejer_kernel, sandwich, variance_covariance, variance_profile, variance_spectral, BoundsReport};
pub use measure::{Atom, DensityPiece, SpectralMeasure};
