//! Beamforming for multi-user, multi-target near-field integrated sensing and
//! communication (ISAC) with extremely large antenna arrays.
//!
//! The crate maximizes the communication sum rate of `K` single-antenna users
//! while keeping the transmit beampattern gain toward `N` targets above a floor,
//! every user above an SINR floor, and the total power inside a budget. The
//! solver lifts the beamformer onto a complex unit sphere, handles the sum of
//! logarithms with a fractional-programming transform, enforces the remaining
//! constraints with an augmented Lagrangian and minimizes it by Riemannian
//! stochastic gradient descent (or steepest descent / conjugate gradient).
//!
//! Module map:
//!
//! - [`model`]: ULA geometry, spherical-wave channels, scenario generation.
//! - [`metrics`]: SINR, sum rate, beampattern gain, power, constraint residuals.
//! - [`manifold`]: the lifted beamformer sphere (lift/extract, projection, retraction).
//! - [`optimizer`]: FP outer loop, ALM middle loop, Riemannian inner loop.
//! - [`oracle`]: finite differences, brute-force metrics, random-search baseline.
//! - [`cli`]: config files, experiments and the `sgalm` command-line driver.

pub mod cli;
pub mod error;
pub mod manifold;
pub mod metrics;
pub mod model;
pub mod optimizer;
pub mod oracle;

pub use error::{Error, Result};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Dense complex matrix (column-major).
pub type CMat = DMatrix<Complex64>;
/// Dense complex column vector.
pub type CVec = DVector<Complex64>;
