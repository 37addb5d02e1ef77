//! Numerical laboratory for the density of one-dimensional super-Brownian
//! motion.
//!
//! The density `u(t, x)` solves the stochastic heat equation
//!
//! ```text
//! du/dt = (1/2) d^2u/dx^2 + sqrt(u) dW/dtdx,   u(0, .) = 1,
//! ```
//!
//! with space-time white noise `W`, on a periodic domain. This crate provides
//!
//! * [`lattice`]: the shared space-time discretization and the reproducible
//!   counter-based noise streams every stochastic component consumes,
//! * [`heat`]: exact-to-roundoff heat-semigroup and Fourier machinery on the
//!   periodic lattice, including the deterministic time-integrated Plancherel
//!   quadratures,
//! * [`duhamel`]: the deterministic solver for the log-Laplace equation
//!   `dV/dt = (1/2) V'' - (1/2) V^2` and the iterated exponents that govern
//!   multi-time Laplace transforms of the process,
//! * [`sim`]: two independent stochastic backends (finite differences on the
//!   SPDE, and a critical branching particle system) producing samples of `u`
//!   and of integrals `<X_t, f>`,
//! * [`clt`]: the rescaled sheet fields `V_N(t, x) = N^{-1/2} int_0^{xN}
//!   (u(t,z) - 1) dz` and the statistical checks of their Gaussian limit,
//! * [`stats`]: mergeable accumulators, Kolmogorov-Smirnov machinery and the
//!   Monte Carlo estimate type used by every verdict.
//!
//! All numerical kernels are generic over the floating-point scalar through
//! [`Scalar`]; `f64` aliases for the main types live at the crate root.

// `!(x > 0)` deliberately rejects NaN along with the out-of-range values;
// the suggested `x <= 0` would wave NaN through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clt;
pub mod duhamel;
pub mod error;
pub mod heat;
pub mod lattice;
pub mod parallel;
pub mod sim;
pub mod stats;

mod scalar;

pub use error::Error;
pub use scalar::Scalar;

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;

/// Double-precision lattice, the default for experiments.
pub type Lattice64 = lattice::Lattice<f64>;
/// Double-precision sampled function.
pub type Field64 = heat::SampledFunction<f64>;
/// Double-precision spectral context.
pub type Spectral64 = heat::Spectral<f64>;
/// Double-precision log-Laplace solution.
pub type VSolution64 = duhamel::VSolution<f64>;
/// Double-precision density path.
pub type DensityPath64 = sim::DensityPath<f64>;
/// Double-precision sheet sample.
pub type SheetSample64 = clt::SheetSample<f64>;
