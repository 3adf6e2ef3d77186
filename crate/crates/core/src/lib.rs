//! Linear and nonlinear model-order reduction for advection-diffusion
//! snapshot manifolds.
//!
//! The crate is organised around a two-stage reduction pipeline: an optional
//! pre-processing map (registration, kernel feature map, encoder) followed by
//! a reduction onto a low-dimensional latent space.
//!
//! * [`numkit`] holds the dense linear algebra, interpolation and quadrature
//!   primitives everything else is built on.
//! * [`snapshots`] generates the analytic advection-diffusion manifolds.
//! * [`pod`] is linear PCA/POD via the method of snapshots.
//! * [`kpca`] casts PCA, MDS, Isomap, spectral clustering and LLE as kernel PCA.
//! * [`registration`] fits monotone spatial maps (Legendre or 1D optimal transport).
//! * [`autoencoder`] is a tanh encoder-decoder trained with explicit backprop.
//! * [`latent_regression`] is kernel ridge regression for out-of-sample latents.

// `!(x > 0.0)` is the NaN-rejecting form used throughout input validation;
// index loops mirror the formulas they implement.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod autoencoder;
pub mod error;
pub mod kpca;
pub mod latent_regression;
pub mod numkit;
pub mod pod;
pub mod registration;
pub mod snapshots;

pub use error::{Error, Result};
