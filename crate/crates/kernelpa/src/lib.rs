//! Non-parametric behavioral modeling and digital pre-distortion for RF power
//! amplifiers.
//!
//! The crate models a PA's complex baseband response as a sum of univariate
//! amplitude functions, one per memory regressor, estimated by kernel
//! smoothing on an orthogonalized regressor basis:
//!
//! 1. [`regressor`] builds the memory-polynomial-style regressor columns.
//!    A two-pass modified Gram-Schmidt orthogonalizes them and records the
//!    projection table needed to replay the transform on new data.
//! 2. [`kernel`] estimates each per-basis amplitude function on a uniform
//!    grid with a triangular kernel, without assuming any polynomial shape.
//! 3. [`npmodel`] ties these into a fit / predict / analyze / prune workflow,
//!    including a per-basis contribution table (delta-NMSE and delta-ACEPR)
//!    used to discard negligible branches.
//! 4. [`parametric`] extracts a compact odd-order polynomial description
//!    from the smoothed curves, converts it back to the original (physical)
//!    regressor domain, and can also identify it directly by least squares;
//!    FLOP counts let the compact and non-parametric predictors be compared.
//! 5. [`dpd`] learns an inverse model (indirect learning) and applies it as
//!    a digital pre-distorter.
//! 6. [`refpa`] is a built-in synthetic reference amplifier with known
//!    memory-polynomial coefficients, used as ground truth in tests and
//!    experiments.
//!
//! Supporting modules: [`signal`] (band-limited Gaussian excitations, PAPR,
//! clipping, alignment), [`metrics`] (NMSE, Welch PSD, ACEPR), [`io`] (IQ
//! record files with sidecar metadata, plus a CSV alternative), and
//! [`config`] (run-configuration files shared with the CLI).
//!
//! Determinism: every randomized routine takes an explicit seed and uses a
//! counter-based generator, so identical inputs produce identical outputs on
//! every platform; reductions use fixed summation orders.

pub mod config;
pub mod dpd;
pub mod error;
mod fftutil;
pub mod io;
pub mod kernel;
mod linalg;
pub mod metrics;
pub mod npmodel;
pub mod parametric;
pub mod refpa;
pub mod regressor;
pub mod signal;

pub use error::{Error, Result};
pub use signal::ComplexSignal;
