//! Sampling, spectral statistics and Monte Carlo estimators for Wigner-type
//! random symmetric matrices.
//!
//! The crate is `no_std` (with `alloc`). Everything here is a pure function of
//! its inputs; parallel execution and file IO live in the `rmt-lab` crate,
//! which plugs a thread pool in through [`exec::TrialExecutor`].
//!
//! Scale convention: matrices have off-diagonal variance 1, so the spectrum
//! spreads over roughly `[-2√n, 2√n]`. Every location `λ` passed to this crate
//! is on that unnormalized scale.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod eigen;
pub mod ensemble;
pub mod exec;
pub mod linalg;
pub mod math;
pub mod oracles;
pub mod relations;
pub mod rigidity;
pub mod rng;
pub mod smallball;
pub mod spectral;
pub mod stats;

pub use ensemble::{BaseKind, EnsembleError, EnsembleSpec, EntryDistribution, EntryKind, SampledMatrix};
pub use exec::{Serial, TrialExecutor};
pub use spectral::{LocationSet, Spectrum, SpectralError};
