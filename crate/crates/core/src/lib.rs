//! Classical and quantum Chirikov standard map with a phase-space leak.
//!
//! * [`map`]: single orbits, tangent dynamics, finite-time Lyapunov exponents
//!   and escape through a leak strip.
//! * [`ensemble`]: grid ensembles, FTLE/dwell fields, survival curves and
//!   leak-position scans.
//! * [`quantum`]: the quantized map, the open propagator `Ũ = ΠU` and its
//!   resonances, built on the complex Schur factorization in [`schur`].
//! * [`husimi`]: coherent states, Husimi distributions and Wehrl entropies.
//! * [`io`]: `LCF1` binary matrices, CSV tables and PGM heatmaps.

pub mod ensemble;
pub mod error;
pub mod husimi;
pub mod io;
pub mod map;
pub mod quantum;
pub mod scan;
pub mod schur;
pub mod stats;

pub use error::{Error, Result};
pub use map::{EscapeRecord, Leak, MapParams, PhaseSpacePoint, TangentFrame};
pub use num_complex::Complex64;
