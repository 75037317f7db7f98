//! Reconstruction of the topology of a quantized phase space (the round
//! 2-sphere) from simulated measurement statistics.
//!
//! The crate is organised as a pipeline:
//!
//! 1. [`geometry`] — points, geodesic nets, probe grids, partitions of unity
//!    and the admissibility bookkeeping for the scale parameters.
//! 2. [`quantize`] — spin-level quantization contexts, Toeplitz operators for
//!    general and zonal symbols, the reproducing kernel intensity, and a
//!    binary operator cache.
//! 3. [`registration`] — classical and quantum one-shot and sequential
//!    registration probability tables, posterior updates, and an exact
//!    rational toy model on finite hypergraphs.
//! 4. [`complexes`] — flag, Vietoris–Rips, support-overlap and nerve
//!    complexes built from geometry or from probability tables.
//! 5. [`persistence`] — mod-2 boundary reduction, barcodes, persistent image
//!    ranks, truncated persistence modules, interleaving checks, and a
//!    brute-force homology oracle.
//! 6. [`piecewise`] — operator calculus for piecewise-constant symbols:
//!    Schatten defects, kernel integrals, cap spectra and scaling-exponent
//!    fits.
//! 7. [`pipeline`] — configuration, reports, artifact export and the
//!    end-to-end inference runs driven by the `qtopo` binary.

pub mod complexes;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod persistence;
pub mod piecewise;
pub mod pipeline;
pub mod quadrature;
pub mod quantize;
pub mod registration;
pub mod symbols;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
