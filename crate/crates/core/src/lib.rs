//! Finite-level traces and extensions for self-similar Dirichlet forms.
//!
//! The crate is organized the way the computations build on each other:
//! words and presets, level graphs and energies, cell averages and Besov
//! terms on the trace set, the restriction and extension pipelines,
//! closed-form exponents, and glued fractal fields.

pub mod besov;
pub mod cli;
pub mod energy;
pub mod error;
pub mod exponents;
pub mod field;
pub mod graph;
pub mod geometry;
pub mod presets;
pub mod restriction;
pub mod solver;
pub mod trace;
pub mod whitney;
pub mod word;

pub use error::{Error, Result};

/// Compiled default for the largest word level.
pub const DEFAULT_NMAX: usize = 10;

/// Level cap, overridable through `FRACTRACE_NMAX`.
pub fn level_cap() -> usize {
    std::env::var("FRACTRACE_NMAX")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_NMAX)
}
