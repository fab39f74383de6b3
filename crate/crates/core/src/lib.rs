//! Quasi-Hamiltonian spaces of Stokes data for `GL_n`.
//!
//! The crate is organised bottom-up:
//!
//! * [`linalg`]: complex matrices, first-order jets and numerical rank helpers.
//! * [`lie`]: roots, unipotent patterns, parabolics and direct-span factorization.
//! * [`irregular`]: irregular types, singular directions, Stokes groups, Levi chains.
//! * [`qh`]: charted quasi-Hamiltonian spaces, fusion, reduction and axiom verifiers.
//! * [`morphisms`]: isomonodromy maps, inversion, twists, nesting, Van den Bergh spaces
//!   and the level decomposition.
//! * [`wild`]: Stokes representations of irregular curves, stability, genericity and
//!   dimension counts.
//! * [`braiding`]: admissible deformation paths and transport of Stokes data.
//! * [`io`]: JSON encodings shared with the command-line tool.

pub mod braiding;
pub mod io;
pub mod irregular;
pub mod lie;
pub mod linalg;
pub mod morphisms;
pub mod qh;
pub mod wild;

use thiserror::Error as ThisError;

#[derive(Debug, Clone, PartialEq, ThisError)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("pattern violation: {0}")]
    Pattern(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("refine path: {0}")]
    RefinePath(String),
    #[error("no sample found: {0}")]
    NoSample(String),
}

pub type Result<T> = std::result::Result<T, Error>;
