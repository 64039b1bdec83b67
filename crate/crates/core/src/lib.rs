//! Simulation and numerical verification toolkit for a multitype contact
//! process with sterile states.
//!
//! The model lives on a d-dimensional torus. Each site is empty, or hosts an
//! individual of type 1 or type 2 that is either fertile or sterile. Fertile
//! individuals of type i give birth onto empty neighboring sites at rate
//! `lambda_i`, the offspring being fertile with probability `p_i` and sterile
//! otherwise; every individual dies at rate 1. Sterile individuals block
//! births but never reproduce.
//!
//! Module map:
//! - [`lattice`]: site states, torus geometry, occupancy summaries, initial
//!   condition literals.
//! - [`stream`]: the per-clock event stream realizing the graphical
//!   representation (arrows and death marks).
//! - [`sim`]: exact event-driven simulators (graphical, aggregated-rate
//!   Gillespie, infinite-birth-rate cascade) and trajectory recording.
//! - [`meanfield`]: mean-field ODE systems, fixed points, spectra, and
//!   phase-plane diagnostics.
//! - [`branching`]: the dominating Galton-Watson process (offspring law,
//!   generating functions, total progeny, tail constants).
//! - [`coupling`]: pathwise coupling of the single-type process with a basic
//!   contact process on the shared graphical representation.
//! - [`percolation`]: oriented site percolation graphs, wet sets,
//!   self-avoiding path counts, and block-argument constants.
//! - [`stats`]: small statistical helpers (intervals, two-sample tests,
//!   least-squares fits).
//! - [`experiments`]: end-to-end experiment drivers backing the CLI
//!   (phase sweeps, decay measurement, block estimates, competition runs,
//!   coupled collections).
//! - [`io`]: flat key=value configs, NDJSON/CSV writers, PGM snapshots.

pub mod branching;
pub mod coupling;
pub mod experiments;
pub mod io;
pub mod lattice;
pub mod meanfield;
pub mod percolation;
pub mod sim;
pub mod stats;
pub mod stream;

/// Errors shared across the toolkit.
///
/// `InvalidInput` covers parameter and configuration problems (CLI exit
/// code 2); `InvariantViolation` covers runtime checks that the dynamics
/// must never trip (CLI exit code 3).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn violation(msg: impl Into<String>) -> Self {
        Error::InvariantViolation(msg.into())
    }

    /// Process exit code for the CLI: 2 for anything wrong with the
    /// inputs (including unreadable or unwritable files), 3 for a tripped
    /// dynamics invariant.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) | Error::Io(_) => 2,
            Error::InvariantViolation(_) => 3,
        }
    }
}
