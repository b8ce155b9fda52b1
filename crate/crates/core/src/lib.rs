//! Numerical laboratory for the von Neumann pointer model on product ensembles.
//!
//! A single-particle state `|ψ⟩` and a non-degenerate observable `A` are
//! lifted to an `N`-particle product sample coupled to a one-dimensional
//! pointer through `U = exp(-i λ Q A_tot Δt)` with `Δt = τ / N`. The exact
//! joint evolution is evaluated without ever building a `d^N` state: for a
//! fixed conjugate coordinate `q` the evolution factorizes over particles,
//! and the distribution of the collective eigenvalue is enumerated over
//! occupation vectors.
//!
//! Modules:
//!
//! * [`hilbert`]: states, observables and the mean/uncertainty decomposition
//!   `A|ψ⟩ = Ā|ψ⟩ + ΔA|ψ⊥⟩`.
//! * [`ensemble`]: product samples, the collective observable and the exact
//!   distribution of its eigenvalue.
//! * [`pointer`]: grid wavefunctions for the measuring device.
//! * [`measurement`]: the coupling, orthogonal-branch weight, shifted-pointer
//!   fidelity and post-selection.
//! * [`born`]: probability rules, the macroscopic/microscopic consistency
//!   check and the uniqueness scan.
//! * [`sweeps`]: `N` sweeps and log-log power-law fits.
//! * [`cli`]: the `born-lab` command-line front end.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod born;
pub mod cli;
pub mod ensemble;
mod error;
pub mod hilbert;
pub mod measurement;
pub mod pointer;
pub mod sweeps;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Tolerance for algebraic identities in double precision.
pub const IDENTITY_TOL: f64 = 1e-10;
/// Tolerance on the norm of state vectors.
pub const NORM_TOL: f64 = 1e-12;
