//! Real symmetric eigenvalue problems solved as QUBO optimization.
//!
//! Expansion coefficients of a trial state are written in fixed point with K
//! binary variables each; the functional `aᵀ(H − λ)a` then becomes a QUBO that
//! classical heuristics (or an annealer model) minimize. Scanning the penalty
//! λ and renormalizing the decoded state yields the ground state, and
//! deflation yields excited states.

pub mod driver;
pub mod error;
pub mod experiments;
pub mod hamiltonian;
pub mod hardware_model;
pub mod linalg;
pub mod qubo_map;
pub mod solvers;

pub use error::{Error, Result};
