//! Annealing-schedule design for 3-SAT problem Hamiltonians.
//!
//! The crate is organised bottom-up:
//!
//! - [`sat`]: 3-SAT instances, the clause-projector Hamiltonian, brute-force
//!   oracle, DIMACS/JSON interchange and the clause-information matrix.
//! - [`schedule`]: the Fourier-sine parametrisation of `s(t)` and the
//!   discrete coefficient grid that forms the search space.
//! - [`dynamics`]: exact state-vector evolution under
//!   `H(s) = (1 - s) H_init + s H_final` and spectral diagnostics.
//! - [`mcts`]: UCB tree search over the coefficient tree.
//! - [`qzero`]: policy/value networks guiding a PUCT search, self-play,
//!   pre-training and fine-tuning.
//! - [`sd`]: stochastic-descent baseline.
//! - [`digitizer`]: digitised annealing and QAOA parameter export.

pub mod digitizer;
pub mod dynamics;
pub mod env;
mod error;
pub mod mcts;
pub mod qzero;
pub mod rng;
pub mod sat;
pub mod schedule;
pub mod sd;

pub use env::{Annealer, Objective, Outcome, QueryLedger};
pub use error::{Error, Result};
