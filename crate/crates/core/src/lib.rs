//! Hardy-type nonlocality for `n` parties.
//!
//! * [`hardystate`] builds the unique Hardy state for given local
//!   observables and evaluates its success probability and optimum.
//! * [`behavior`] turns states and measurements into joint distributions.
//! * [`polytope`], [`npa`] and [`variational`] bound the noisy tripartite
//!   success probability from the local, no-signaling, quantum-relaxation and
//!   explicit-quantum sides.
//! * [`selftest`] checks that a state reaching the optimum is the Hardy state
//!   up to local unitaries and junk.

pub mod behavior;
pub mod error;
pub mod hardystate;
pub mod npa;
pub mod numkernel;
pub mod polytope;
pub mod selftest;
pub mod variational;

pub use error::{Error, Result};
