//! Active generation and black-box optimization over discrete sequence
//! spaces.
//!
//! The library learns a generative search distribution q(x|phi) over
//! fixed-length token sequences, conditioned on a rare desirable class
//! {x : f(x) > tau}, by repeatedly querying a noisy black box in batched
//! rounds. The core loop scores candidates with either a class-probability
//! estimator or a Gaussian-process probability of improvement, and updates
//! q by score-function (REINFORCE) gradients on the variational lower bound.
//! Baseline strategies sharing the same weighted-gradient machinery are
//! included, along with benchmarks, campaign metrics, and an executable
//! suite of convergence property checks.
//!
//! The crate is `no_std`-compatible (with `alloc`); disable the default
//! `std` feature to drop the standard library. File formats, configuration,
//! and the campaign runner live in the companion CLI crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod blackbox;
pub mod cpe;
mod error;
pub mod genmodel;
pub mod gp;
pub mod math;
pub mod metrics;
mod opt;
pub mod rng;
pub mod seq;
pub mod strategies;
pub mod verification;
pub mod vi;

pub use error::{Error, Result};
