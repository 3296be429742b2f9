//! Recovering deterministic dynamics from value functions by inverting the
//! Bellman equation.
#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod continuous;
pub mod error;
pub mod gridworld;
pub mod harness;
pub mod inference;
pub mod mdp;
pub mod separability;

pub use error::{Error, Result};
