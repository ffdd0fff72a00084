//! Koopman-operator analysis of numerical algorithms.
//!
//! Iterative algorithms (gradient descent, Nesterov, Newton-Raphson, forward
//! Euler) are discrete dynamical systems. This crate approximates their
//! Koopman operator from snapshot data and uses the approximation for
//! surrogate prediction, basin decomposition, extraction of an underlying
//! continuous vector field, and spectral-measure estimation on the unit
//! circle for chaotic dynamics.
//!
//! The pipeline is: simulate a system from [`systems`], collect snapshot
//! pairs, build an observable dictionary from [`dictionary`], fit a
//! [`edmd::KoopmanModel`], then hand the model to [`generator`],
//! [`analysis`], or use its predictions directly. [`spectral`] and
//! [`newton`] operate on scalar trajectories instead of fitted models.

pub mod analysis;
pub mod dictionary;
pub mod edmd;
mod error;
pub mod generator;
pub mod ioformats;
pub mod newton;
pub mod numerics;
pub(crate) mod par;
pub mod spectral;
pub mod systems;

pub use error::{Error, Result};

/// A point in an algorithm's state space. Complex-valued states are stored
/// as interleaved (re, im) pairs, doubling the dimension.
pub type StateVector = ndarray::Array1<f64>;
