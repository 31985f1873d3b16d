//! Sparse identification of nonlinear dynamics: data handling, numerical
//! differentiation, candidate libraries, sparse regression, ensembles and
//! reference systems.

pub mod data;
pub mod diff;
pub mod ensemble;
pub mod error;
pub mod integrate;
pub mod library;
pub mod model;
pub mod optimize;
pub mod systems;

pub use error::{Error, Result};
