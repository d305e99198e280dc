//! Ensemble Information Filter: sparse-precision data assimilation for
//! ensembles, together with the simulators and metrics used to study it.

pub mod assimilate;
pub mod ensemble;
pub mod error;
pub mod evaluate;
pub mod graph;
pub mod io;
pub mod regress;
pub mod simulators;
pub mod sparse;
pub mod transport;

pub use ensemble::Ensemble;
pub use error::{Error, Result};
