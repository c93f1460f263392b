//! Vector-lattice valued integration under pluggable convergences, with
//! kernel operators, Orlicz modulars and a Brownian ensemble built on top.

pub mod convergence;
pub mod error;
pub mod lattice;
pub mod measure;
pub mod modular;
pub mod operators;
pub mod quadrature;
pub mod stochastic;

pub use error::{Error, Result};
pub use lattice::{order_unit_norm, LatticeElement, OSequence, OrderUnit};
