//! Linearly implicit, high-order structure-preserving time integrators for
//! the regularized long-wave equation on periodic domains.

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod fieldio;
pub mod gmres;
pub mod grid;
pub mod operators;
pub mod problems;
pub mod schemes;
pub mod stages;
pub mod tableau;

pub use error::{Error, Result};
pub use grid::{Field, PeriodicGrid};
pub use operators::{RlwOperator, RlwParams};
pub use schemes::{run, SchemeKind, SchemeOptions, SchemeState};
pub use stages::SolveConfig;
pub use tableau::{gauss_tableau, ButcherTableau};
