//! Log-augmented Taylor expansions with closed-form remainders, and a set of
//! numerical audits of their PDE and portfolio applications.
//!
//! Module map:
//! - [`expansion`]: tied expansion families, closed-form remainder, analytic derivatives
//! - [`oracles`]: quadrature, finite differences, Crank–Nicolson, Merton/HJB benchmarks
//! - [`fitting`]: profiled least-squares fits of the tied families
//! - [`pde`]: residuals of the two PDEs under the ansatz and reference comparisons
//! - [`portfolio`]: wealth simulation and the ansatz optimal-portfolio formula
//! - [`report`]: experiment runner, config parsing, CSV and manifest output

pub mod error;
pub mod expansion;
pub mod fitting;
pub mod grid;
pub mod oracles;
pub mod par;
pub mod pde;
pub mod portfolio;
pub mod report;
pub mod stats;

pub use error::{Error, Result};
pub use expansion::{
    DerivationConstants, GeneralLogAnsatz, TiedExpansion, TiedLogExpansion1D, TiedLogExpansion2D,
};
pub use grid::Grid1D;
pub use par::Execution;
