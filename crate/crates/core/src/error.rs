use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failures raised by the numerical core.
///
/// Every variant maps to a stable machine-readable code through [`Error::code`],
/// which the command-line front end prints after `ERROR`.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A logarithm argument `x + shift` was not strictly positive.
    #[error("log-domain violation in {context}: argument {argument} must be > 0")]
    Domain { context: &'static str, argument: f64 },

    #[error("expansion point c must be nonzero")]
    ZeroExpansionPoint,

    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("integrand singular near u = {at}: denominator {denominator} below threshold")]
    Singularity { at: f64, denominator: f64 },

    #[error("adaptive quadrature did not converge on [{a}, {b}] within depth {max_depth}")]
    NonConvergence { a: f64, b: f64, max_depth: u32 },

    #[error("solver produced a non-finite value at time step {step}")]
    Unstable { step: usize },

    #[error("objective is not strictly concave (second coefficient {vxx} >= 0)")]
    Concavity { vxx: f64 },

    #[error("degenerate design: {0}")]
    DegenerateDesign(&'static str),

    #[error("degenerate ansatz: a2 = 0 makes V_xx vanish")]
    DegenerateAnsatz,

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(&'static str),

    #[error("evaluation failed at node (x = {x}, t = {t}): {source}")]
    AtNode {
        x: f64,
        t: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::Domain { .. } => "domain",
            Error::ZeroExpansionPoint => "zero-expansion-point",
            Error::InvalidParameter { .. } => "invalid-parameter",
            Error::Singularity { .. } => "singularity",
            Error::NonConvergence { .. } => "non-convergence",
            Error::Unstable { .. } => "unstable",
            Error::Concavity { .. } => "concavity",
            Error::DegenerateDesign(_) => "degenerate-design",
            Error::DegenerateAnsatz => "degenerate-ansatz",
            Error::GridMismatch(_) => "grid-mismatch",
            Error::InvalidGrid(_) => "invalid-grid",
            Error::AtNode { source, .. } => source.code(),
        }
    }

    pub(crate) fn at_node(self, x: f64, t: f64) -> Self {
        Error::AtNode {
            x,
            t,
            source: Box::new(self),
        }
    }
}

pub(crate) fn require_finite(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be finite",
        })
    }
}

pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be finite and > 0",
        })
    }
}
