use thiserror::Error;

/// Failure modes shared by every solver in the crate.
///
/// The variants map one-to-one onto the exit codes of the batch front-end:
/// infeasible parameters, convergence failures and everything else.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A smallness condition required by the contraction framework fails.
    /// `condition` names the inequality, `lhs`/`rhs` are its two sides.
    #[error("infeasible parameters: {condition} violated ({lhs:.6e} > {rhs:.6e}){hint}")]
    Infeasible {
        condition: String,
        lhs: f64,
        rhs: f64,
        hint: String,
    },

    /// An iteration did not reach its tolerance. `residuals` is the history.
    #[error("{what} did not converge after {iterations} iterations (last residual {last:.3e})")]
    Convergence {
        what: String,
        iterations: usize,
        last: f64,
        residuals: Vec<f64>,
    },

    /// Quadrature, root finding or integration broke down.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// The adaptive integrator could not keep the step size above its floor.
    #[error("step size underflow at t = {t:.6e} (h = {h:.3e})")]
    Stiffness { t: f64, h: f64 },

    /// Inputs that are individually valid but do not fit together.
    #[error("usage error: {0}")]
    Usage(String),

    /// A guaranteed invariant failed; indicates a bug or a badly declared field.
    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn infeasible(condition: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Error::Infeasible {
            condition: condition.into(),
            lhs,
            rhs,
            hint: String::new(),
        }
    }

    pub(crate) fn with_hint(self, text: impl Into<String>) -> Self {
        match self {
            Error::Infeasible {
                condition,
                lhs,
                rhs,
                ..
            } => Error::Infeasible {
                condition,
                lhs,
                rhs,
                hint: format!("; {}", text.into()),
            },
            other => other,
        }
    }

    /// True for errors that stem from unmet smallness/threshold conditions.
    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::Infeasible { .. })
    }

    pub fn is_convergence(&self) -> bool {
        matches!(self, Error::Convergence { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
