use serde_json::{json, Value};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error in {field}: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Compute(#[from] lrscatter::Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(field: &str, message: impl Into<String>) -> Self {
        CliError::Config {
            field: field.to_string(),
            message: message.into(),
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// 2 infeasible parameters, 3 failed numerics, 4 configuration, 1 i/o.
    pub fn exit_code(&self) -> i32 {
        use lrscatter::Error as E;
        match self {
            CliError::Config { .. } => 4,
            CliError::Io { .. } => 1,
            CliError::Compute(e) => match e {
                E::Infeasible { .. } => 2,
                E::Convergence { .. } | E::Numeric(_) | E::Stiffness { .. } | E::Invariant(_) => 3,
                E::Domain(_) | E::Usage(_) => 4,
            },
        }
    }

    fn kind(&self) -> &'static str {
        use lrscatter::Error as E;
        match self {
            CliError::Config { .. } => "config",
            CliError::Io { .. } => "io",
            CliError::Compute(e) => match e {
                E::Infeasible { .. } => "infeasible",
                E::Convergence { .. } => "convergence",
                E::Numeric(_) => "numeric",
                E::Stiffness { .. } => "stiffness",
                E::Invariant(_) => "invariant",
                E::Domain(_) => "domain",
                E::Usage(_) => "usage",
            },
        }
    }

    /// The one-line JSON error record.
    pub fn record(&self) -> Value {
        let mut rec = json!({
            "error": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        });
        match self {
            CliError::Config { field, .. } => rec["field"] = json!(field),
            CliError::Compute(lrscatter::Error::Infeasible {
                condition,
                lhs,
                rhs,
                ..
            }) => {
                rec["condition"] = json!(condition);
                rec["lhs"] = json!(lhs);
                rec["rhs"] = json!(rhs);
            }
            CliError::Compute(lrscatter::Error::Convergence {
                iterations,
                residuals,
                ..
            }) => {
                rec["iterations"] = json!(iterations);
                rec["residuals"] = json!(residuals);
            }
            _ => {}
        }
        rec
    }
}
