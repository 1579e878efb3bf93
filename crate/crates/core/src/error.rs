use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// A single violated invariant on an input record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub constraint: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {}", self.field, self.constraint)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {}", join_violations(.0))]
    Invalid(Vec<Violation>),

    #[error("singular point: |1 - S21| = {0:e} is below tolerance")]
    SingularPoint(f64),

    #[error("unphysical result: {0}")]
    Unphysical(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("fit did not converge: {0}")]
    NonConvergence(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unit error for `{key}`: {msg}")]
    Unit { key: String, msg: String },

    #[error("missing key `{0}`")]
    MissingKey(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

impl Error {
    pub fn invalid(field: &str, constraint: &str) -> Self {
        Error::Invalid(vec![Violation {
            field: field.to_string(),
            constraint: constraint.to_string(),
        }])
    }

    /// True for errors caused by bad user input rather than a failed analysis.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Invalid(_)
                | Error::Parse { .. }
                | Error::Unit { .. }
                | Error::MissingKey(_)
                | Error::Io(_)
                | Error::Csv(_)
                | Error::Json(_)
        )
    }
}
