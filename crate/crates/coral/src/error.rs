use std::fmt;

use coral_core::Error as CoreError;

/// Failure class; each maps to a fixed process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Config,
    Data,
    Solver,
    Acceptance,
}

impl Category {
    pub fn exit_code(self) -> i32 {
        match self {
            Category::Config => 2,
            Category::Data => 3,
            Category::Solver => 4,
            Category::Acceptance => 5,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Config => "config",
            Category::Data => "data",
            Category::Solver => "solver",
            Category::Acceptance => "acceptance",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Single-line error: `error[category]: path: message`.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("error[{category}]: {path}: {message}")]
pub struct CliError {
    pub category: Category,
    pub path: String,
    pub message: String,
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn new(category: Category, path: impl Into<String>, message: impl fmt::Display) -> Self {
        let message = message.to_string().replace('\n', " ");
        Self {
            category,
            path: path.into(),
            message,
        }
    }

    pub fn config(path: impl Into<String>, message: impl fmt::Display) -> Self {
        Self::new(Category::Config, path, message)
    }

    pub fn data(path: impl Into<String>, message: impl fmt::Display) -> Self {
        Self::new(Category::Data, path, message)
    }

    pub fn solver(path: impl Into<String>, message: impl fmt::Display) -> Self {
        Self::new(Category::Solver, path, message)
    }

    pub fn acceptance(path: impl Into<String>, message: impl fmt::Display) -> Self {
        Self::new(Category::Acceptance, path, message)
    }

    /// Classifies a core error raised while processing `path`.
    pub fn from_core(path: impl Into<String>, e: CoreError) -> Self {
        let category = match e {
            CoreError::DimensionMismatch { .. }
            | CoreError::InvalidModel(_)
            | CoreError::InvalidDistribution(_)
            | CoreError::InvalidPolicy(_)
            | CoreError::InvalidArgument(_)
            | CoreError::EmptyClass(_)
            | CoreError::BoundViolation { .. } => Category::Config,
            CoreError::EmptyDataset | CoreError::Uncovered { .. } => Category::Data,
            CoreError::Domain { .. }
            | CoreError::NonFiniteGradient { .. }
            | CoreError::NonFiniteObjective
            | CoreError::Bracket
            | CoreError::ZeroLikelihood
            | CoreError::Singular => Category::Solver,
        };
        Self::new(category, path, e)
    }

    pub fn exit_code(&self) -> i32 {
        self.category.exit_code()
    }
}
