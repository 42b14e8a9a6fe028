use thiserror::Error;

use crate::poly::Var;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("variable `{0}` has no assigned value")]
    MissingAssignment(Var),

    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },

    #[error("degree {degree} in `{var}` is not supported (atom: {atom})")]
    UnsupportedDegree { var: Var, degree: u32, atom: String },

    #[error("unsupported formula shape: {0}")]
    UnsupportedShape(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("coefficient map is missing generic coefficient `{0}`")]
    IncompleteCoeffMap(Var),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("block cache: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("while deciding {context}: {source}")]
    In {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn is_resource(&self) -> bool {
        match self {
            Error::Resource(_) => true,
            Error::In { source, .. } => source.is_resource(),
            _ => false,
        }
    }

    /// Wraps `self` with the name of the sentence being decided.
    pub fn context(self, context: impl Into<String>) -> Error {
        Error::In { context: context.into(), source: Box::new(self) }
    }
}
