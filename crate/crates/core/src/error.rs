use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("matrix is not orthogonal (max deviation {0:.3e})")]
    NotOrthogonal(f64),
    #[error("frame is not orthonormal (max deviation {0:.3e})")]
    NotOrthonormal(f64),
    #[error("degenerate tangent frame at ({u}, {v}): area element {value:.3e}")]
    Degenerate { u: f64, v: f64, value: f64 },
    #[error("parameter ({u}, {v}) lies outside the patch domain")]
    OutsideDomain { u: f64, v: f64 },
    #[error("edge '{edge}' is not on the boundary of face '{face}'")]
    NotOnBoundary { edge: String, face: String },
    #[error("induced orientation of face '{face}' varies along edge '{edge}'")]
    SignVaries { edge: String, face: String },
    #[error("unknown face '{0}'")]
    UnknownFace(String),
    #[error("duplicate name '{0}'")]
    DuplicateName(String),
    #[error("diffeomorphism rejected: {0}")]
    InvalidDiffeo(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
