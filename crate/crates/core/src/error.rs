use thiserror::Error;

/// Errors raised by the geometric, dynamical and variational layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point is not on the surface (|F| = {residual:e})")]
    OffSurface { residual: f64 },

    #[error("degenerate surface point: gradient vanishes")]
    DegeneratePoint,

    #[error("direction points outward (<z, n> = {normal_component:e})")]
    OutwardDirection { normal_component: f64 },

    #[error("near-tangent ray (sin phi = {sin_phi:e})")]
    NearTangentRay { sin_phi: f64 },

    #[error("tangent incidence cannot be reflected (normal component {normal_component:e})")]
    TangentIncidence { normal_component: f64 },

    #[error("degenerate chord of length {length:e}")]
    DegenerateChord { length: f64 },

    #[error("not a billiard orbit at vertex {index}: reflection defect {defect:e}")]
    NotAnOrbit { index: usize, defect: f64 },

    #[error("twist condition fails on chord {index}: smallest singular value {sigma:e}")]
    TwistFailure { index: usize, sigma: f64 },

    #[error("no conjugate point in the search interval")]
    NotFound,

    #[error("conjugate point not certified: |lambda| = {eigenvalue:e}, max Jacobi residual = {residual:e}")]
    Uncertified { eigenvalue: f64, residual: f64 },

    #[error("bounce {index}: {source}")]
    AtBounce {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: String, reason: String },
}

impl Error {
    pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn at_bounce(self, index: usize) -> Self {
        Error::AtBounce {
            index,
            source: Box::new(self),
        }
    }

    /// Index of the failing bounce, if the error was raised along an orbit.
    pub fn bounce_index(&self) -> Option<usize> {
        match self {
            Error::AtBounce { index, .. } => Some(*index),
            Error::TwistFailure { index, .. } => Some(*index),
            Error::NotAnOrbit { index, .. } => Some(*index),
            _ => None,
        }
    }

    /// The innermost error, with bounce wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtBounce { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
