use thiserror::Error;

/// Errors raised while parsing, building or validating a model.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("malformed model file: {0}")]
    Parse(String),
    #[error("model invariant `{invariant}` violated (residual {residual:e})")]
    Validation {
        invariant: &'static str,
        residual: f64,
    },
    #[error("unknown built-in model `{0}`")]
    UnknownModel(String),
    #[error("bad parameters for `{model}`: {reason}")]
    BadParams { model: String, reason: String },
}

impl ModelError {
    pub(crate) fn invalid(invariant: &'static str, residual: f64) -> Self {
        ModelError::Validation {
            invariant,
            residual,
        }
    }

    pub(crate) fn bad_params(model: &str, reason: impl Into<String>) -> Self {
        ModelError::BadParams {
            model: model.to_string(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("metric is degenerate (smallest singular value {0:e})")]
    DegenerateMetric(f64),
    #[error("model is not compatible: foliation residual {residual:e} exceeds {tolerance:e}")]
    NotCompatible { residual: f64, tolerance: f64 },
    #[error("vertical index pair ({0}, {1}) out of range")]
    BadVerticalIndex(usize, usize),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StructureError {
    #[error("structure kind `{found}` cannot be checked as `{expected}`")]
    KindMismatch {
        expected: &'static str,
        found: &'static str,
    },
    #[error("perturbation does not commute with phi (residual {0:e})")]
    NonCommuting(f64),
    #[error("perturbation does not vanish on the vertical distribution (residual {0:e})")]
    VerticalLeak(f64),
    #[error("perturbed Q is singular (smallest singular value {0:e})")]
    SingularQ(f64),
    #[error("phi is not skew-symmetric in the given frame (residual {0:e})")]
    NotSkewInFrame(f64),
    #[error("frame matrix is singular")]
    SingularFrame,
    #[error("p-contact structures need p <= 3, got p = {0}")]
    UnsupportedRank(usize),
    #[error("structure shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("invalid flow configuration: {0}")]
    BadParams(String),
    #[error("horizontal metric became singular at t = {t}")]
    SingularMetric { t: f64 },
    #[error("partial Ricci curvature lost positivity at t = {t} (eigenvalue {eigenvalue:e})")]
    PositivityLost { t: f64, eigenvalue: f64 },
    #[error("partial Ricci operator is not positive definite (eigenvalue {0:e})")]
    NotPositive(f64),
    #[error("closed-form solution has a pole at t = {0} inside the horizon")]
    PoleReached(f64),
    #[error("scalar solution blew up at t = {0}")]
    BlowupDetected(f64),
    #[error("flow did not converge: |Ric - phi id| = {0:e} at the horizon")]
    NotConverged(f64),
    #[error("need at least {needed} tail samples for a rate fit, found {found}")]
    InsufficientSamples { needed: usize, found: usize },
    #[error("limit metric fails r = phi g (residual {0:e})")]
    LimitNotStationary(f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Structure(#[from] StructureError),
}

/// Crate-level error for callers that mix modules.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error(transparent)]
    Flow(#[from] FlowError),
}
