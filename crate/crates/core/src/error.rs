//! Error type shared by every module of the crate.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Every failure mode reported by grid construction, assembly, solving and analysis.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid specification: {0}")]
    InvalidSpec(String),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("conductor and source regions overlap: {0}")]
    DisjointnessViolation(String),
    #[error("degenerate problem: {0}")]
    DegenerateProblem(String),
    #[error("invalid material data: {0}")]
    MaterialError(String),
    #[error("assembly produced an invalid operator: {0}")]
    AssemblyBug(String),
    #[error("problem too large for the requested mode: {0}")]
    SizeLimit(String),
    #[error("windings intersect: {0}")]
    IntersectionViolation(String),
    #[error("source data is inconsistent: {0}")]
    SourceInconsistent(String),
    #[error("formulation used outside its preconditions: {0}")]
    FormulationMisuse(String),
    #[error("Laplacian is singular: {0}")]
    SingularLaplacian(String),
    #[error("gauge does not make the pencil definite: {0}")]
    GaugeInsufficient(String),
    #[error("spanning tree construction failed: {0}")]
    TreeError(String),
    #[error("charge data required: {0}")]
    MissingCharge(String),
    #[error("step matrix is singular: {0}")]
    StepMatrixSingular(String),
    #[error("linear solve failed at step {step}: {message}")]
    SolveError { step: usize, message: String },
    #[error("matrix pencil is singular: {0}")]
    IrregularPencil(String),
    #[error("time step does not resolve the excitation: {0}")]
    ResolutionError(String),
    #[error("linear system is singular: {0}")]
    SingularSystem(String),
    #[error("iterative solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("unknown scene: {0}")]
    SceneNotFound(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable name of the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidSpec(_) => "InvalidSpec",
            Error::IndexOutOfRange(_) => "IndexError",
            Error::DisjointnessViolation(_) => "DisjointnessViolation",
            Error::DegenerateProblem(_) => "DegenerateProblem",
            Error::MaterialError(_) => "MaterialError",
            Error::AssemblyBug(_) => "AssemblyBug",
            Error::SizeLimit(_) => "SizeLimit",
            Error::IntersectionViolation(_) => "IntersectionViolation",
            Error::SourceInconsistent(_) => "SourceInconsistent",
            Error::FormulationMisuse(_) => "FormulationMisuse",
            Error::SingularLaplacian(_) => "SingularLaplacian",
            Error::GaugeInsufficient(_) => "GaugeInsufficient",
            Error::TreeError(_) => "TreeError",
            Error::MissingCharge(_) => "MissingCharge",
            Error::StepMatrixSingular(_) => "StepMatrixSingular",
            Error::SolveError { .. } => "SolveError",
            Error::IrregularPencil(_) => "IrregularPencil",
            Error::ResolutionError(_) => "ResolutionError",
            Error::SingularSystem(_) => "SingularSystem",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::SceneNotFound(_) => "SceneNotFound",
            Error::Parse(_) => "ParseError",
            Error::Io(_) => "IoError",
            Error::Json(_) => "JsonError",
        }
    }

    /// Prefixes the message of message-carrying variants with `context`.
    pub fn context(self, context: &str) -> Self {
        use Error::*;
        let wrap = |m: String| format!("{context}: {m}");
        match self {
            InvalidSpec(m) => InvalidSpec(wrap(m)),
            IndexOutOfRange(m) => IndexOutOfRange(wrap(m)),
            DisjointnessViolation(m) => DisjointnessViolation(wrap(m)),
            DegenerateProblem(m) => DegenerateProblem(wrap(m)),
            MaterialError(m) => MaterialError(wrap(m)),
            AssemblyBug(m) => AssemblyBug(wrap(m)),
            SizeLimit(m) => SizeLimit(wrap(m)),
            IntersectionViolation(m) => IntersectionViolation(wrap(m)),
            SourceInconsistent(m) => SourceInconsistent(wrap(m)),
            FormulationMisuse(m) => FormulationMisuse(wrap(m)),
            SingularLaplacian(m) => SingularLaplacian(wrap(m)),
            GaugeInsufficient(m) => GaugeInsufficient(wrap(m)),
            TreeError(m) => TreeError(wrap(m)),
            MissingCharge(m) => MissingCharge(wrap(m)),
            StepMatrixSingular(m) => StepMatrixSingular(wrap(m)),
            SolveError { step, message } => SolveError { step, message: wrap(message) },
            IrregularPencil(m) => IrregularPencil(wrap(m)),
            ResolutionError(m) => ResolutionError(wrap(m)),
            SingularSystem(m) => SingularSystem(wrap(m)),
            SceneNotFound(m) => SceneNotFound(m),
            Parse(m) => Parse(wrap(m)),
            other => other,
        }
    }
}
