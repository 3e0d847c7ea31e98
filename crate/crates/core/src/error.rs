use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Errors raised by the core numerics, design, model, and synthesis code.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Operand shapes are incompatible for `op`.
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    /// A matrix was constructed with a buffer whose length is not rows*cols.
    DataLength { rows: usize, cols: usize, len: usize },
    /// A non-finite value appeared where finite values are required.
    NonFinite { context: &'static str },
    /// The Gram matrix B·Bᵀ has pivots below threshold; the listed rows of B
    /// are linear combinations of earlier rows.
    RankDeficient { dependent_rows: Vec<usize> },
    /// A concept index is out of range for a design with `concepts` concepts.
    ConceptOutOfRange {
        sample: Option<String>,
        concept: usize,
        concepts: usize,
    },
    /// A (concept, within-block) pair is outside the latent layout.
    RowIndexOutOfRange {
        concept: usize,
        offset: usize,
        concepts: usize,
        subspace_dim: usize,
    },
    /// Dictionary construction saw the same name twice.
    DuplicateConceptName { name: String },
    /// Dictionary construction saw an empty list or an empty name.
    InvalidDictionary { reason: &'static str },
    /// Realization-set construction failed (no samples, duplicate id, ...).
    InvalidRealizations { reason: &'static str },
    /// Two samples share an identifier.
    DuplicateSampleId { id: String },
    /// A configuration value fails validation.
    InvalidConfig { reason: String },
    /// An encoder operation was requested on a model without an encoder.
    EncoderMissing,
    /// A latent code was built against a different design than the model.
    DesignMismatch {
        model: (usize, usize),
        code: (usize, usize),
    },
    /// Edit precondition: the concept is not in the active set.
    ConceptNotActive { concept: usize },
    /// Edit precondition: the concept is already in the active set.
    ConceptAlreadyActive { concept: usize },
    /// Training produced a non-finite loss or parameter.
    NonFiniteTraining { epoch: usize, step: usize },
    /// A tied parameter sits too close to the activation kink for finite
    /// differences to be meaningful.
    KinkProximity {
        concept: usize,
        offset: usize,
        value: f64,
    },
    /// The realization sampler could not produce admissible concept sets.
    DegenerateSampler { reason: String },
    /// The generator never reached a full-rank membership matrix.
    RankGenerationFailed { attempts: usize },
}

impl core::error::Error for Error {}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ShapeMismatch { op, left, right } => write!(
                f,
                "{op}: incompatible shapes {}x{} and {}x{}",
                left.0, left.1, right.0, right.1
            ),
            Error::DataLength { rows, cols, len } => write!(
                f,
                "matrix data length {len} does not match {rows}x{cols}"
            ),
            Error::NonFinite { context } => {
                write!(f, "non-finite value in {context}")
            }
            Error::RankDeficient { dependent_rows } => {
                write!(f, "rank-deficient system; dependent rows: {dependent_rows:?}")
            }
            Error::ConceptOutOfRange {
                sample,
                concept,
                concepts,
            } => match sample {
                Some(id) => write!(
                    f,
                    "sample '{id}': concept index {concept} out of range (K = {concepts})"
                ),
                None => write!(
                    f,
                    "concept index {concept} out of range (K = {concepts})"
                ),
            },
            Error::RowIndexOutOfRange {
                concept,
                offset,
                concepts,
                subspace_dim,
            } => write!(
                f,
                "latent row (k = {concept}, j = {offset}) out of range for K = {concepts}, d = {subspace_dim}"
            ),
            Error::DuplicateConceptName { name } => {
                write!(f, "duplicate concept name '{name}'")
            }
            Error::InvalidDictionary { reason } => {
                write!(f, "invalid concept dictionary: {reason}")
            }
            Error::InvalidRealizations { reason } => {
                write!(f, "invalid realization set: {reason}")
            }
            Error::DuplicateSampleId { id } => {
                write!(f, "duplicate sample id '{id}'")
            }
            Error::InvalidConfig { reason } => write!(f, "invalid config: {reason}"),
            Error::EncoderMissing => {
                write!(f, "model has no encoder; train with the masked-encoder variant")
            }
            Error::DesignMismatch { model, code } => write!(
                f,
                "design mismatch: model has (d = {}, K = {}), code has (d = {}, K = {})",
                model.0, model.1, code.0, code.1
            ),
            Error::ConceptNotActive { concept } => {
                write!(f, "concept {concept} is not active in this code")
            }
            Error::ConceptAlreadyActive { concept } => {
                write!(f, "concept {concept} is already active in this code")
            }
            Error::NonFiniteTraining { epoch, step } => write!(
                f,
                "non-finite loss or parameter at epoch {epoch}, step {step}"
            ),
            Error::KinkProximity {
                concept,
                offset,
                value,
            } => write!(
                f,
                "tied parameter (j = {offset}, k = {concept}) = {value} is within 10h of the \
                 activation kink; re-initialize the model before gradient checking"
            ),
            Error::DegenerateSampler { reason } => {
                write!(f, "realization sampler stalled: {reason}")
            }
            Error::RankGenerationFailed { attempts } => write!(
                f,
                "membership matrix still rank-deficient after {attempts} attempts; \
                 increase the sample count or concept coverage"
            ),
        }
    }
}
