use thiserror::Error;

pub type Result<T> = std::result::Result<T, KeaError>;

#[derive(Debug, Error)]
pub enum KeaError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    /// Cholesky pivot (a squared quantity) fell to or below the pivot tolerance.
    #[error("matrix not positive definite: pivot {pivot:e} at row {index}")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    /// A center whose squared power value is too small to be inserted.
    /// `index` refers to the base set of the dataset.
    #[error("near-duplicate center {index}: squared power {p2:e}")]
    NearDuplicateCenter { index: usize, p2: f64 },

    /// Rebuilding after an exchange failed; `added` and `removed` name the swap.
    #[error("singular rebuild after exchanging {removed} for {added}: {source}")]
    SingularExchange {
        added: usize,
        removed: usize,
        #[source]
        source: Box<KeaError>,
    },

    #[error("duplicate index {0} in center list")]
    DuplicateCenter(usize),

    #[error("duplicate base points at rows {first} and {second}")]
    DuplicatePoints { first: usize, second: usize },

    #[error("no eligible candidate left")]
    ExhaustedCandidates,

    #[error("internal consistency: squared power {value:e} at index {index}")]
    InternalConsistency { index: usize, value: f64 },

    #[error("degenerate improvement ratio: numerator {numerator:e} over vanishing denominator")]
    DegenerateRatio { numerator: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl KeaError {
    /// Indices (into the base set or a center list) that the error refers to.
    pub fn indices(&self) -> Vec<usize> {
        match self {
            KeaError::NotPositiveDefinite { index, .. }
            | KeaError::NearDuplicateCenter { index, .. }
            | KeaError::DuplicateCenter(index)
            | KeaError::InternalConsistency { index, .. } => vec![*index],
            KeaError::SingularExchange { added, removed, .. } => vec![*added, *removed],
            KeaError::DuplicatePoints { first, second } => vec![*first, *second],
            _ => Vec::new(),
        }
    }

    /// Variant name, used when reporting errors to users.
    pub fn kind(&self) -> &'static str {
        match self {
            KeaError::InvalidArgument(_) => "InvalidArgument",
            KeaError::InvalidState(_) => "InvalidState",
            KeaError::NotPositiveDefinite { .. } => "NotPositiveDefinite",
            KeaError::NearDuplicateCenter { .. } => "NearDuplicateCenter",
            KeaError::SingularExchange { .. } => "SingularExchange",
            KeaError::DuplicateCenter(_) => "DuplicateCenter",
            KeaError::DuplicatePoints { .. } => "DuplicatePoints",
            KeaError::ExhaustedCandidates => "ExhaustedCandidates",
            KeaError::InternalConsistency { .. } => "InternalConsistency",
            KeaError::DegenerateRatio { .. } => "DegenerateRatio",
            KeaError::Parse(_) => "Parse",
            KeaError::Io(_) => "Io",
            KeaError::Csv(_) => "Csv",
        }
    }

    /// Whether this error stems from the numerics rather than from bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            KeaError::NotPositiveDefinite { .. }
                | KeaError::NearDuplicateCenter { .. }
                | KeaError::SingularExchange { .. }
                | KeaError::ExhaustedCandidates
                | KeaError::InternalConsistency { .. }
                | KeaError::DegenerateRatio { .. }
        )
    }
}
