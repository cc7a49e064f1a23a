//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed file header or container structure.
    #[error("format error: {0}")]
    Format(String),

    /// Structurally valid file whose payload violates the data contract.
    #[error("data error: {0}")]
    Data(String),

    /// Voxel code outside the declared label alphabet.
    #[error("label alphabet error: {0}")]
    Alphabet(String),

    #[error("manifest error: {0}")]
    Manifest(String),

    /// Prediction and ground truth do not share a grid.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Operation requires a nonempty mask; callers route this to the
    /// missing-label penalty policy.
    #[error("empty mask: {0}")]
    EmptyMask(String),

    #[error("phantom spec error: {0}")]
    PhantomSpec(String),

    #[error("penalty policy error: {0}")]
    Policy(String),

    #[error("subset error: {0}")]
    Subset(String),

    #[error("ranking error: {0}")]
    Ranking(String),

    #[error("stability error: {0}")]
    Stability(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("report error: {0}")]
    Report(String),

    /// Internal invariant violation; indicates a bug, never expected data.
    #[error("topology invariant violated: {0}")]
    Topology(String),
}

impl Error {
    /// True for errors caused by operator input rather than internal bugs.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Topology(_) | Error::Ranking(_) | Error::Report(_))
    }
}
