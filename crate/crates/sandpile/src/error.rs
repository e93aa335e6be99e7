use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the operation's domain (unknown vertex, unstable
    /// input where a stable one is required, malformed tree, ...).
    #[error("domain error: {0}")]
    Domain(String),
    /// A requested size beyond what the implementation will build.
    #[error("capacity error: {0}")]
    Capacity(String),
    #[error("singular system: {0}")]
    Singular(String),
    /// A verification clause that did not hold.
    #[error("verification failed in clause {clause}: {detail}")]
    Verification {
        clause: &'static str,
        detail: String,
    },
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
