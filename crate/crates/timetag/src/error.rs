use thiserror::Error;

#[derive(Debug, Error)]
pub enum TimetagError {
    #[error("format error: {0}")]
    Format(String),

    #[error("order error: record {index} at {t_ps} ps precedes {prev_ps} ps beyond the reorder tolerance")]
    Order { index: usize, t_ps: u64, prev_ps: u64 },

    #[error("channel error: record {index} has channel {channel}, expected 0..=2")]
    Channel { index: usize, channel: u64 },

    /// The delayed normalization peak is empty.
    #[error("no normalization: {0}")]
    NoNormalization(&'static str),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, TimetagError>;
