use alloc::string::String;

pub type CoreResult<T> = Result<T, CoreError>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CoreError {
    /// A state entered the simulator with NaN or infinite entries.
    #[error("non-finite state component at index {index}")]
    NonFiniteState { index: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("replay buffer holds {have} records, {need} requested")]
    BufferUndersized { have: usize, need: usize },
    #[error("network `{0}` has non-finite parameters")]
    NonFiniteParameters(&'static str),
    #[error("enumeration of {count} plans exceeds the guard of {guard}")]
    EnumerationGuard { count: u64, guard: u64 },
}

impl CoreError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        CoreError::Config(msg.into())
    }
}
