use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Core(#[from] splatnav_core::Error),

    #[error("scene config: {0}")]
    Config(String),

    #[error("spawn failed: {0}")]
    Spawn(String),

    #[error("no episode running; call reset first")]
    NotStarted,

    #[error("episode has ended; call reset before stepping")]
    EpisodeOver,

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml error: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;
