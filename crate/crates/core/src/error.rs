use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("unknown outcome token `{0}`")]
    BadOutcomeToken(String),
    #[error("malformed side vector `{0}`")]
    BadSideVector(String),
    #[error("roster error: {0}")]
    Roster(String),
    #[error("roster parse error: {0}")]
    RosterParse(#[from] toml::de::Error),
    #[error("trace parse error at line {line}: {msg}")]
    TraceParse { line: usize, msg: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
