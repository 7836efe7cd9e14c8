use thiserror::Error;

/// Errors raised by the library.
///
/// [`Error::is_validation`] separates bad input from numerical trouble;
/// the CLI maps the former to exit code 2 and the latter to 1.
#[derive(Debug, Error)]
pub enum Error {
    #[error("letter {letter} is outside the alphabet {alphabet}")]
    LetterOutside { letter: u8, alphabet: &'static str },
    #[error("words of different levels: {0} and {1}")]
    LevelMismatch(usize, usize),
    #[error("level {level} exceeds the level cap {cap}")]
    LevelCap { level: usize, cap: usize },
    #[error("invalid preset: {0}")]
    InvalidPreset(String),
    #[error("unknown preset '{0}'")]
    UnknownPreset(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("refinement depth {depth} exceeds the available depth {available}")]
    RefineDepth { depth: usize, available: usize },
    #[error("missing renormalization factor for preset '{0}'")]
    MissingRho(String),
    #[error("degenerate carpet bounds for l={l}, n={n}")]
    DegenerateBounds { l: u64, n: u32 },
    #[error("graph is disconnected")]
    Disconnected,
    #[error("infeasible constraints: {0}")]
    Infeasible(String),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("solver did not converge: {0}")]
    NoConvergence(String),
    #[error("inconsistent gluing: {0}")]
    Gluing(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::Infeasible(_) | Error::Singular(_) | Error::NoConvergence(_) | Error::Disconnected
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
