use thiserror::Error;

#[derive(Debug, Error)]
pub enum KamError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("precondition refused: {0}")]
    Precondition(String),
    #[error("small divisor refused at {tuple}: |det| = {value:e} < threshold {threshold:e}")]
    DivisorRefusal { tuple: String, value: f64, threshold: f64 },
    #[error("Lie series did not converge: term norms {norms:?}")]
    NonConvergence { norms: Vec<f64> },
    #[error("non-real frequency increment {what}: imaginary part {imag:e}")]
    NonRealIncrement { what: String, imag: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("internal consistency error: {0}")]
    Internal(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<KamError>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl KamError {
    /// Innermost error, skipping step wrappers.
    pub fn root(&self) -> &KamError {
        match self {
            KamError::AtStep { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T, E = KamError> = std::result::Result<T, E>;
