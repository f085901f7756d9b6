use thiserror::Error;

/// Stage of the asymptotic cascade or full model that produced an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Psi0,
    Phip0,
    W,
    PhinStar,
    Psi2,
    FullPoisson,
    FullElectrons,
    FullHoles,
    FullCoupling,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Stage::Psi0 => "psi0",
            Stage::Phip0 => "phip0",
            Stage::W => "w",
            Stage::PhinStar => "phin_star",
            Stage::Psi2 => "psi2",
            Stage::FullPoisson => "full.poisson",
            Stage::FullElectrons => "full.electrons",
            Stage::FullHoles => "full.holes",
            Stage::FullCoupling => "full.coupling",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field length {got} does not match grid with {expected} cells")]
    FieldMismatch { expected: usize, got: usize },

    #[error("non-positive coefficient {value} at face {face}")]
    NonPositiveCoefficient { face: usize, value: f64 },

    #[error("non-positive argument {value} in {what}")]
    NonPositive { what: &'static str, value: f64 },

    #[error("exponent {0} overflows (|exponent| > 700)")]
    Overflow(f64),

    #[error("singular matrix at pivot {0}")]
    Singular(usize),

    #[error("newton did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("secant iteration on the contact voltage stagnated at |g| = {0:.3e}")]
    SecantStagnation(f64),

    #[error("series order {0} out of range (max {max})", max = crate::series::MAX_ORDER)]
    OrderOutOfRange(usize),

    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

impl Error {
    pub(crate) fn at(self, stage: Stage) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
