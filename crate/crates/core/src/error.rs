use thiserror::Error;

/// Errors raised while building or analysing a design.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DesignError {
    #[error("population has no strata")]
    EmptyPopulation,

    #[error("stratum {index}: weight {weight} is negative")]
    NegativeWeight { index: usize, weight: String },

    #[error("weights sum to {sum}, expected exactly 1")]
    NotNormalized { sum: String },

    #[error("population has no stratum with positive weight")]
    NoPositiveWeight,

    #[error("stratum {index}: duplicate latent tuple (y1={y1}, y0={y0}, x={x}, u={u})")]
    DuplicateStratum {
        index: usize,
        y1: f64,
        y0: f64,
        x: u32,
        u: u32,
    },

    #[error("stratum {index}: invalid weight {text:?}")]
    InvalidWeight { index: usize, text: String },

    #[error("stratum {index}: potential outcome is not finite")]
    NonFiniteOutcome { index: usize },

    #[error("invalid mechanism: {0}")]
    InvalidMechanism(String),

    #[error("no treatment probability for latents (y1={y1}, y0={y0}, x={x}, u={u})")]
    UnknownLatents { y1: f64, y0: f64, x: u32, u: u32 },

    #[error("covariate level x={0} has zero probability")]
    ZeroMassCovariate(u32),

    #[error("treatment arm w={0} has zero probability")]
    ZeroMassArm(u8),

    #[error("positivity violated: stratum {index} has treatment probability {p}")]
    Positivity { index: usize, p: f64 },

    #[error("shared global draw: {0}")]
    SharedDraw(String),
}
