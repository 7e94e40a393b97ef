use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid trap parameters: {0}")]
    InvalidParams(String),

    #[error("ion index {ion} out of range 1..={n_ions}")]
    IonOutOfRange { ion: usize, n_ions: usize },

    #[error("Fock level {n} out of range 0..={n_max}")]
    FockOutOfRange { n: usize, n_max: usize },

    #[error("Jaynes-Cummings pulse on n = {target_n} couples to n = {} which exceeds the cutoff {n_max}", target_n + 1)]
    SidebandPastCutoff { target_n: usize, n_max: usize },

    #[error("dispersive pulse requires n >= 1 (its Rabi frequency vanishes at n = 0)")]
    DispersiveAtGround,

    #[error("{what} Rabi frequency is not positive ({value})")]
    ZeroRabi { what: &'static str, value: f64 },

    #[error("negative duration {0}")]
    NegativeTime(f64),

    #[error("state dimension or frame mismatch: {0}")]
    Mismatch(String),

    #[error("dense matrix of dimension {dim} exceeds the limit {limit}")]
    DimensionTooLarge { dim: usize, limit: usize },

    #[error("population {population:e} reached the Fock cutoff n = {n_max}")]
    Leakage { n_max: usize, population: f64 },

    #[error("detuning grid is empty")]
    EmptyGrid,

    #[error("{line}:{column}: {source}")]
    AtStep {
        line: usize,
        column: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
