use thiserror::Error;

/// Errors raised by the simulation and analysis kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("atoms {first} and {second} are {separation:e} wavelengths apart; couplings diverge below {min_separation:e}")]
    Singularity {
        first: usize,
        second: usize,
        separation: f64,
        min_separation: f64,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("{n_atoms} atoms exceeds the configured cap of {cap}")]
    TooManyAtoms { n_atoms: usize, cap: usize },

    #[error("step size underflow at t = {t:e} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("invariant violated at t = {t}: {what} = {value:e} exceeds {bound:e}")]
    Invariant {
        t: f64,
        what: &'static str,
        value: f64,
        bound: f64,
    },

    #[error("insufficient samples: {available} usable points in window, need {required}")]
    InsufficientSamples { available: usize, required: usize },

    #[error("window [{start}, {end}] does not overlap the record")]
    EmptyWindow { start: f64, end: f64 },

    #[error("sampler exhausted {attempts} attempts without meeting the separation guard")]
    SamplerExhausted { attempts: usize },

    #[error("{failed} of {total} realizations failed (first: {first})")]
    EnsembleFailure {
        failed: usize,
        total: usize,
        first: String,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
