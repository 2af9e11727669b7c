use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{samples} time samples cannot resolve mode cutoff {cutoff} (need more than {})", 2 * cutoff)]
    Aliasing { samples: usize, cutoff: usize },

    #[error("symmetry invariant violated: max imaginary residual {max_imag:e} (relative {relative:e})")]
    SymmetryViolation { max_imag: f64, relative: f64 },

    #[error("no distributional inverse at zero mode for the fractional Laplacian; use s = 3 or s = 5")]
    ZeroModeInverse,

    #[error("resonance: mode {k} has frequency equal to mass {mass}")]
    Resonance { k: i64, mass: f64 },

    #[error("exponent p = {p} outside the admissible range: need {low} < p < {high}")]
    ExponentRange { p: f64, low: f64, high: f64 },

    #[error("not implemented: {0}")]
    NotImplemented(String),

    #[error("not in the positive cone (<V, RV> = {pairing:e}); reseed initial guess")]
    NotPositive { pairing: f64 },

    #[error("test function support violation: {0}")]
    SupportViolation(String),

    #[error("no decay signal in annulus")]
    NoDecaySignal,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("malformed snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}
