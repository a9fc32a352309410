use thiserror::Error;

/// Errors raised by the rotor simulation and calibration routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum RotorError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("Fourier cutoff must be at least {min}, got {got}")]
    CutoffTooSmall { min: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not Hermitian (max asymmetry {asymmetry:.3e})")]
    NotHermitian { asymmetry: f64 },

    #[error("matrix has entries outside the pentadiagonal band (|n - m| = {offset})")]
    OutsideBand { offset: usize },

    #[error("state is not normalized (norm^2 = {norm_sqr})")]
    NotNormalized { norm_sqr: f64 },

    #[error("no clean qubit subspace: gap to third level {gap_rest:.4e} <= {ratio} x qubit splitting {splitting:.4e}")]
    NoQubitSubspace {
        splitting: f64,
        gap_rest: f64,
        ratio: f64,
    },

    #[error("norm drift {drift:.3e} exceeded limit {limit:.1e} at tau = {tau}")]
    NormDrift { drift: f64, limit: f64, tau: f64 },

    #[error("pulse schedule is not cyclic: start deviation {start:.4}, end deviation {end:.4}, tolerance {tol}")]
    NotCyclic { start: f64, end: f64, tol: f64 },

    #[error("phase unwrapping is ambiguous between windows {lo} and {hi} (jump {jump:.3} rad)")]
    PhaseUnwrapAmbiguity { lo: f64, hi: f64, jump: f64 },

    #[error("target population {target} is unreachable on the scanned branch (max {max_reached:.4})")]
    UnreachablePopulation { target: f64, max_reached: f64 },

    #[error("geometry diverges: 2R = {two_r:.3e} m must be smaller than the spacing {ell:.3e} m")]
    DivergentGeometry { two_r: f64, ell: f64 },

    #[error("no entangling interaction: Ising coupling J vanishes")]
    NoCoupling,

    #[error("gate is not diagonal (max off-diagonal magnitude {offdiag:.3e})")]
    NotDiagonal { offdiag: f64 },

    #[error("length mismatch: {what}")]
    LengthMismatch { what: String },
}

impl RotorError {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        RotorError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of the numerics themselves (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            RotorError::NormDrift { .. }
                | RotorError::NoQubitSubspace { .. }
                | RotorError::PhaseUnwrapAmbiguity { .. }
                | RotorError::UnreachablePopulation { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, RotorError>;
