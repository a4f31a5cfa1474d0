//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A physical parameter was negative, NaN or infinite where it must not be.
    #[error("invalid parameter {name}: {value} ({reason})")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    /// Closed-form evaluation left the representable range (e.g. sinh overflow
    /// deep in the amplification regime).
    #[error("mean-photon evaluation overflowed for g1_sq={g1_sq}, g2_sq={g2_sq}, z={z}")]
    DynamicsOverflow { g1_sq: f64, g2_sq: f64, z: f64 },

    /// Mode means violate photon-number conservation beyond tolerance.
    #[error("mode means ({n1}, {n2}, {n3}) violate n1 = n2 + n3 (defect {defect:.3e})")]
    ConservationViolated {
        n1: f64,
        n2: f64,
        n3: f64,
        defect: f64,
    },

    /// Mode index outside {1, 2, 3}.
    #[error("mode index {0} out of range (expected 1, 2 or 3)")]
    InvalidModeIndex(usize),

    /// A correlation coefficient was requested for a grouping with vanishing
    /// variance on one side.
    #[error("correlation undefined for grouping {grouping}: zero variance")]
    UndefinedCorrelation { grouping: &'static str },

    /// Noise reduction factor with a vanishing mean-photocurrent denominator.
    #[error("noise reduction undefined: total detected mean is zero")]
    ZeroMeanPhotocurrent,

    /// Estimation was requested on an empty shot set.
    #[error("shot set is empty")]
    EmptyShotSet,

    /// Dark-run subtraction produced a non-positive variance.
    #[error("dark subtraction drove {quantity} to {value:.6e}; dark run is miscalibrated")]
    OverSubtraction { quantity: &'static str, value: f64 },

    /// Signal and dark runs were acquired under different electronic-noise settings.
    #[error("dark run sigma_el {dark:?} does not match signal run sigma_el {signal:?}")]
    DarkMismatch { signal: [f64; 3], dark: [f64; 3] },

    /// The fit specification leaves only a product of parameters identifiable.
    #[error("unidentifiable fit: eta_1, eta_sum and mu_scale cannot all be free (only their products enter the model)")]
    UnidentifiableFit,

    /// The fit specification has no free parameter.
    #[error("fit spec has no free parameters")]
    NoFreeParameters,

    /// Scan data fails its validity requirements.
    #[error("invalid scan data: {0}")]
    InvalidScanData(String),

    /// The optimizer exhausted its iteration cap before reaching tolerance.
    #[error("fit did not converge within {iterations} iterations (best rss {best_rss:.6e})")]
    FitDidNotConverge { iterations: usize, best_rss: f64 },

    /// A scan configuration failed validation.
    #[error("invalid scan config: {0}")]
    InvalidScanConfig(String),

    /// Malformed input file.
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
