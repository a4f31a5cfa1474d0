//! Couplings and closed-form mean-photon dynamics of the two interlinked
//! parametric interactions (a downconversion link feeding mode pairs 1/3 and an
//! upconversion link exchanging photons between modes 3 and 2).
//!
//! Starting from vacuum the interaction conserves `n1 - n2 - n3`, so every set
//! of mean photon numbers produced here satisfies `N1 = N2 + N3` exactly.
//!
//! The evolution parameter is exposed as a length `z`; for temporal evolution
//! read `z` as `t` (the two are interchangeable once the coupling units absorb
//! the propagation speed).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative width of the band around `g1_sq == g2_sq` treated as degenerate.
///
/// Below this separation the oscillatory/hyperbolic closed forms evaluate
/// `(cos(w z) - 1)^2 / w^4` with catastrophic cancellation, so the series
/// limit is used instead. At 1e-7 the discarded higher-order series terms are
/// O(1e-8) relative while direct evaluation still carries ~8 good digits, so
/// both branches agree well inside the switchover.
pub const DEGENERACY_TOLERANCE: f64 = 1e-7;

/// Relative tolerance on the conservation defect `|n1 - n2 - n3|` accepted by
/// consumers of [`ModeMeans`].
pub const CONSERVATION_TOLERANCE: f64 = 1e-9;

/// Dynamical regime of the interlinked interactions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// `g2_sq > g1_sq`: bounded, periodic photon exchange.
    Oscillatory,
    /// `g1_sq > g2_sq`: hyperbolic amplification.
    Exponential,
    /// `|g2_sq - g1_sq|` below [`DEGENERACY_TOLERANCE`]: series limit.
    Degenerate,
}

/// Squared coupling strengths of the two interactions plus evolution length.
///
/// `g1_sq` drives the downconversion link (seeds photons into modes 1 and 3
/// from vacuum), `g2_sq` the upconversion link (converts mode-3 photons into
/// mode-2 photons). Units are m^-2 for the couplings and m for `z`; only the
/// products `g * z` matter, so any consistent rescaling of units is allowed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingConfig {
    pub g1_sq: f64,
    pub g2_sq: f64,
    pub z: f64,
}

impl CouplingConfig {
    pub fn new(g1_sq: f64, g2_sq: f64, z: f64) -> Result<Self> {
        let cfg = Self { g1_sq, g2_sq, z };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("g1_sq", self.g1_sq),
            ("g2_sq", self.g2_sq),
            ("z", self.z),
        ] {
            if !value.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be finite",
                });
            }
            if value < 0.0 {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be non-negative",
                });
            }
        }
        Ok(())
    }

    /// Classify the dynamical regime. Total over all valid inputs.
    pub fn regime(&self) -> Regime {
        let scale = self.g1_sq.max(self.g2_sq).max(1.0);
        if (self.g2_sq - self.g1_sq).abs() <= DEGENERACY_TOLERANCE * scale {
            Regime::Degenerate
        } else if self.g2_sq > self.g1_sq {
            Regime::Oscillatory
        } else {
            Regime::Exponential
        }
    }

    /// `sqrt(|g2_sq - g1_sq|)`, the oscillation (or growth) rate.
    pub fn rate(&self) -> f64 {
        (self.g2_sq - self.g1_sq).abs().sqrt()
    }
}

/// Mean photon numbers per temporal mode in the three signal modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeMeans {
    pub n1: f64,
    pub n2: f64,
    pub n3: f64,
}

impl ModeMeans {
    pub fn new(n1: f64, n2: f64, n3: f64) -> Result<Self> {
        for (name, value) in [("n1", n1), ("n2", n2), ("n3", n3)] {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "mean photon number must be finite and non-negative",
                });
            }
        }
        Ok(Self { n1, n2, n3 })
    }

    /// Total mean photon number `n1 + n2 + n3`.
    pub fn total(&self) -> f64 {
        self.n1 + self.n2 + self.n3
    }

    /// Photon fractions `n_j / total`, or `None` for the vacuum.
    pub fn fractions(&self) -> Option<[f64; 3]> {
        let total = self.total();
        (total > 0.0).then(|| [self.n1 / total, self.n2 / total, self.n3 / total])
    }

    /// `|n1 - n2 - n3|`, the violation of the conserved quantity.
    pub fn conservation_defect(&self) -> f64 {
        (self.n1 - self.n2 - self.n3).abs()
    }

    /// Whether the conservation defect is within [`CONSERVATION_TOLERANCE`].
    pub fn is_conserving(&self) -> bool {
        self.conservation_defect() <= CONSERVATION_TOLERANCE * (1.0 + self.n1)
    }

    pub fn get(&self, mode: usize) -> Result<f64> {
        match mode {
            1 => Ok(self.n1),
            2 => Ok(self.n2),
            3 => Ok(self.n3),
            other => Err(Error::InvalidModeIndex(other)),
        }
    }
}

/// Mean photon numbers evolved from vacuum.
///
/// Oscillatory regime (`w^2 = g2_sq - g1_sq`):
///
/// ```text
/// N3 = g1_sq sin^2(w z) / w^2
/// N2 = g1_sq g2_sq (cos(w z) - 1)^2 / w^4
/// N1 = N2 + N3
/// ```
///
/// The exponential regime is the analytic continuation `sin -> sinh`,
/// `cos -> cosh` with `w^2 = g1_sq - g2_sq`; the degenerate regime uses the
/// `w -> 0` series limit `N3 = g1_sq z^2`, `N2 = g1_sq g2_sq z^4 / 4`.
pub fn mode_means(config: &CouplingConfig) -> Result<ModeMeans> {
    config.validate()?;
    let CouplingConfig { g1_sq, g2_sq, z } = *config;

    let (n2, n3) = match config.regime() {
        Regime::Oscillatory => {
            let omega = config.rate();
            let phase = omega * z;
            let sin_term = phase.sin() / omega;
            let cos_term = (phase.cos() - 1.0) / (omega * omega);
            (g1_sq * g2_sq * cos_term * cos_term, g1_sq * sin_term * sin_term)
        }
        Regime::Exponential => {
            let theta = config.rate();
            let phase = theta * z;
            let sinh_term = phase.sinh() / theta;
            let cosh_term = (phase.cosh() - 1.0) / (theta * theta);
            (g1_sq * g2_sq * cosh_term * cosh_term, g1_sq * sinh_term * sinh_term)
        }
        Regime::Degenerate => {
            let z2 = z * z;
            (g1_sq * g2_sq * z2 * z2 / 4.0, g1_sq * z2)
        }
    };

    if !n2.is_finite() || !n3.is_finite() {
        return Err(Error::DynamicsOverflow { g1_sq, g2_sq, z });
    }
    ModeMeans::new(n2 + n3, n2, n3)
}

/// `|n1 - n2 - n3|` for arbitrary mode means.
pub fn conservation_defect(means: &ModeMeans) -> f64 {
    means.conservation_defect()
}
