//! Simulator and estimation toolkit for tripartite photon-number-correlated
//! light produced by two interlinked parametric interactions in one crystal.
//!
//! The crate covers the full analysis chain:
//!
//! * [`dynamics`] — closed-form mean photon numbers versus couplings and
//!   interaction length, with the conserved `n1 - n2 - n3` built in;
//! * [`statistics`] — the exact three-mode photon-number distribution, its
//!   moments and ideal correlation coefficients;
//! * [`detection`] — binomial-loss detector model: detected moments,
//!   detected correlations and noise-reduction factors;
//! * [`sampling`] — seeded, bit-reproducible Monte Carlo shot generation
//!   under a configurable noise model (temporal modes, stray light, partial
//!   collection, electronic noise);
//! * [`estimators`] — sample statistics with dark-run subtraction and block
//!   bootstrap errors;
//! * [`fitting`] — pump-scan least-squares fits recovering couplings and
//!   efficiencies;
//! * [`scan`] — coupling-grid sweeps tying the pipeline together;
//! * [`io`] — CSV and key-value file formats.

pub mod detection;
pub mod dynamics;
pub mod error;
pub mod estimators;
pub mod fitting;
pub mod io;
pub mod rng;
pub mod sampling;
pub mod scan;
pub mod statistics;

pub use detection::{
    bipartite_nonclassicality_region, detected_correlation, detected_moments, noise_reduction,
    noise_reduction_from_moments, povm_weight, DetectionConfig,
};
pub use dynamics::{
    conservation_defect, mode_means, CouplingConfig, ModeMeans, Regime, CONSERVATION_TOLERANCE,
    DEGENERACY_TOLERANCE,
};
pub use error::{Error, Result};
pub use estimators::{estimate_statistics, EstimateReport};
pub use fitting::{fit_pump_scan, synthesize_scan, FitResult, FitSpec, Param, ScanAxis, ScanData};
pub use sampling::{
    sample_dark_run, sample_run, sample_run_from_couplings, sample_shot, NoiseModel, ShotRecord,
    ShotSet,
};
pub use scan::{run_scan, ScanConfig, ScanRow};
pub use statistics::{
    correlation_coefficient, joint_pmf, marginal_pmf, photon_moments, Grouping, MomentSet,
};
