//! Inefficient-detector model: Bernoulli POVM weights, detected-photon
//! moments, detected correlation coefficients and noise-reduction factors.
//!
//! A detector with quantum efficiency `eta` turns `n` incident photons into a
//! binomially thinned count `m`, so detected moments follow from the photon
//! moments by the usual loss algebra. Uniform-efficiency closed forms are used
//! where they exist; everything else is computed from the detected moment set,
//! which also covers asymmetric efficiencies (the pin-hole chains of a real
//! setup never match exactly).

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::dynamics::ModeMeans;
use crate::error::{Error, Result};
use crate::statistics::{photon_moments, Grouping, MomentSet};

/// Per-arm quantum efficiencies, with an optional single value overriding all
/// three arms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    pub eta_1: f64,
    pub eta_2: f64,
    pub eta_3: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_uniform: Option<f64>,
}

impl DetectionConfig {
    pub fn uniform(eta: f64) -> Result<Self> {
        let cfg = Self {
            eta_1: eta,
            eta_2: eta,
            eta_3: eta,
            eta_uniform: Some(eta),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn per_arm(eta_1: f64, eta_2: f64, eta_3: f64) -> Result<Self> {
        let cfg = Self {
            eta_1,
            eta_2,
            eta_3,
            eta_uniform: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let mut all = vec![
            ("eta_1", self.eta_1),
            ("eta_2", self.eta_2),
            ("eta_3", self.eta_3),
        ];
        if let Some(eta) = self.eta_uniform {
            all.push(("eta_uniform", eta));
        }
        for (name, value) in all {
            if !value.is_finite() || !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "quantum efficiency must lie in [0, 1]",
                });
            }
        }
        Ok(())
    }

    /// Effective per-arm efficiencies after applying the uniform override.
    pub fn etas(&self) -> [f64; 3] {
        match self.eta_uniform {
            Some(eta) => [eta; 3],
            None => [self.eta_1, self.eta_2, self.eta_3],
        }
    }

    /// The common efficiency, if all three arms share one.
    pub fn uniform_eta(&self) -> Option<f64> {
        let [e1, e2, e3] = self.etas();
        (e1 == e2 && e2 == e3).then_some(e1)
    }
}

/// Probability that `n` incident photons yield `m` detected photons:
/// `C(n, m) eta^m (1 - eta)^(n - m)`, zero for `m > n`.
pub fn povm_weight(eta: f64, n: u64, m: u64) -> f64 {
    if m > n {
        return 0.0;
    }
    if eta == 0.0 {
        return if m == 0 { 1.0 } else { 0.0 };
    }
    if eta == 1.0 {
        return if m == n { 1.0 } else { 0.0 };
    }
    let (nf, mf) = (n as f64, m as f64);
    let log_binom = ln_gamma(nf + 1.0) - ln_gamma(mf + 1.0) - ln_gamma(nf - mf + 1.0);
    (log_binom + mf * eta.ln() + (nf - mf) * (1.0 - eta).ln()).exp()
}

/// Moments of the detected photons under binomial loss:
///
/// ```text
/// <m_j>        = eta_j N_j
/// var(m_j)     = eta_j^2 var(n_j) + eta_j (1 - eta_j) N_j
/// cov(m_j,m_k) = eta_j eta_k cov(n_j, n_k)
/// ```
pub fn detected_moments(means: &ModeMeans, det: &DetectionConfig) -> MomentSet {
    let photon = photon_moments(means);
    let eta = det.etas();
    let mean = [
        eta[0] * photon.mean[0],
        eta[1] * photon.mean[1],
        eta[2] * photon.mean[2],
    ];
    let var = [
        eta[0] * eta[0] * photon.var[0] + eta[0] * (1.0 - eta[0]) * photon.mean[0],
        eta[1] * eta[1] * photon.var[1] + eta[1] * (1.0 - eta[1]) * photon.mean[1],
        eta[2] * eta[2] * photon.var[2] + eta[2] * (1.0 - eta[2]) * photon.mean[2],
    ];
    let cov_12 = eta[0] * eta[1] * photon.cov_12;
    let cov_13 = eta[0] * eta[2] * photon.cov_13;
    let cov_23 = eta[1] * eta[2] * photon.cov_23;
    MomentSet {
        mean,
        var,
        cov_12,
        cov_13,
        cov_23,
        gamma_comb: cov_23 - cov_12 - cov_13,
    }
}

fn correlation_from_moments(set: &MomentSet, grouping: Grouping) -> Result<f64> {
    let (cov, var_a, var_b) = match grouping {
        Grouping::Arm1VsSum => (
            set.cov_12 + set.cov_13,
            set.var[0],
            set.var[1] + set.var[2] + 2.0 * set.cov_23,
        ),
        Grouping::Arm1Arm2 => (set.cov_12, set.var[0], set.var[1]),
        Grouping::Arm1Arm3 => (set.cov_13, set.var[0], set.var[2]),
        Grouping::Arm2Arm3 => (set.cov_23, set.var[1], set.var[2]),
    };
    if var_a <= 0.0 || var_b <= 0.0 {
        return Err(Error::UndefinedCorrelation {
            grouping: grouping.key(),
        });
    }
    Ok(cov / (var_a * var_b).sqrt())
}

/// Correlation coefficient between detected photocurrents.
///
/// With uniform efficiency the one-vs-sum coefficient has the closed form
/// `eta (1 + N1) / (1 + eta N1)`; all other cases come from the detected
/// moment set exactly.
pub fn detected_correlation(
    means: &ModeMeans,
    det: &DetectionConfig,
    grouping: Grouping,
) -> Result<f64> {
    if grouping == Grouping::Arm1VsSum {
        if let Some(eta) = det.uniform_eta() {
            if eta == 0.0 || means.n1 == 0.0 {
                return Err(Error::UndefinedCorrelation {
                    grouping: grouping.key(),
                });
            }
            return Ok(eta * (1.0 + means.n1) / (1.0 + eta * means.n1));
        }
    }
    correlation_from_moments(&detected_moments(means, det), grouping)
}

/// Noise reduction factor: variance of the grouping's difference photocurrent
/// over the sum of its mean photocurrents. Values below one certify
/// nonclassical correlations; one is the shot-noise limit.
///
/// With uniform efficiency the tripartite state gives
///
/// ```text
/// R_{1,2+3} = 1 - eta                                  (any mode means)
/// R_{1,k}   = 1 + eta [(N1 - N_k)^2 - 2 N_k] / (N1 + N_k)
/// R_{2,3}   = 1 + eta (N2 - N3)^2 / (N2 + N3)
/// ```
///
/// Asymmetric efficiencies fall back to the variance-of-difference formula
/// over the detected moments.
pub fn noise_reduction(
    means: &ModeMeans,
    det: &DetectionConfig,
    grouping: Grouping,
) -> Result<f64> {
    if let Some(eta) = det.uniform_eta() {
        let ModeMeans { n1, n2, n3 } = *means;
        return match grouping {
            Grouping::Arm1VsSum => {
                if n1 + n2 + n3 <= 0.0 {
                    Err(Error::ZeroMeanPhotocurrent)
                } else {
                    Ok(1.0 - eta)
                }
            }
            Grouping::Arm1Arm2 => {
                if n1 + n2 <= 0.0 {
                    Err(Error::ZeroMeanPhotocurrent)
                } else {
                    Ok(1.0 + eta * ((n1 - n2).powi(2) - 2.0 * n2) / (n1 + n2))
                }
            }
            Grouping::Arm1Arm3 => {
                if n1 + n3 <= 0.0 {
                    Err(Error::ZeroMeanPhotocurrent)
                } else {
                    Ok(1.0 + eta * ((n1 - n3).powi(2) - 2.0 * n3) / (n1 + n3))
                }
            }
            Grouping::Arm2Arm3 => {
                if n2 + n3 <= 0.0 {
                    Err(Error::ZeroMeanPhotocurrent)
                } else {
                    Ok(1.0 + eta * (n2 - n3).powi(2) / (n2 + n3))
                }
            }
        };
    }
    noise_reduction_from_moments(&detected_moments(means, det), grouping)
}

/// Noise reduction straight from a detected moment set.
pub fn noise_reduction_from_moments(set: &MomentSet, grouping: Grouping) -> Result<f64> {
    let denom = set.mean_sum(grouping);
    if denom <= 0.0 {
        return Err(Error::ZeroMeanPhotocurrent);
    }
    Ok(set.difference_variance(grouping) / denom)
}

/// Whether the two mode-1-vs-arm pairings are sub-shot-noise: `R_{1,k} < 1`
/// holds exactly when `n1 < n_k + sqrt(2 n_k)`, independent of the (nonzero)
/// quantum efficiency.
pub fn bipartite_nonclassicality_region(means: &ModeMeans) -> (bool, bool) {
    let threshold = |nk: f64| means.n1 < nk + (2.0 * nk).sqrt();
    (threshold(means.n2), threshold(means.n3))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn means_1_half_half() -> ModeMeans {
        ModeMeans::new(1.0, 0.5, 0.5).unwrap()
    }

    #[test]
    fn povm_weight_examples() {
        assert_eq!(povm_weight(1.0, 5, 5), 1.0);
        assert_relative_eq!(povm_weight(0.28, 1, 0), 0.72, max_relative = 1e-14);
        assert_relative_eq!(povm_weight(0.5, 2, 1), 0.5, max_relative = 1e-13);
        assert_eq!(povm_weight(0.3, 2, 3), 0.0);
        assert_eq!(povm_weight(0.0, 4, 0), 1.0);
    }

    #[test]
    fn povm_rows_sum_to_one() {
        for eta in [0.1, 0.28, 0.9] {
            for n in [0u64, 1, 7, 40] {
                let total: f64 = (0..=n).map(|m| povm_weight(eta, n, m)).sum();
                assert_relative_eq!(total, 1.0, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn perfect_detection_is_identity() {
        let m = means_1_half_half();
        let ideal = photon_moments(&m);
        let detected = detected_moments(&m, &DetectionConfig::uniform(1.0).unwrap());
        assert_eq!(ideal, detected);
    }

    #[test]
    fn detected_moment_closed_form() {
        let m = means_1_half_half();
        let set = detected_moments(&m, &DetectionConfig::uniform(0.28).unwrap());
        assert_relative_eq!(set.mean[0], 0.28, max_relative = 1e-14);
        assert_relative_eq!(set.var[0], 0.3584, max_relative = 1e-12);
        let zeros = detected_moments(
            &ModeMeans::new(0.0, 0.0, 0.0).unwrap(),
            &DetectionConfig::uniform(0.4).unwrap(),
        );
        assert_eq!(zeros.mean, [0.0; 3]);
        assert_eq!(zeros.var, [0.0; 3]);
    }

    #[test]
    fn detected_sum_correlation_closed_form() {
        let m = means_1_half_half();
        let det = DetectionConfig::uniform(0.28).unwrap();
        let eps = detected_correlation(&m, &det, Grouping::Arm1VsSum).unwrap();
        assert_relative_eq!(eps, 0.4375, max_relative = 1e-14);

        // moment route must agree with the closed form
        let from_moments =
            correlation_from_moments(&detected_moments(&m, &det), Grouping::Arm1VsSum).unwrap();
        assert_relative_eq!(eps, from_moments, max_relative = 1e-12);

        let perfect = DetectionConfig::uniform(1.0).unwrap();
        assert_eq!(
            detected_correlation(&m, &perfect, Grouping::Arm1VsSum).unwrap(),
            1.0
        );
    }

    #[test]
    fn noise_reduction_examples() {
        let det = DetectionConfig::uniform(0.28).unwrap();
        let m = means_1_half_half();
        assert_relative_eq!(
            noise_reduction(&m, &det, Grouping::Arm1VsSum).unwrap(),
            0.72,
            max_relative = 1e-14
        );
        // symmetric arms sit exactly at the shot-noise limit
        assert_relative_eq!(
            noise_reduction(&m, &det, Grouping::Arm2Arm3).unwrap(),
            1.0,
            max_relative = 1e-14
        );
        // twin-beam limit
        let twin = ModeMeans::new(1.0, 1.0, 0.0).unwrap();
        assert_relative_eq!(
            noise_reduction(&twin, &det, Grouping::Arm1Arm2).unwrap(),
            0.72,
            max_relative = 1e-14
        );
        let vac = ModeMeans::new(0.0, 0.0, 0.0).unwrap();
        assert!(matches!(
            noise_reduction(&vac, &det, Grouping::Arm1VsSum),
            Err(Error::ZeroMeanPhotocurrent)
        ));
    }

    #[test]
    fn closed_form_and_moment_route_agree() {
        let det = DetectionConfig::uniform(0.31).unwrap();
        for (n2, n3) in [(0.5, 0.5), (2.0, 1.0), (0.25, 4.0)] {
            let m = ModeMeans::new(n2 + n3, n2, n3).unwrap();
            let set = detected_moments(&m, &det);
            for g in Grouping::ALL {
                let closed = noise_reduction(&m, &det, g).unwrap();
                let general = noise_reduction_from_moments(&set, g).unwrap();
                assert_relative_eq!(closed, general, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn asymmetric_efficiencies_use_moment_route() {
        let det = DetectionConfig::per_arm(0.31, 0.28, 0.28).unwrap();
        let m = means_1_half_half();
        let r = noise_reduction(&m, &det, Grouping::Arm1VsSum).unwrap();
        // no longer exactly 1 - eta, but still sub-shot-noise
        assert!(r < 1.0 && r > 0.0);
        let eps = detected_correlation(&m, &det, Grouping::Arm1VsSum).unwrap();
        assert!(eps > 0.0 && eps < 1.0);
    }

    #[test]
    fn nonclassicality_region_examples() {
        let both = ModeMeans::new(1.0, 0.5, 0.5).unwrap();
        assert_eq!(bipartite_nonclassicality_region(&both), (true, true));
        let neither = ModeMeans::new(4.0, 2.0, 2.0).unwrap();
        assert_eq!(bipartite_nonclassicality_region(&neither), (false, false));
        let one_arm = ModeMeans::new(1.0, 1.0, 0.0).unwrap();
        assert_eq!(bipartite_nonclassicality_region(&one_arm), (true, false));
    }

    #[test]
    fn region_flags_match_noise_reduction_sign() {
        let det = DetectionConfig::uniform(0.4).unwrap();
        for (n2, n3) in [(0.5, 0.5), (1.9, 1.9), (0.2, 3.0), (2.5, 0.1), (1.0, 1.5)] {
            let m = ModeMeans::new(n2 + n3, n2, n3).unwrap();
            let (flag_12, flag_13) = bipartite_nonclassicality_region(&m);
            let r_12 = noise_reduction(&m, &det, Grouping::Arm1Arm2).unwrap();
            let r_13 = noise_reduction(&m, &det, Grouping::Arm1Arm3).unwrap();
            assert_eq!(flag_12, r_12 < 1.0, "n2={n2}, n3={n3}");
            assert_eq!(flag_13, r_13 < 1.0, "n2={n2}, n3={n3}");
        }
    }

    #[test]
    fn both_arms_subshot_bounds_sum_arm_energy() {
        // Scanning the conserving mode-means plane: wherever both 1-vs-k
        // pairings are sub-shot-noise, the photons shared by arms 2 and 3
        // stay below 4 (the corner of the region sits at n2 = n3 = 2, where
        // both pairings touch the shot-noise limit from above).
        let mut best = 0.0f64;
        for i in 1..=300 {
            for j in 1..=300 {
                let n2 = i as f64 * 0.02;
                let n3 = j as f64 * 0.02;
                let m = ModeMeans::new(n2 + n3, n2, n3).unwrap();
                let (a, b) = bipartite_nonclassicality_region(&m);
                if a && b {
                    best = best.max(n2 + n3);
                    assert!(n2 + n3 < 4.0, "counterexample at n2={n2}, n3={n3}");
                }
            }
        }
        assert!(best > 3.9, "sweep should approach the corner, got {best}");
    }

    #[test]
    fn rejects_bad_efficiencies() {
        assert!(DetectionConfig::uniform(1.2).is_err());
        assert!(DetectionConfig::per_arm(0.3, -0.1, 0.5).is_err());
        assert!(DetectionConfig::uniform(f64::NAN).is_err());
    }

    proptest! {
        // R_{1,2+3} = 1 - eta independent of the mode means.
        #[test]
        fn sum_noise_reduction_is_one_minus_eta(
            n2 in 1e-3..50.0f64,
            n3 in 1e-3..50.0f64,
            eta in 0.01..1.0f64,
        ) {
            let m = ModeMeans::new(n2 + n3, n2, n3).unwrap();
            let det = DetectionConfig::uniform(eta).unwrap();
            let r = noise_reduction(&m, &det, Grouping::Arm1VsSum).unwrap();
            prop_assert!((r - (1.0 - eta)).abs() <= 1e-10);
            let general = noise_reduction_from_moments(&detected_moments(&m, &det), Grouping::Arm1VsSum).unwrap();
            prop_assert!((general - (1.0 - eta)).abs() <= 1e-9 * (1.0 + n2 + n3));
        }

        // Arms 2 and 3 are always classical.
        #[test]
        fn partial_arms_never_subshot(
            n2 in 0.0..20.0f64,
            n3 in 1e-6..20.0f64,
            eta in 0.01..1.0f64,
        ) {
            let m = ModeMeans::new(n2 + n3, n2, n3).unwrap();
            let det = DetectionConfig::uniform(eta).unwrap();
            let r = noise_reduction(&m, &det, Grouping::Arm2Arm3).unwrap();
            prop_assert!(r >= 1.0 - 1e-12);
        }
    }
}
