//! Exact single-temporal-mode photon-number statistics of the tripartite
//! state: joint PMF, marginals, second moments and ideal correlation
//! coefficients.
//!
//! The joint distribution is
//!
//! ```text
//! P(n, p, r) = delta(n, p + r) N2^p N3^r (p + r)! / (p! r!) / (1 + N1)^(1 + p + r)
//! ```
//!
//! which factorizes as a thermal distribution with mean `N1` on mode 1 times a
//! binomial split of each mode-1 photon into modes 2/3 with probability
//! `N2 / N1`. The factorization is what the shot sampler exploits.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::dynamics::ModeMeans;
use crate::error::{Error, Result};

/// Pair (or one-vs-sum) grouping for correlation and noise-reduction figures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Grouping {
    /// Mode 1 against the summed photocurrent of modes 2 and 3.
    Arm1VsSum,
    /// Modes 1 and 2.
    Arm1Arm2,
    /// Modes 1 and 3.
    Arm1Arm3,
    /// Modes 2 and 3.
    Arm2Arm3,
}

impl Grouping {
    pub const ALL: [Grouping; 4] = [
        Grouping::Arm1VsSum,
        Grouping::Arm1Arm2,
        Grouping::Arm1Arm3,
        Grouping::Arm2Arm3,
    ];

    /// Stable identifier used in file formats and CLI output.
    pub fn key(&self) -> &'static str {
        match self {
            Grouping::Arm1VsSum => "1_23",
            Grouping::Arm1Arm2 => "12",
            Grouping::Arm1Arm3 => "13",
            Grouping::Arm2Arm3 => "23",
        }
    }
}

impl std::fmt::Display for Grouping {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.key())
    }
}

/// First and second photon-number moments of the three modes.
///
/// `gamma_comb` is the combination `cov_23 - cov_12 - cov_13` entering the
/// three-arm noise reduction factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    pub mean: [f64; 3],
    pub var: [f64; 3],
    pub cov_12: f64,
    pub cov_13: f64,
    pub cov_23: f64,
    pub gamma_comb: f64,
}

impl MomentSet {
    pub fn cov(&self, a: usize, b: usize) -> f64 {
        match (a.min(b), a.max(b)) {
            (1, 2) => self.cov_12,
            (1, 3) => self.cov_13,
            (2, 3) => self.cov_23,
            (j, k) if j == k => self.var[j - 1],
            _ => f64::NAN,
        }
    }

    /// Variance of the difference photocurrent for a grouping.
    pub fn difference_variance(&self, grouping: Grouping) -> f64 {
        match grouping {
            Grouping::Arm1VsSum => {
                self.var.iter().sum::<f64>() + 2.0 * self.gamma_comb
            }
            Grouping::Arm1Arm2 => self.var[0] + self.var[1] - 2.0 * self.cov_12,
            Grouping::Arm1Arm3 => self.var[0] + self.var[2] - 2.0 * self.cov_13,
            Grouping::Arm2Arm3 => self.var[1] + self.var[2] - 2.0 * self.cov_23,
        }
    }

    /// Sum of the mean photocurrents entering the grouping's denominator.
    pub fn mean_sum(&self, grouping: Grouping) -> f64 {
        match grouping {
            Grouping::Arm1VsSum => self.mean.iter().sum(),
            Grouping::Arm1Arm2 => self.mean[0] + self.mean[1],
            Grouping::Arm1Arm3 => self.mean[0] + self.mean[2],
            Grouping::Arm2Arm3 => self.mean[1] + self.mean[2],
        }
    }
}

fn require_conserving(means: &ModeMeans) -> Result<()> {
    if means.is_conserving() {
        Ok(())
    } else {
        Err(Error::ConservationViolated {
            n1: means.n1,
            n2: means.n2,
            n3: means.n3,
            defect: means.conservation_defect(),
        })
    }
}

/// `x ln y` with the `0 ln 0 = 0` convention.
fn xlny(x: f64, y: f64) -> Option<f64> {
    if x == 0.0 {
        Some(0.0)
    } else if y == 0.0 {
        None // log of zero with a positive weight: the term vanishes
    } else {
        Some(x * y.ln())
    }
}

/// Joint probability of counting `n`, `p`, `r` photons in modes 1, 2, 3.
///
/// Evaluated in log space so large occupations stay finite.
pub fn joint_pmf(means: &ModeMeans, n: u64, p: u64, r: u64) -> Result<f64> {
    require_conserving(means)?;
    if n != p + r {
        return Ok(0.0);
    }
    let (pf, rf) = (p as f64, r as f64);
    let log_n2 = match xlny(pf, means.n2) {
        Some(v) => v,
        None => return Ok(0.0),
    };
    let log_n3 = match xlny(rf, means.n3) {
        Some(v) => v,
        None => return Ok(0.0),
    };
    let log_binom = ln_gamma(pf + rf + 1.0) - ln_gamma(pf + 1.0) - ln_gamma(rf + 1.0);
    let log_norm = (1.0 + pf + rf) * (1.0 + means.n1).ln();
    Ok((log_n2 + log_n3 + log_binom - log_norm).exp())
}

/// Marginal photon-number distribution of a single mode.
///
/// Each marginal of the joint PMF is thermal: `N_j^n / (1 + N_j)^(n + 1)`.
pub fn marginal_pmf(means: &ModeMeans, mode: usize, n: u64) -> Result<f64> {
    let mean = means.get(mode)?;
    let nf = n as f64;
    match xlny(nf, mean) {
        Some(log_num) => Ok((log_num - (nf + 1.0) * (1.0 + mean).ln()).exp()),
        None => Ok(0.0), // zero mean: all weight on n = 0
    }
}

/// Closed-form second moments of the tripartite state.
///
/// Each marginal is thermal (`var_j = N_j (1 + N_j)`); the cross covariances
/// follow from the thermal-times-binomial factorization of the joint PMF.
pub fn photon_moments(means: &ModeMeans) -> MomentSet {
    let ModeMeans { n1, n2, n3 } = *means;
    let cov_12 = n2 * (1.0 + n1);
    let cov_13 = n3 * (1.0 + n1);
    let cov_23 = n2 * n3;
    MomentSet {
        mean: [n1, n2, n3],
        var: [n1 * (1.0 + n1), n2 * (1.0 + n2), n3 * (1.0 + n3)],
        cov_12,
        cov_13,
        cov_23,
        gamma_comb: cov_23 - cov_12 - cov_13,
    }
}

/// Ideal (pre-detection) photon-number correlation coefficient.
///
/// `Arm1VsSum` is identically one: mode 1 equals the sum of modes 2 and 3
/// photon by photon. The partial groupings are
///
/// ```text
/// eps_{1,k} = sqrt(N_k (1 + N1) / (N1 (1 + N_k)))
/// eps_{2,3} = sqrt(N2 N3 / ((1 + N2) (1 + N3)))
/// ```
pub fn correlation_coefficient(means: &ModeMeans, grouping: Grouping) -> Result<f64> {
    let ModeMeans { n1, n2, n3 } = *means;
    let undefined = |g: Grouping| Error::UndefinedCorrelation { grouping: g.key() };
    match grouping {
        Grouping::Arm1VsSum => {
            if n1 > 0.0 {
                Ok(1.0)
            } else {
                Err(undefined(grouping))
            }
        }
        Grouping::Arm1Arm2 => {
            if n1 > 0.0 && n2 > 0.0 {
                Ok((n2 * (1.0 + n1) / (n1 * (1.0 + n2))).sqrt())
            } else {
                Err(undefined(grouping))
            }
        }
        Grouping::Arm1Arm3 => {
            if n1 > 0.0 && n3 > 0.0 {
                Ok((n3 * (1.0 + n1) / (n1 * (1.0 + n3))).sqrt())
            } else {
                Err(undefined(grouping))
            }
        }
        Grouping::Arm2Arm3 => {
            if n2 > 0.0 && n3 > 0.0 {
                Ok((n2 * n3 / ((1.0 + n2) * (1.0 + n3))).sqrt())
            } else {
                Err(undefined(grouping))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn means_1_half_half() -> ModeMeans {
        ModeMeans::new(1.0, 0.5, 0.5).unwrap()
    }

    #[test]
    fn joint_pmf_examples() {
        let m = means_1_half_half();
        assert_relative_eq!(joint_pmf(&m, 0, 0, 0).unwrap(), 0.5, max_relative = 1e-14);
        assert_relative_eq!(joint_pmf(&m, 2, 1, 1).unwrap(), 0.0625, max_relative = 1e-13);
        assert_eq!(joint_pmf(&m, 1, 1, 1).unwrap(), 0.0);
    }

    #[test]
    fn joint_pmf_rejects_nonconserving_means() {
        let bad = ModeMeans::new(3.0, 1.0, 1.0).unwrap();
        assert!(matches!(
            joint_pmf(&bad, 0, 0, 0),
            Err(Error::ConservationViolated { .. })
        ));
    }

    #[test]
    fn joint_pmf_handles_zero_branch_means() {
        let m = ModeMeans::new(2.0, 2.0, 0.0).unwrap();
        // all photons must go to mode 2
        assert_eq!(joint_pmf(&m, 3, 2, 1).unwrap(), 0.0);
        assert_relative_eq!(
            joint_pmf(&m, 2, 2, 0).unwrap(),
            4.0 / 27.0,
            max_relative = 1e-13
        );
    }

    #[test]
    fn joint_pmf_large_counts_stay_finite() {
        let m = ModeMeans::new(5.0, 2.5, 2.5).unwrap();
        let p = joint_pmf(&m, 400, 200, 200).unwrap();
        assert!(p.is_finite() && p > 0.0);
    }

    #[test]
    fn marginal_examples() {
        let m = means_1_half_half();
        assert_relative_eq!(marginal_pmf(&m, 1, 0).unwrap(), 0.5, max_relative = 1e-14);
        assert_relative_eq!(
            marginal_pmf(&m, 2, 1).unwrap(),
            0.5 / 2.25,
            max_relative = 1e-13
        );
        let vac = ModeMeans::new(0.0, 0.0, 0.0).unwrap();
        assert_eq!(marginal_pmf(&vac, 3, 0).unwrap(), 1.0);
        assert_eq!(marginal_pmf(&vac, 3, 2).unwrap(), 0.0);
        assert!(matches!(
            marginal_pmf(&m, 4, 0),
            Err(Error::InvalidModeIndex(4))
        ));
    }

    #[test]
    fn moment_closed_forms() {
        let s = photon_moments(&means_1_half_half());
        assert_relative_eq!(s.var[0], 2.0);
        assert_relative_eq!(s.var[1], 0.75);
        assert_relative_eq!(s.var[2], 0.75);
        assert_relative_eq!(s.cov_23, 0.25);
        assert_relative_eq!(s.cov_12, 1.0);
        assert_relative_eq!(s.cov_13, 1.0);
        assert_relative_eq!(s.gamma_comb, -1.75);

        let zeros = photon_moments(&ModeMeans::new(0.0, 0.0, 0.0).unwrap());
        assert_eq!(zeros.var, [0.0; 3]);
        assert_eq!(zeros.cov_23, 0.0);

        // n3 = 0 collapses to a two-mode thermal pair
        let pair = photon_moments(&ModeMeans::new(3.0, 3.0, 0.0).unwrap());
        assert_relative_eq!(pair.cov_13, 0.0);
        assert_relative_eq!(pair.cov_12, 12.0);
        assert_relative_eq!(pair.var[0], 12.0);
    }

    #[test]
    fn correlation_closed_forms() {
        let m = means_1_half_half();
        assert_relative_eq!(
            correlation_coefficient(&m, Grouping::Arm2Arm3).unwrap(),
            1.0 / 3.0,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            correlation_coefficient(&m, Grouping::Arm1Arm2).unwrap(),
            (2.0f64 / 3.0).sqrt(),
            max_relative = 1e-14
        );
        let big = ModeMeans::new(5.0, 2.0, 3.0).unwrap();
        assert_eq!(
            correlation_coefficient(&big, Grouping::Arm1VsSum).unwrap(),
            1.0
        );
    }

    #[test]
    fn zero_variance_groupings_are_errors() {
        let m = ModeMeans::new(1.0, 1.0, 0.0).unwrap();
        assert!(correlation_coefficient(&m, Grouping::Arm1Arm3).is_err());
        assert!(correlation_coefficient(&m, Grouping::Arm2Arm3).is_err());
        assert!(correlation_coefficient(&m, Grouping::Arm1Arm2).is_ok());
        let vac = ModeMeans::new(0.0, 0.0, 0.0).unwrap();
        assert!(correlation_coefficient(&vac, Grouping::Arm1VsSum).is_err());
    }

    #[test]
    fn correlation_matches_moment_ratio() {
        // Both routes to eps must agree: closed form vs cov / (sigma sigma).
        for (n2, n3) in [(0.5, 0.5), (2.0, 1.0), (0.1, 3.0)] {
            let m = ModeMeans::new(n2 + n3, n2, n3).unwrap();
            let s = photon_moments(&m);
            for g in [Grouping::Arm1Arm2, Grouping::Arm1Arm3, Grouping::Arm2Arm3] {
                let closed = correlation_coefficient(&m, g).unwrap();
                let (cov, va, vb) = match g {
                    Grouping::Arm1Arm2 => (s.cov_12, s.var[0], s.var[1]),
                    Grouping::Arm1Arm3 => (s.cov_13, s.var[0], s.var[2]),
                    Grouping::Arm2Arm3 => (s.cov_23, s.var[1], s.var[2]),
                    Grouping::Arm1VsSum => unreachable!(),
                };
                assert_relative_eq!(closed, cov / (va * vb).sqrt(), max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn grouping_keys_are_stable() {
        assert_eq!(Grouping::Arm1VsSum.key(), "1_23");
        assert_eq!(Grouping::Arm2Arm3.key(), "23");
        assert_eq!(Grouping::Arm1Arm2.to_string(), "12");
    }
}
