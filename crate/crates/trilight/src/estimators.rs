//! Sample statistics of shot sets: per-arm means, correlation coefficients,
//! noise-reduction factors, dark-run subtraction and bootstrap uncertainties.
//!
//! Electronic noise is independent of the light, so a dark run calibrates it
//! away: dark means are subtracted from the signal means, and dark variances
//! (per arm and of each difference photocurrent) from the corresponding signal
//! variances, before any ratio is formed. Covariances between distinct arms
//! are left untouched; independent noise does not bias them.
//!
//! Standard errors come from a non-overlapping block bootstrap over the shot
//! sequence, seeded from the run seed so reports are reproducible.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::sampling::{ShotRecord, ShotSet};
use crate::statistics::Grouping;

/// Number of non-overlapping blocks the shot sequence is cut into for the
/// bootstrap (fewer when the run is shorter than twice this).
pub const BOOTSTRAP_BLOCKS: usize = 200;

/// Bootstrap replicates used for each standard error.
pub const BOOTSTRAP_RESAMPLES: usize = 200;

const BOOTSTRAP_SALT: u64 = 0x626F_6F74_7374_7261; // "bootstra"

/// Estimated statistics of a run.
///
/// `eps_hat` and `r_hat` only contain groupings whose estimate is defined;
/// quantities that could not be formed (vanishing corrected variance, zero
/// mean-photocurrent denominator) are listed in `undefined` with a reason.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateReport {
    pub mean: [f64; 3],
    pub eps_hat: BTreeMap<Grouping, f64>,
    pub r_hat: BTreeMap<Grouping, f64>,
    pub stderr_mean: [f64; 3],
    pub stderr_eps: BTreeMap<Grouping, f64>,
    pub stderr_r: BTreeMap<Grouping, f64>,
    pub undefined: Vec<String>,
    pub dark_corrected: bool,
    pub shots_used: usize,
}

impl EstimateReport {
    /// Estimated noise reduction for the one-vs-sum grouping, when defined.
    pub fn r_sum(&self) -> Option<f64> {
        self.r_hat.get(&Grouping::Arm1VsSum).copied()
    }

    pub fn eps_sum(&self) -> Option<f64> {
        self.eps_hat.get(&Grouping::Arm1VsSum).copied()
    }
}

/// Unbiased first and second sample moments of a record slice.
#[derive(Debug, Clone, Copy)]
struct RawMoments {
    mean: [f64; 3],
    var: [f64; 3],
    cov_12: f64,
    cov_13: f64,
    cov_23: f64,
}

impl RawMoments {
    fn compute(records: &[ShotRecord]) -> Self {
        let n = records.len();
        let nf = n as f64;
        let mut mean = [0.0f64; 3];
        for r in records {
            mean[0] += r.m1;
            mean[1] += r.m2;
            mean[2] += r.m3;
        }
        mean.iter_mut().for_each(|m| *m /= nf);

        let mut ss = [0.0f64; 3];
        let (mut c12, mut c13, mut c23) = (0.0f64, 0.0f64, 0.0f64);
        for r in records {
            let d = [r.m1 - mean[0], r.m2 - mean[1], r.m3 - mean[2]];
            ss[0] += d[0] * d[0];
            ss[1] += d[1] * d[1];
            ss[2] += d[2] * d[2];
            c12 += d[0] * d[1];
            c13 += d[0] * d[2];
            c23 += d[1] * d[2];
        }
        let denom = if n > 1 { nf - 1.0 } else { 1.0 };
        RawMoments {
            mean,
            var: [ss[0] / denom, ss[1] / denom, ss[2] / denom],
            cov_12: c12 / denom,
            cov_13: c13 / denom,
            cov_23: c23 / denom,
        }
    }

    /// Sample variance of the grouping's difference photocurrent. Identical to
    /// the variance of the per-shot difference series since all second moments
    /// share the `n - 1` divisor.
    fn difference_variance(&self, grouping: Grouping) -> f64 {
        match grouping {
            Grouping::Arm1VsSum => {
                self.var.iter().sum::<f64>() + 2.0 * (self.cov_23 - self.cov_12 - self.cov_13)
            }
            Grouping::Arm1Arm2 => self.var[0] + self.var[1] - 2.0 * self.cov_12,
            Grouping::Arm1Arm3 => self.var[0] + self.var[2] - 2.0 * self.cov_13,
            Grouping::Arm2Arm3 => self.var[1] + self.var[2] - 2.0 * self.cov_23,
        }
    }
}

/// Estimates with the dark correction already applied.
struct CorrectedStats {
    mean: [f64; 3],
    eps: BTreeMap<Grouping, f64>,
    r: BTreeMap<Grouping, f64>,
    undefined: Vec<String>,
}

fn corrected_stats(signal: &RawMoments, dark: Option<&RawMoments>) -> Result<CorrectedStats> {
    let mut mean = signal.mean;
    let mut var = signal.var;
    if let Some(d) = dark {
        for j in 0..3 {
            mean[j] -= d.mean[j];
            var[j] -= d.var[j];
            if var[j] <= 0.0 && signal.var[j] > 0.0 {
                let names = ["var(m1)", "var(m2)", "var(m3)"];
                return Err(Error::OverSubtraction {
                    quantity: names[j],
                    value: var[j],
                });
            }
        }
    }

    let mut undefined = Vec::new();
    let mut eps = BTreeMap::new();
    let mut r = BTreeMap::new();

    for grouping in Grouping::ALL {
        // noise reduction factor
        let mut var_d = signal.difference_variance(grouping);
        if let Some(d) = dark {
            var_d -= d.difference_variance(grouping);
            if var_d < 0.0 {
                return Err(Error::OverSubtraction {
                    quantity: "var(difference)",
                    value: var_d,
                });
            }
        }
        let mean_sum = match grouping {
            Grouping::Arm1VsSum => mean.iter().sum::<f64>(),
            Grouping::Arm1Arm2 => mean[0] + mean[1],
            Grouping::Arm1Arm3 => mean[0] + mean[2],
            Grouping::Arm2Arm3 => mean[1] + mean[2],
        };
        if mean_sum > 0.0 {
            r.insert(grouping, var_d / mean_sum);
        } else {
            undefined.push(format!("r_{}: zero mean photocurrent", grouping.key()));
        }

        // correlation coefficient
        let (cov, var_a, var_b) = match grouping {
            Grouping::Arm1VsSum => {
                let mut vb = signal.var[1] + signal.var[2] + 2.0 * signal.cov_23;
                if let Some(d) = dark {
                    vb -= d.var[1] + d.var[2] + 2.0 * d.cov_23;
                }
                (signal.cov_12 + signal.cov_13, var[0], vb)
            }
            Grouping::Arm1Arm2 => (signal.cov_12, var[0], var[1]),
            Grouping::Arm1Arm3 => (signal.cov_13, var[0], var[2]),
            Grouping::Arm2Arm3 => (signal.cov_23, var[1], var[2]),
        };
        if var_a > 0.0 && var_b > 0.0 {
            // dark correction can push the ratio marginally past +-1
            eps.insert(grouping, (cov / (var_a * var_b).sqrt()).clamp(-1.0, 1.0));
        } else {
            undefined.push(format!("eps_{}: zero variance", grouping.key()));
        }
    }

    Ok(CorrectedStats {
        mean,
        eps,
        r,
        undefined,
    })
}

fn check_dark_compatible(signal: &ShotSet, dark: &ShotSet) -> Result<()> {
    let s = signal.meta().noise.sigma_el;
    let d = dark.meta().noise.sigma_el;
    if s != d {
        return Err(Error::DarkMismatch { signal: s, dark: d });
    }
    Ok(())
}

/// Partition `n` shots into at most [`BOOTSTRAP_BLOCKS`] non-overlapping
/// contiguous blocks; returns the block boundaries.
fn block_bounds(n: usize) -> Vec<(usize, usize)> {
    let blocks = BOOTSTRAP_BLOCKS.min(n);
    (0..blocks)
        .map(|b| (b * n / blocks, (b + 1) * n / blocks))
        .collect()
}

/// Estimate means, correlation coefficients and noise-reduction factors from a
/// run, with optional dark-run calibration and block-bootstrap standard
/// errors.
pub fn estimate_statistics(signal: &ShotSet, dark: Option<&ShotSet>) -> Result<EstimateReport> {
    if signal.is_empty() {
        return Err(Error::EmptyShotSet);
    }
    if let Some(d) = dark {
        if d.is_empty() {
            return Err(Error::EmptyShotSet);
        }
        check_dark_compatible(signal, d)?;
    }

    let signal_moments = RawMoments::compute(signal.records());
    let dark_moments = dark.map(|d| RawMoments::compute(d.records()));
    let point = corrected_stats(&signal_moments, dark_moments.as_ref())?;

    // Block bootstrap over the shot sequences. The dark run is resampled
    // alongside the signal so the uncertainty of the subtraction itself is
    // reflected in the standard errors.
    let bounds = block_bounds(signal.len());
    let dark_bounds = dark.map(|d| block_bounds(d.len()));
    let parent = Stream::new(signal.meta().seed ^ BOOTSTRAP_SALT, 0);
    let mut mean_reps: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    let mut eps_reps: BTreeMap<Grouping, Vec<f64>> = BTreeMap::new();
    let mut r_reps: BTreeMap<Grouping, Vec<f64>> = BTreeMap::new();

    let mut resampled: Vec<ShotRecord> = Vec::with_capacity(signal.len());
    let mut dark_resampled: Vec<ShotRecord> = Vec::new();
    for rep in 0..BOOTSTRAP_RESAMPLES {
        let mut stream = parent.child(rep as u64);
        resampled.clear();
        for _ in 0..bounds.len() {
            let pick = bounds[(stream.next_u64() % bounds.len() as u64) as usize];
            resampled.extend_from_slice(&signal.records()[pick.0..pick.1]);
        }
        let rep_dark_moments = match (&dark_bounds, dark) {
            (Some(db), Some(d)) => {
                dark_resampled.clear();
                for _ in 0..db.len() {
                    let pick = db[(stream.next_u64() % db.len() as u64) as usize];
                    dark_resampled.extend_from_slice(&d.records()[pick.0..pick.1]);
                }
                Some(RawMoments::compute(&dark_resampled))
            }
            _ => None,
        };
        let moments = RawMoments::compute(&resampled);
        if let Ok(stats) = corrected_stats(&moments, rep_dark_moments.as_ref()) {
            for j in 0..3 {
                mean_reps[j].push(stats.mean[j]);
            }
            for (g, v) in stats.eps {
                eps_reps.entry(g).or_default().push(v);
            }
            for (g, v) in stats.r {
                r_reps.entry(g).or_default().push(v);
            }
        }
    }

    let spread = |values: &[f64]| -> f64 {
        if values.len() < 2 {
            return f64::NAN;
        }
        let m = values.iter().sum::<f64>() / values.len() as f64;
        (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
    };

    let stderr_of = |reps: &BTreeMap<Grouping, Vec<f64>>, point: &BTreeMap<Grouping, f64>| {
        point
            .keys()
            .filter_map(|g| reps.get(g).map(|v| (*g, spread(v))))
            .collect::<BTreeMap<_, _>>()
    };

    Ok(EstimateReport {
        mean: point.mean,
        stderr_mean: [
            spread(&mean_reps[0]),
            spread(&mean_reps[1]),
            spread(&mean_reps[2]),
        ],
        stderr_eps: stderr_of(&eps_reps, &point.eps),
        stderr_r: stderr_of(&r_reps, &point.r),
        eps_hat: point.eps,
        r_hat: point.r,
        undefined: point.undefined,
        dark_corrected: dark.is_some(),
        shots_used: signal.len(),
    })
}
