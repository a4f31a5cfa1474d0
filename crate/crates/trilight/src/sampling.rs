//! Seeded Monte Carlo generation of per-shot detected triplets.
//!
//! Each laser shot carries `mu` temporal modes. Per mode the sampler draws the
//! mode-1 photon number from a thermal distribution and splits it binomially
//! between modes 2 and 3 — exactly the factorization of the tripartite joint
//! PMF — then applies collection and efficiency losses as binomial thinnings,
//! adds uncorrelated thermal stray light, and finally smears the per-shot
//! totals with Gaussian electronic noise from the analog chain.
//!
//! Shots are embarrassingly parallel: shot `i` of a run draws from the
//! substream keyed by `(seed, i)`, so runs are bit-reproducible regardless of
//! thread scheduling.

use rand::distributions::Distribution;
use rand_distr::{Binomial, Geometric, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detection::DetectionConfig;
use crate::dynamics::{CouplingConfig, ModeMeans};
use crate::error::{Error, Result};
use crate::rng::Stream;

/// Multimode and stray-light model for a run.
///
/// * `mu` — temporal modes per shot; detected totals are sums of `mu` i.i.d.
///   single-mode contributions.
/// * `sigma_el` — per-arm electronic-noise standard deviation in
///   photon-equivalent units, added once per shot after integration.
/// * `spurious` — mean uncorrelated thermal photons entering each arm per
///   temporal mode, in front of the detector.
/// * `collect` — fraction of each arm's coherence area actually collected;
///   thins the correlated light only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub mu: u32,
    pub sigma_el: [f64; 3],
    pub spurious: [f64; 3],
    pub collect: [f64; 3],
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::ideal(1)
    }
}

impl NoiseModel {
    /// Noise-free model with `mu` temporal modes.
    pub fn ideal(mu: u32) -> Self {
        Self {
            mu,
            sigma_el: [0.0; 3],
            spurious: [0.0; 3],
            collect: [1.0; 3],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mu < 1 {
            return Err(Error::InvalidParameter {
                name: "mu",
                value: self.mu as f64,
                reason: "at least one temporal mode is required",
            });
        }
        for (name, value) in [
            ("sigma_el_1", self.sigma_el[0]),
            ("sigma_el_2", self.sigma_el[1]),
            ("sigma_el_3", self.sigma_el[2]),
            ("spurious_1", self.spurious[0]),
            ("spurious_2", self.spurious[1]),
            ("spurious_3", self.spurious[2]),
        ] {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be finite and non-negative",
                });
            }
        }
        for (name, value) in [
            ("collect_1", self.collect[0]),
            ("collect_2", self.collect[1]),
            ("collect_3", self.collect[2]),
        ] {
            if !value.is_finite() || value <= 0.0 || value > 1.0 {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "collection fraction must lie in (0, 1]",
                });
            }
        }
        Ok(())
    }

    pub fn has_electronic_noise(&self) -> bool {
        self.sigma_el.iter().any(|&s| s > 0.0)
    }
}

/// Detected signal per arm for one shot: integer photoelectron count plus
/// analog electronic noise, so integer-valued exactly when `sigma_el` is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
}

impl ShotRecord {
    pub fn arm(&self, j: usize) -> f64 {
        match j {
            1 => self.m1,
            2 => self.m2,
            3 => self.m3,
            _ => f64::NAN,
        }
    }

    /// The three-arm difference photocurrent `m1 - m2 - m3`.
    pub fn difference(&self) -> f64 {
        self.m1 - self.m2 - self.m3
    }
}

/// Whether a run carried light or only electronic noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunKind {
    Signal,
    Dark,
}

/// Generation parameters frozen into a [`ShotSet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub kind: RunKind,
    pub means: ModeMeans,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub couplings: Option<CouplingConfig>,
    pub detection: DetectionConfig,
    pub noise: NoiseModel,
    pub seed: u64,
    pub shots: usize,
}

/// An ordered run of detected triplets plus the parameters that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotSet {
    records: Vec<ShotRecord>,
    meta: RunMeta,
}

impl ShotSet {
    /// Assemble a shot set from externally produced records (e.g. loaded from
    /// disk or built as a test fixture). The record count must match the
    /// declared shot count.
    pub fn from_records(records: Vec<ShotRecord>, meta: RunMeta) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyShotSet);
        }
        if records.len() != meta.shots {
            return Err(Error::InvalidParameter {
                name: "shots",
                value: meta.shots as f64,
                reason: "declared shot count does not match record count",
            });
        }
        Ok(Self { records, meta })
    }

    pub fn records(&self) -> &[ShotRecord] {
        &self.records
    }

    pub fn meta(&self) -> &RunMeta {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

fn thermal(stream: &mut Stream, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    // Bose-Einstein occupation = failures before first success at p = 1/(1+mean)
    Geometric::new(1.0 / (1.0 + mean))
        .expect("valid geometric parameter")
        .sample(stream)
}

fn thin(stream: &mut Stream, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p)
        .expect("valid binomial parameter")
        .sample(stream)
}

fn gaussian(stream: &mut Stream, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return 0.0;
    }
    Normal::new(0.0, sigma)
        .expect("valid normal parameter")
        .sample(stream)
}

#[cfg(test)]
pub(crate) fn test_thermal(stream: &mut Stream, mean: f64) -> u64 {
    thermal(stream, mean)
}

/// Draw one shot. The caller owns and seeds the stream; draws happen in a
/// fixed documented order (correlated light, then stray light, per mode; then
/// electronic noise) so a stream position maps to a unique sample.
pub fn sample_shot(
    means: &ModeMeans,
    det: &DetectionConfig,
    noise: &NoiseModel,
    stream: &mut Stream,
) -> ShotRecord {
    let eta = det.etas();
    let split = if means.n1 > 0.0 { means.n2 / means.n1 } else { 0.0 };
    let mut counts = [0u64; 3];
    for _ in 0..noise.mu {
        let n1 = thermal(stream, means.n1);
        let n2 = thin(stream, n1, split);
        let n3 = n1 - n2;
        for (j, photons) in [n1, n2, n3].into_iter().enumerate() {
            let collected = thin(stream, photons, noise.collect[j]);
            counts[j] += thin(stream, collected, eta[j]);
        }
        for j in 0..3 {
            let stray = thermal(stream, noise.spurious[j]);
            counts[j] += thin(stream, stray, eta[j]);
        }
    }
    ShotRecord {
        m1: counts[0] as f64 + gaussian(stream, noise.sigma_el[0]),
        m2: counts[1] as f64 + gaussian(stream, noise.sigma_el[1]),
        m3: counts[2] as f64 + gaussian(stream, noise.sigma_el[2]),
    }
}

fn validate_run_inputs(
    means: &ModeMeans,
    det: &DetectionConfig,
    noise: &NoiseModel,
    shots: usize,
) -> Result<()> {
    det.validate()?;
    noise.validate()?;
    if !means.is_conserving() {
        return Err(Error::ConservationViolated {
            n1: means.n1,
            n2: means.n2,
            n3: means.n3,
            defect: means.conservation_defect(),
        });
    }
    if shots == 0 {
        return Err(Error::EmptyShotSet);
    }
    Ok(())
}

/// Generate a seeded signal run. Deterministic in all inputs: identical seeds
/// yield bit-identical shot sets regardless of execution parallelism.
pub fn sample_run(
    means: &ModeMeans,
    det: &DetectionConfig,
    noise: &NoiseModel,
    shots: usize,
    seed: u64,
) -> Result<ShotSet> {
    validate_run_inputs(means, det, noise, shots)?;
    let records: Vec<ShotRecord> = (0..shots)
        .into_par_iter()
        .map(|i| {
            let mut stream = Stream::new(seed, i as u64);
            sample_shot(means, det, noise, &mut stream)
        })
        .collect();
    Ok(ShotSet {
        records,
        meta: RunMeta {
            kind: RunKind::Signal,
            means: *means,
            couplings: None,
            detection: *det,
            noise: *noise,
            seed,
            shots,
        },
    })
}

/// As [`sample_run`], recording the coupling configuration the means came from.
pub fn sample_run_from_couplings(
    couplings: &CouplingConfig,
    det: &DetectionConfig,
    noise: &NoiseModel,
    shots: usize,
    seed: u64,
) -> Result<ShotSet> {
    let means = crate::dynamics::mode_means(couplings)?;
    let mut set = sample_run(&means, det, noise, shots, seed)?;
    set.meta.couplings = Some(*couplings);
    Ok(set)
}

/// Generate a dark run: no light on any arm, records contain only the
/// electronic noise of the acquisition chain.
pub fn sample_dark_run(
    det: &DetectionConfig,
    noise: &NoiseModel,
    shots: usize,
    seed: u64,
) -> Result<ShotSet> {
    let vacuum = ModeMeans::new(0.0, 0.0, 0.0)?;
    let dark_noise = NoiseModel {
        spurious: [0.0; 3],
        ..*noise
    };
    validate_run_inputs(&vacuum, det, &dark_noise, shots)?;
    let records: Vec<ShotRecord> = (0..shots)
        .into_par_iter()
        .map(|i| {
            let mut stream = Stream::new(seed, i as u64);
            ShotRecord {
                m1: gaussian(&mut stream, dark_noise.sigma_el[0]),
                m2: gaussian(&mut stream, dark_noise.sigma_el[1]),
                m3: gaussian(&mut stream, dark_noise.sigma_el[2]),
            }
        })
        .collect();
    Ok(ShotSet {
        records,
        meta: RunMeta {
            kind: RunKind::Dark,
            means: vacuum,
            couplings: None,
            detection: *det,
            noise: dark_noise,
            seed,
            shots,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn means_1_half_half() -> ModeMeans {
        ModeMeans::new(1.0, 0.5, 0.5).unwrap()
    }

    #[test]
    fn vacuum_yields_zero_records() {
        let means = ModeMeans::new(0.0, 0.0, 0.0).unwrap();
        let det = DetectionConfig::uniform(0.5).unwrap();
        let set = sample_run(&means, &det, &NoiseModel::ideal(1), 200, 1).unwrap();
        assert!(set
            .records()
            .iter()
            .all(|r| r.m1 == 0.0 && r.m2 == 0.0 && r.m3 == 0.0));
    }

    #[test]
    fn lossless_detection_preserves_conservation_shotwise() {
        let means = means_1_half_half();
        let det = DetectionConfig::uniform(1.0).unwrap();
        let set = sample_run(&means, &det, &NoiseModel::ideal(1), 2000, 7).unwrap();
        assert!(set.records().iter().all(|r| r.difference() == 0.0));
    }

    #[test]
    fn records_are_integers_without_electronic_noise() {
        let means = means_1_half_half();
        let det = DetectionConfig::uniform(0.28).unwrap();
        let set = sample_run(&means, &det, &NoiseModel::ideal(3), 500, 3).unwrap();
        assert!(set
            .records()
            .iter()
            .all(|r| r.m1.fract() == 0.0 && r.m2.fract() == 0.0 && r.m3.fract() == 0.0));
    }

    #[test]
    fn identical_seeds_reproduce_bit_identical_runs() {
        let means = means_1_half_half();
        let det = DetectionConfig::per_arm(0.31, 0.28, 0.25).unwrap();
        let noise = NoiseModel {
            mu: 4,
            sigma_el: [0.5, 0.4, 0.3],
            spurious: [0.1, 0.0, 0.2],
            collect: [0.9, 1.0, 0.8],
        };
        let a = sample_run(&means, &det, &noise, 1000, 99).unwrap();
        let b = sample_run(&means, &det, &noise, 1000, 99).unwrap();
        assert_eq!(a.records(), b.records());
        let c = sample_run(&means, &det, &noise, 1000, 100).unwrap();
        assert_ne!(a.records(), c.records());
    }

    #[test]
    fn determinism_is_independent_of_thread_count() {
        let means = means_1_half_half();
        let det = DetectionConfig::uniform(0.28).unwrap();
        let noise = NoiseModel {
            sigma_el: [0.2; 3],
            ..NoiseModel::ideal(2)
        };
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| sample_run(&means, &det, &noise, 5000, 42).unwrap())
        };
        let single = run(1);
        let many = run(8);
        assert_eq!(single.records(), many.records());
    }

    #[test]
    fn single_shot_run() {
        let set = sample_run(
            &means_1_half_half(),
            &DetectionConfig::uniform(0.28).unwrap(),
            &NoiseModel::ideal(1),
            1,
            5,
        )
        .unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.meta().shots, 1);
    }

    #[test]
    fn sample_means_track_detected_expectation() {
        // <m1> = mu * eta * N1; 3-sigma band around the multimode mean
        let means = means_1_half_half();
        let det = DetectionConfig::uniform(0.28).unwrap();
        let shots = 100_000;
        let mu = 10;
        let set = sample_run(&means, &det, &NoiseModel::ideal(mu), shots, 11).unwrap();
        let mean1: f64 = set.records().iter().map(|r| r.m1).sum::<f64>() / shots as f64;
        let expected = mu as f64 * 0.28 * 1.0;
        // var(m1) per shot = mu * (eta^2 N1(1+N1) + eta(1-eta) N1)
        let var = mu as f64 * (0.28f64.powi(2) * 2.0 + 0.28 * 0.72);
        let sigma = (var / shots as f64).sqrt();
        assert!(
            (mean1 - expected).abs() < 3.0 * sigma,
            "mean1 = {mean1}, expected {expected} +- {sigma}"
        );
    }

    #[test]
    fn dark_run_is_pure_electronic_noise() {
        let det = DetectionConfig::uniform(0.28).unwrap();
        let silent = sample_dark_run(&det, &NoiseModel::ideal(1), 100, 2).unwrap();
        assert!(silent.records().iter().all(|r| r.m1 == 0.0 && r.m2 == 0.0));

        let noise = NoiseModel {
            sigma_el: [1.0; 3],
            ..NoiseModel::ideal(1)
        };
        let shots = 100_000;
        let set = sample_dark_run(&det, &noise, shots, 2).unwrap();
        for j in 1..=3 {
            let mean: f64 = set.records().iter().map(|r| r.arm(j)).sum::<f64>() / shots as f64;
            let var: f64 = set
                .records()
                .iter()
                .map(|r| (r.arm(j) - mean).powi(2))
                .sum::<f64>()
                / (shots - 1) as f64;
            // var(sample var) for a Gaussian is 2 sigma^4 / (n - 1)
            let sigma_of_var = (2.0 / (shots - 1) as f64).sqrt();
            assert!(
                (var - 1.0).abs() < 3.0 * sigma_of_var,
                "arm {j} variance {var}"
            );
        }
        let again = sample_dark_run(&det, &noise, shots, 2).unwrap();
        assert_eq!(set.records()[..100], again.records()[..100]);
    }

    #[test]
    fn input_validation() {
        let means = means_1_half_half();
        let det = DetectionConfig::uniform(0.5).unwrap();
        assert!(sample_run(&means, &det, &NoiseModel::ideal(0), 10, 1).is_err());
        assert!(sample_run(&means, &det, &NoiseModel::ideal(1), 0, 1).is_err());
        let broken = ModeMeans::new(3.0, 1.0, 1.0).unwrap();
        assert!(sample_run(&broken, &det, &NoiseModel::ideal(1), 10, 1).is_err());
        let bad_collect = NoiseModel {
            collect: [0.0, 1.0, 1.0],
            ..NoiseModel::ideal(1)
        };
        assert!(sample_run(&means, &det, &bad_collect, 10, 1).is_err());
    }

    #[test]
    fn from_records_checks_count() {
        let meta = RunMeta {
            kind: RunKind::Signal,
            means: means_1_half_half(),
            couplings: None,
            detection: DetectionConfig::uniform(1.0).unwrap(),
            noise: NoiseModel::ideal(1),
            seed: 0,
            shots: 2,
        };
        let one = vec![ShotRecord {
            m1: 1.0,
            m2: 1.0,
            m3: 0.0,
        }];
        assert!(ShotSet::from_records(one.clone(), meta.clone()).is_err());
        let two = vec![one[0]; 2];
        assert!(ShotSet::from_records(two, meta).is_ok());
    }
}
