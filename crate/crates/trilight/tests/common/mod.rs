//! Independent oracles for the integration suites: brute-force sums over the
//! joint PMF, an ODE integration of the Heisenberg equations, direct
//! closed-form branch evaluation, POVM-convolution detected moments and a
//! chi-square goodness-of-fit helper.
//!
//! Everything here recomputes expectations from first principles, without
//! touching the closed forms under test.

#![allow(dead_code)]

use statrs::distribution::{ChiSquared, ContinuousCDF};
use trilight::detection::povm_weight;
use trilight::dynamics::ModeMeans;
use trilight::statistics::joint_pmf;

/// Truncation rule for oracle sums over the joint PMF: thermal tails decay
/// geometrically, so a box of `40 + 20 * n1` photons keeps the truncation
/// error below ~1e-10 for `n1 <= 5`.
pub fn truncation_limit(n1: f64) -> u64 {
    (40.0 + 20.0 * n1).ceil() as u64
}

/// Sum of the joint PMF over the truncated box.
pub fn pmf_normalization(means: &ModeMeans) -> f64 {
    let n_max = truncation_limit(means.n1);
    let mut total = 0.0;
    for n in 0..=n_max {
        for p in 0..=n {
            total += joint_pmf(means, n, p, n - p).unwrap();
        }
    }
    total
}

/// Photon-number moments by brute-force summation over the joint PMF.
pub struct BruteMoments {
    pub mean: [f64; 3],
    pub var: [f64; 3],
    pub cov_12: f64,
    pub cov_13: f64,
    pub cov_23: f64,
}

pub fn brute_force_moments(means: &ModeMeans) -> BruteMoments {
    let n_max = truncation_limit(means.n1);
    let mut e = [0.0f64; 3];
    let mut e2 = [0.0f64; 3];
    let (mut e12, mut e13, mut e23) = (0.0f64, 0.0f64, 0.0f64);
    for n in 0..=n_max {
        for p in 0..=n {
            let r = n - p;
            let w = joint_pmf(means, n, p, r).unwrap();
            let (nf, pf, rf) = (n as f64, p as f64, r as f64);
            e[0] += w * nf;
            e[1] += w * pf;
            e[2] += w * rf;
            e2[0] += w * nf * nf;
            e2[1] += w * pf * pf;
            e2[2] += w * rf * rf;
            e12 += w * nf * pf;
            e13 += w * nf * rf;
            e23 += w * pf * rf;
        }
    }
    BruteMoments {
        mean: e,
        var: [
            e2[0] - e[0] * e[0],
            e2[1] - e[1] * e[1],
            e2[2] - e[2] * e[2],
        ],
        cov_12: e12 - e[0] * e[1],
        cov_13: e13 - e[0] * e[2],
        cov_23: e23 - e[1] * e[2],
    }
}

/// Detected moments by exact convolution of the joint PMF with the POVM
/// weights: first/second binomial row moments are accumulated against the
/// photon distribution, using conditional independence of the three detectors.
pub struct ConvolvedMoments {
    pub mean: [f64; 3],
    pub var: [f64; 3],
    pub cov_12: f64,
    pub cov_13: f64,
    pub cov_23: f64,
}

impl ConvolvedMoments {
    /// Correlation of arm 1 against the summed photocurrent of arms 2 and 3.
    pub fn eps_sum(&self) -> f64 {
        let cov = self.cov_12 + self.cov_13;
        let var_sum = self.var[1] + self.var[2] + 2.0 * self.cov_23;
        cov / (self.var[0] * var_sum).sqrt()
    }
}

pub fn convolved_detected_moments(means: &ModeMeans, etas: [f64; 3]) -> ConvolvedMoments {
    let n_max = truncation_limit(means.n1);
    // per-arm POVM row moments: sum_m m W(eta, v, m) and sum_m m^2 W(eta, v, m)
    let mut row_mean = vec![[0.0f64; 3]; (n_max + 1) as usize];
    let mut row_sq = vec![[0.0f64; 3]; (n_max + 1) as usize];
    for v in 0..=n_max {
        for (j, &eta) in etas.iter().enumerate() {
            let mut m1 = 0.0;
            let mut m2 = 0.0;
            for m in 0..=v {
                let w = povm_weight(eta, v, m);
                m1 += w * m as f64;
                m2 += w * (m * m) as f64;
            }
            row_mean[v as usize][j] = m1;
            row_sq[v as usize][j] = m2;
        }
    }

    let mut e = [0.0f64; 3];
    let mut e2 = [0.0f64; 3];
    let (mut e12, mut e13, mut e23) = (0.0f64, 0.0f64, 0.0f64);
    for n in 0..=n_max {
        for p in 0..=n {
            let r = n - p;
            let w = joint_pmf(means, n, p, r).unwrap();
            let counts = [n as usize, p as usize, r as usize];
            for j in 0..3 {
                e[j] += w * row_mean[counts[j]][j];
                e2[j] += w * row_sq[counts[j]][j];
            }
            e12 += w * row_mean[counts[0]][0] * row_mean[counts[1]][1];
            e13 += w * row_mean[counts[0]][0] * row_mean[counts[2]][2];
            e23 += w * row_mean[counts[1]][1] * row_mean[counts[2]][2];
        }
    }
    ConvolvedMoments {
        mean: e,
        var: [
            e2[0] - e[0] * e[0],
            e2[1] - e[1] * e[1],
            e2[2] - e[2] * e[2],
        ],
        cov_12: e12 - e[0] * e[1],
        cov_13: e13 - e[0] * e[2],
        cov_23: e23 - e[1] * e[2],
    }
}

/// Mean photon numbers by RK4 integration of the Heisenberg equations of the
/// two interlinked interactions, from vacuum. The Bogoliubov matrix for
/// `(a1, a2^dag, a3^dag)` obeys `U' = i B U` with real
///
/// ```text
///     [ 0   0  -g1 ]
/// B = [ 0   0   g2 ]
///     [ g1  g2  0  ]
/// ```
///
/// and the means follow from the anomalous entries of `U`.
pub fn ode_mode_means(g1_sq: f64, g2_sq: f64, z: f64, steps: usize) -> (f64, f64, f64) {
    let g1 = g1_sq.sqrt();
    let g2 = g2_sq.sqrt();
    let b = [[0.0, 0.0, -g1], [0.0, 0.0, g2], [g1, g2, 0.0]];

    type Mat = [[f64; 3]; 3];
    let mat_mul = |a: &Mat, m: &Mat| -> Mat {
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for (k, row) in m.iter().enumerate() {
                    out[i][j] += a[i][k] * row[j];
                }
            }
        }
        out
    };
    // d/dz (X + iY) = i B (X + iY)  =>  X' = -B Y, Y' = B X
    let deriv = |x: &Mat, y: &Mat| -> (Mat, Mat) {
        let bx = mat_mul(&b, x);
        let by = mat_mul(&b, y);
        let mut dx = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                dx[i][j] = -by[i][j];
            }
        }
        (dx, bx)
    };
    let axpy = |a: &Mat, s: f64, d: &Mat| -> Mat {
        let mut out = *a;
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] += s * d[i][j];
            }
        }
        out
    };

    let mut x: Mat = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let mut y: Mat = [[0.0; 3]; 3];
    let h = z / steps as f64;
    for _ in 0..steps {
        let (k1x, k1y) = deriv(&x, &y);
        let (k2x, k2y) = deriv(&axpy(&x, h / 2.0, &k1x), &axpy(&y, h / 2.0, &k1y));
        let (k3x, k3y) = deriv(&axpy(&x, h / 2.0, &k2x), &axpy(&y, h / 2.0, &k2y));
        let (k4x, k4y) = deriv(&axpy(&x, h, &k3x), &axpy(&y, h, &k3y));
        for i in 0..3 {
            for j in 0..3 {
                x[i][j] += h / 6.0 * (k1x[i][j] + 2.0 * k2x[i][j] + 2.0 * k3x[i][j] + k4x[i][j]);
                y[i][j] += h / 6.0 * (k1y[i][j] + 2.0 * k2y[i][j] + 2.0 * k3y[i][j] + k4y[i][j]);
            }
        }
    }

    let sq = |re: f64, im: f64| re * re + im * im;
    let n1 = sq(x[0][1], y[0][1]) + sq(x[0][2], y[0][2]);
    let n2 = sq(x[1][0], y[1][0]);
    let n3 = sq(x[2][0], y[2][0]);
    (n1, n2, n3)
}

/// Oscillatory-branch closed form evaluated directly, bypassing the regime
/// switch (used to probe continuity at the degenerate boundary).
pub fn oscillatory_branch(g1_sq: f64, g2_sq: f64, z: f64) -> (f64, f64) {
    let omega_sq = g2_sq - g1_sq;
    let omega = omega_sq.sqrt();
    let n3 = g1_sq * (omega * z).sin().powi(2) / omega_sq;
    let n2 = g1_sq * g2_sq * ((omega * z).cos() - 1.0).powi(2) / (omega_sq * omega_sq);
    (n2, n3)
}

/// Hyperbolic-branch closed form evaluated directly.
pub fn hyperbolic_branch(g1_sq: f64, g2_sq: f64, z: f64) -> (f64, f64) {
    let theta_sq = g1_sq - g2_sq;
    let theta = theta_sq.sqrt();
    let n3 = g1_sq * (theta * z).sinh().powi(2) / theta_sq;
    let n2 = g1_sq * g2_sq * ((theta * z).cosh() - 1.0).powi(2) / (theta_sq * theta_sq);
    (n2, n3)
}

/// Chi-square goodness-of-fit p-value of observed counts against expected
/// counts. Cells below the pooling threshold are merged into one tail cell.
pub fn chi_square_p_value(observed: &[f64], expected: &[f64], min_expected: f64) -> f64 {
    assert_eq!(observed.len(), expected.len());
    let mut chi2 = 0.0;
    let mut cells = 0usize;
    let mut tail_obs = 0.0;
    let mut tail_exp = 0.0;
    for (&o, &e) in observed.iter().zip(expected) {
        if e >= min_expected {
            chi2 += (o - e).powi(2) / e;
            cells += 1;
        } else {
            tail_obs += o;
            tail_exp += e;
        }
    }
    if tail_exp > 0.0 {
        chi2 += (tail_obs - tail_exp).powi(2) / tail_exp;
        cells += 1;
    }
    assert!(cells >= 2, "chi-square needs at least two cells");
    let dist = ChiSquared::new((cells - 1) as f64).unwrap();
    1.0 - dist.cdf(chi2)
}

/// Large-N expansion of the detected one-vs-sum correlation.
pub fn eps_sum_expansion(eta: f64, beta_1: f64, n_total: f64) -> f64 {
    1.0 - (1.0 - eta) / (eta * beta_1 * n_total)
}

/// Large-N expansion of the detected arm-2/arm-3 correlation.
pub fn eps_23_expansion(eta: f64, beta_2: f64, beta_3: f64, n_total: f64) -> f64 {
    1.0 - (beta_2 + beta_3) / (2.0 * eta * beta_2 * beta_3 * n_total)
}

/// Large-N expansion of the detected mode-1-vs-arm-k correlation.
pub fn eps_1k_expansion(eta: f64, beta_1: f64, beta_k: f64, n_total: f64) -> f64 {
    1.0 - (beta_1 + beta_k - 2.0 * eta * beta_k) / (2.0 * eta * beta_1 * beta_k * n_total)
}

pub fn rel_err(actual: f64, expected: f64) -> f64 {
    (actual - expected).abs() / expected.abs().max(1e-300)
}
