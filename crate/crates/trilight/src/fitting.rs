//! Nonlinear least-squares fitting of pump-intensity scans.
//!
//! A scan varies one squared coupling while the other is fixed; the measured
//! per-arm means follow the closed-form mean-photon curves up to detection
//! efficiencies and a multimode scale factor:
//!
//! ```text
//! M1(x)   = eta_1   * mu_scale * N1(x)
//! Msum(x) = eta_sum * mu_scale * (N2(x) + N3(x))
//! ```
//!
//! Photon-number conservation makes the two series share their shape, so the
//! couplings are pinned by the shape and the efficiencies by the amplitudes.
//! The optimizer is derivative-free (the closed forms switch branches at the
//! regime boundary, so gradients are piecewise): a Nelder-Mead simplex gets
//! near the minimum and coordinate-wise golden-section polish finishes it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dynamics::{mode_means, CouplingConfig};
use crate::error::{Error, Result};
use crate::rng::Stream;

/// Convergence threshold: a fit is converged once a full polish cycle improves
/// the objective by less than this, relatively.
pub const CONVERGENCE_TOL: f64 = 1e-10;

/// Hard cap on objective evaluations before a fit reports non-convergence.
pub const MAX_EVALUATIONS: usize = 400_000;

const BOOTSTRAP_SALT: u64 = 0x6669_745F_6369; // "fit_ci"
const GOLDEN_ITERS: usize = 70;
const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Which squared coupling the scan varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScanAxis {
    G1Sq,
    G2Sq,
}

impl ScanAxis {
    pub fn key(&self) -> &'static str {
        match self {
            ScanAxis::G1Sq => "g1_sq",
            ScanAxis::G2Sq => "g2_sq",
        }
    }
}

/// One scan point: the scanned squared coupling and the two measured means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub x: f64,
    pub m1: f64,
    pub msum: f64,
}

/// A pump-intensity scan: detected means versus one squared coupling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanData {
    pub points: Vec<ScanPoint>,
    pub scanned_axis: ScanAxis,
    pub z: f64,
}

impl ScanData {
    pub fn validate(&self) -> Result<()> {
        if self.points.len() < 4 {
            return Err(Error::InvalidScanData(format!(
                "need at least 4 scan points, got {}",
                self.points.len()
            )));
        }
        for w in self.points.windows(2) {
            if !(w[1].x > w[0].x) {
                return Err(Error::InvalidScanData(format!(
                    "scan positions must be strictly increasing ({} then {})",
                    w[0].x, w[1].x
                )));
            }
        }
        for p in &self.points {
            if !(p.m1 >= 0.0 && p.msum >= 0.0 && p.x.is_finite()) {
                return Err(Error::InvalidScanData(format!(
                    "invalid scan point (x={}, m1={}, msum={})",
                    p.x, p.m1, p.msum
                )));
            }
        }
        if !(self.z.is_finite() && self.z >= 0.0) {
            return Err(Error::InvalidScanData(format!("invalid z = {}", self.z)));
        }
        Ok(())
    }
}

/// Mean photons in mode 1 at scan position `x`.
pub fn scan_model_n1(axis: ScanAxis, x: f64, fixed_coupling: f64, z: f64) -> Result<f64> {
    let (g1_sq, g2_sq) = match axis {
        ScanAxis::G1Sq => (x, fixed_coupling),
        ScanAxis::G2Sq => (fixed_coupling, x),
    };
    Ok(mode_means(&CouplingConfig { g1_sq, g2_sq, z })?.n1)
}

/// Build a noiseless scan from model parameters.
pub fn synthesize_scan(
    axis: ScanAxis,
    xs: &[f64],
    fixed_coupling: f64,
    z: f64,
    eta_1: f64,
    eta_sum: f64,
    mu_scale: f64,
) -> Result<ScanData> {
    let points = xs
        .iter()
        .map(|&x| {
            let n1 = scan_model_n1(axis, x, fixed_coupling, z)?;
            Ok(ScanPoint {
                x,
                m1: eta_1 * mu_scale * n1,
                msum: eta_sum * mu_scale * n1,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let data = ScanData {
        points,
        scanned_axis: axis,
        z,
    };
    data.validate()?;
    Ok(data)
}

/// A model parameter: held fixed or optimized within bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Param {
    Fixed(f64),
    Free { init: f64, lo: f64, hi: f64 },
}

impl Param {
    pub fn free(init: f64, lo: f64, hi: f64) -> Self {
        Param::Free { init, lo, hi }
    }

    pub fn fixed(value: f64) -> Self {
        Param::Fixed(value)
    }

    fn is_free(&self) -> bool {
        matches!(self, Param::Free { .. })
    }
}

/// Free-parameter selection, starting values and optimizer settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSpec {
    /// The coupling that was held fixed during the scan.
    pub fixed_coupling: Param,
    pub eta_1: Param,
    pub eta_sum: Param,
    pub mu_scale: Param,
    /// Residual-bootstrap resamples for confidence intervals (0 disables).
    pub bootstrap_resamples: usize,
    pub seed: u64,
}

impl FitSpec {
    /// Typical spec: couplings and efficiencies free, multimode scale fixed.
    pub fn new(fixed_coupling: Param, eta_1: Param, eta_sum: Param, mu_scale: Param) -> Self {
        Self {
            fixed_coupling,
            eta_1,
            eta_sum,
            mu_scale,
            bootstrap_resamples: 200,
            seed: 0,
        }
    }

    fn params(&self) -> [(&'static str, Param); 4] {
        [
            ("fixed_coupling", self.fixed_coupling),
            ("eta_1", self.eta_1),
            ("eta_sum", self.eta_sum),
            ("mu_scale", self.mu_scale),
        ]
    }

    fn validate(&self) -> Result<()> {
        if self.eta_1.is_free() && self.eta_sum.is_free() && self.mu_scale.is_free() {
            // only eta_1 * mu_scale and eta_sum * mu_scale enter the model
            return Err(Error::UnidentifiableFit);
        }
        if !self.params().iter().any(|(_, p)| p.is_free()) {
            return Err(Error::NoFreeParameters);
        }
        for (name, param) in self.params() {
            if let Param::Free { init, lo, hi } = param {
                if !(lo <= init && init <= hi) || !init.is_finite() {
                    return Err(Error::InvalidScanData(format!(
                        "parameter {name}: init {init} outside bounds [{lo}, {hi}]"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Fitted parameters with residual diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub fixed_coupling: f64,
    pub eta_1: f64,
    pub eta_sum: f64,
    pub mu_scale: f64,
    /// Joint residual sum of squares over both series.
    pub rss: f64,
    /// 95% residual-bootstrap confidence interval per free parameter.
    pub confidence: BTreeMap<String, (f64, f64)>,
    pub converged: bool,
    pub evaluations: usize,
    /// Best objective value after each accepted improvement.
    pub history: Vec<f64>,
}

struct Objective<'a> {
    data: &'a ScanData,
    names: Vec<&'static str>,
    values: [f64; 4],
    free_idx: Vec<usize>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    scale: Vec<f64>,
    evaluations: usize,
    history: Vec<f64>,
    best: f64,
}

impl<'a> Objective<'a> {
    fn new(data: &'a ScanData, spec: &FitSpec) -> Self {
        let mut names = Vec::new();
        let mut values = [0.0; 4];
        let mut free_idx = Vec::new();
        let (mut lo, mut hi, mut scale) = (Vec::new(), Vec::new(), Vec::new());
        for (slot, (name, param)) in spec.params().into_iter().enumerate() {
            match param {
                Param::Fixed(v) => values[slot] = v,
                Param::Free { init, lo: l, hi: h } => {
                    values[slot] = init;
                    names.push(name);
                    free_idx.push(slot);
                    lo.push(l);
                    hi.push(h);
                    scale.push(init.abs().max((h - l).abs() / 100.0).max(1e-12));
                }
            }
        }
        Self {
            data,
            names,
            values,
            free_idx,
            lo,
            hi,
            scale,
            evaluations: 0,
            history: Vec::new(),
            best: f64::INFINITY,
        }
    }

    fn rss(&mut self, free: &[f64]) -> f64 {
        self.evaluations += 1;
        for (k, &slot) in self.free_idx.iter().enumerate() {
            if free[k] < self.lo[k] || free[k] > self.hi[k] || !free[k].is_finite() {
                return f64::INFINITY;
            }
            self.values[slot] = free[k];
        }
        let [fixed_coupling, eta_1, eta_sum, mu_scale] = self.values;
        let mut total = 0.0;
        for p in &self.data.points {
            let n1 = match scan_model_n1(self.data.scanned_axis, p.x, fixed_coupling, self.data.z)
            {
                Ok(v) => v,
                Err(_) => return f64::INFINITY,
            };
            let r1 = eta_1 * mu_scale * n1 - p.m1;
            let rsum = eta_sum * mu_scale * n1 - p.msum;
            total += r1 * r1 + rsum * rsum;
        }
        if total < self.best {
            self.best = total;
            self.history.push(total);
        }
        total
    }
}

/// Standard Nelder-Mead on `f`, starting from `x0` with per-coordinate initial
/// steps. Runs until the simplex collapses or the iteration budget is spent.
fn nelder_mead(
    f: &mut impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    steps: &[f64],
    max_iter: usize,
) -> (Vec<f64>, f64) {
    let n = x0.len();
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += steps[i];
        let fv = f(&v);
        simplex.push((v, fv));
    }

    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if worst.is_finite() && (worst - best).abs() <= 1e-14 * (best.abs() + 1e-300) {
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|i| simplex[..n].iter().map(|(v, _)| v[i]).sum::<f64>() / n as f64)
            .collect();
        let reflect: Vec<f64> = (0..n)
            .map(|i| centroid[i] + alpha * (centroid[i] - simplex[n].0[i]))
            .collect();
        let f_reflect = f(&reflect);

        if f_reflect < simplex[0].1 {
            let expand: Vec<f64> = (0..n)
                .map(|i| centroid[i] + gamma * (reflect[i] - centroid[i]))
                .collect();
            let f_expand = f(&expand);
            simplex[n] = if f_expand < f_reflect {
                (expand, f_expand)
            } else {
                (reflect, f_reflect)
            };
        } else if f_reflect < simplex[n - 1].1 {
            simplex[n] = (reflect, f_reflect);
        } else {
            let contract: Vec<f64> = (0..n)
                .map(|i| centroid[i] + rho * (simplex[n].0[i] - centroid[i]))
                .collect();
            let f_contract = f(&contract);
            if f_contract < simplex[n].1 {
                simplex[n] = (contract, f_contract);
            } else {
                let best_point = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    for i in 0..n {
                        entry.0[i] = best_point[i] + sigma * (entry.0[i] - best_point[i]);
                    }
                    entry.1 = f(&entry.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0)
}

/// Golden-section line minimization of `f` along coordinate `coord` over
/// `[a, b]`; returns the best coordinate value and objective.
fn golden_section(
    f: &mut impl FnMut(&[f64]) -> f64,
    point: &mut Vec<f64>,
    coord: usize,
    a: f64,
    b: f64,
) -> f64 {
    let (mut a, mut b) = (a, b);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    point[coord] = c;
    let mut fc = f(point);
    point[coord] = d;
    let mut fd = f(point);
    for _ in 0..GOLDEN_ITERS {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            point[coord] = c;
            fc = f(point);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            point[coord] = d;
            fd = f(point);
        }
    }
    let (x_best, f_best) = if fc < fd { (c, fc) } else { (d, fd) };
    point[coord] = x_best;
    f_best
}

struct FitCore {
    free: Vec<f64>,
    rss: f64,
    converged: bool,
}

/// Simplex plus coordinate polish, shared by the point fit and each bootstrap
/// replicate.
fn minimize(obj: &mut Objective<'_>, init: &[f64], budget: usize) -> FitCore {
    let n = init.len();
    let lo = obj.lo.clone();
    let hi = obj.hi.clone();
    let scale = obj.scale.clone();
    let start_evals = obj.evaluations;

    let mut current = init.to_vec();
    let mut f_current = f64::INFINITY;
    let mut step_factor = 0.1;
    let mut width_factor = 0.05;
    let mut converged = false;

    'rounds: for _round in 0..8 {
        let steps: Vec<f64> = scale.iter().map(|s| s * step_factor).collect();
        let (x, fx) = {
            let mut f = |p: &[f64]| obj.rss(p);
            nelder_mead(&mut f, &current, &steps, 200 * (n + 1))
        };
        if fx < f_current {
            current = x;
            f_current = fx;
        }

        // coordinate-wise golden-section polish
        for _cycle in 0..60 {
            let f_before = f_current;
            for k in 0..n {
                let w = scale[k] * width_factor;
                let a = (current[k] - w).max(lo[k]);
                let b = (current[k] + w).min(hi[k]);
                if b <= a {
                    continue;
                }
                let best_k = current[k];
                let f_line = {
                    let mut f = |p: &[f64]| obj.rss(p);
                    golden_section(&mut f, &mut current, k, a, b)
                };
                if f_line < f_current {
                    f_current = f_line;
                } else {
                    current[k] = best_k;
                }
            }
            let improvement = (f_before - f_current) / f_before.abs().max(1e-300);
            if improvement < CONVERGENCE_TOL {
                if f_before.is_finite() {
                    converged = true;
                    break 'rounds;
                }
                break; // stuck outside the feasible region: restart smaller
            }
            if obj.evaluations - start_evals > budget {
                break 'rounds;
            }
        }
        if obj.evaluations - start_evals > budget {
            break;
        }
        step_factor *= 0.2;
        width_factor *= 0.2;
    }

    FitCore {
        free: current,
        rss: f_current,
        converged,
    }
}

/// Fit a pump scan, returning the recovered parameters, their 95% bootstrap
/// confidence intervals and residual diagnostics.
pub fn fit_pump_scan(data: &ScanData, spec: &FitSpec) -> Result<FitResult> {
    data.validate()?;
    spec.validate()?;

    let mut obj = Objective::new(data, spec);
    let init: Vec<f64> = obj.free_idx.iter().map(|&s| obj.values[s]).collect();
    let core = minimize(&mut obj, &init, MAX_EVALUATIONS);
    if !core.converged {
        return Err(Error::FitDidNotConverge {
            iterations: obj.evaluations,
            best_rss: core.rss,
        });
    }

    // Confidence intervals: resample residuals onto the fitted curve and refit
    // from the point estimate.
    let mut confidence = BTreeMap::new();
    if spec.bootstrap_resamples > 0 {
        let fitted = fitted_curve(data, &obj, &core.free);
        let res1: Vec<f64> = data
            .points
            .iter()
            .zip(&fitted)
            .map(|(p, f)| p.m1 - f.0)
            .collect();
        let res_sum: Vec<f64> = data
            .points
            .iter()
            .zip(&fitted)
            .map(|(p, f)| p.msum - f.1)
            .collect();
        let n_pts = data.points.len();
        let parent = Stream::new(spec.seed ^ BOOTSTRAP_SALT, 0);
        let mut replicates: Vec<Vec<f64>> = Vec::with_capacity(spec.bootstrap_resamples);
        for rep in 0..spec.bootstrap_resamples {
            let mut stream = parent.child(rep as u64);
            let resampled: Vec<ScanPoint> = data
                .points
                .iter()
                .zip(&fitted)
                .map(|(p, f)| {
                    let i = (stream.next_u64() % n_pts as u64) as usize;
                    let j = (stream.next_u64() % n_pts as u64) as usize;
                    ScanPoint {
                        x: p.x,
                        m1: f.0 + res1[i],
                        msum: f.1 + res_sum[j],
                    }
                })
                .collect();
            let rep_data = ScanData {
                points: resampled,
                scanned_axis: data.scanned_axis,
                z: data.z,
            };
            let mut rep_obj = Objective::new(&rep_data, spec);
            let rep_core = minimize(&mut rep_obj, &core.free, MAX_EVALUATIONS / 10);
            obj.evaluations += rep_obj.evaluations;
            if rep_core.converged {
                replicates.push(rep_core.free);
            }
        }
        for (k, name) in obj.names.iter().enumerate() {
            let mut values: Vec<f64> = replicates.iter().map(|r| r[k]).collect();
            if values.len() >= 20 {
                values.sort_by(f64::total_cmp);
                let lo_idx = ((values.len() as f64) * 0.025).floor() as usize;
                let hi_idx = (((values.len() as f64) * 0.975).ceil() as usize).min(values.len())
                    - 1;
                confidence.insert(name.to_string(), (values[lo_idx], values[hi_idx]));
            }
        }
    }

    let mut values = obj.values;
    for (k, &slot) in obj.free_idx.iter().enumerate() {
        values[slot] = core.free[k];
    }
    Ok(FitResult {
        fixed_coupling: values[0],
        eta_1: values[1],
        eta_sum: values[2],
        mu_scale: values[3],
        rss: core.rss,
        confidence,
        converged: core.converged,
        evaluations: obj.evaluations,
        history: obj.history.clone(),
    })
}

fn fitted_curve(data: &ScanData, obj: &Objective<'_>, free: &[f64]) -> Vec<(f64, f64)> {
    let mut values = obj.values;
    for (k, &slot) in obj.free_idx.iter().enumerate() {
        values[slot] = free[k];
    }
    let [fixed_coupling, eta_1, eta_sum, mu_scale] = values;
    data.points
        .iter()
        .map(|p| {
            let n1 = scan_model_n1(data.scanned_axis, p.x, fixed_coupling, data.z)
                .unwrap_or(f64::NAN);
            (eta_1 * mu_scale * n1, eta_sum * mu_scale * n1)
        })
        .collect()
}
