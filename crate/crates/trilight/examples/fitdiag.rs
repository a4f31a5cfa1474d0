use rand::distributions::Distribution;
use rayon::prelude::*;
use trilight::fitting::{fit_pump_scan, synthesize_scan, FitSpec, Param, ScanAxis, ScanData, ScanPoint};
use trilight::rng::Stream;

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn trial(template: &ScanData, seed: u64, truth: (f64, f64, f64)) -> Option<(f64, f64, f64)> {
    let mut stream = Stream::new(seed, 77);
    let gauss = rand_distr::Normal::new(0.0, 0.01).unwrap();
    let noisy = ScanData {
        points: template.points.iter().map(|p| ScanPoint {
            x: p.x,
            m1: p.m1 * (1.0 + gauss.sample(&mut stream)),
            msum: p.msum * (1.0 + gauss.sample(&mut stream)),
        }).collect(),
        scanned_axis: template.scanned_axis,
        z: template.z,
    };
    let spec = FitSpec {
        bootstrap_resamples: 0,
        ..FitSpec::new(
            Param::free(truth.0 * 0.6, 1.0e4, 5.0e6),
            Param::free(0.5, 0.01, 1.0),
            Param::free(0.5, 0.01, 1.0),
            Param::fixed(1.0),
        )
    };
    fit_pump_scan(&noisy, &spec).ok().map(|fit| (
        (fit.fixed_coupling - truth.0).abs() / truth.0,
        (fit.eta_1 - truth.1).abs() / truth.1,
        (fit.eta_sum - truth.2).abs() / truth.2,
    ))
}

fn study(name: &str, template: &ScanData, truth: (f64, f64, f64)) {
    let errs: Vec<Option<(f64, f64, f64)>> = (0..100u64).into_par_iter()
        .map(|s| trial(template, s, truth)).collect();
    let conv = errs.iter().filter(|e| e.is_some()).count();
    let ok_c = errs.iter().flatten().filter(|e| e.0 <= 0.05).count();
    let ok_all = errs.iter().flatten().filter(|e| e.0 <= 0.05 && e.1 <= 0.05 && e.2 <= 0.05).count();
    let max_c = errs.iter().flatten().map(|e| e.0).fold(0.0, f64::max);
    println!("{name}: converged {conv}, coupling<=5% {ok_c}/100 (max {max_c:.3}), all<=5% {ok_all}/100");
}

fn main() {
    // A: cross the regime boundary (oscillatory at small g1, amplification above)
    for (lo, hi) in [(2.0e5, 2.17e6), (1.0e5, 2.5e6), (4.0e5, 2.17e6)] {
        let t = synthesize_scan(ScanAxis::G1Sq, &linspace(lo, hi, 20), 8.17e5, 0.004, 0.31, 0.28, 1.0).unwrap();
        study(&format!("A g1 in [{lo:.2e},{hi:.2e}]"), &t, (8.17e5, 0.31, 0.28));
    }
    for (lo, hi) in [(1.97e4, 1.4e6), (1.97e4, 1.2e6)] {
        let t = synthesize_scan(ScanAxis::G2Sq, &linspace(lo, hi, 20), 1.52e6, 0.004, 0.283, 0.28, 1.0).unwrap();
        study(&format!("B g2 in [{lo:.2e},{hi:.2e}]"), &t, (1.52e6, 0.283, 0.28));
    }
}
