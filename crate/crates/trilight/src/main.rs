//! Command-line driver for the tripartite-light toolkit.
//!
//! Subcommands map onto the pipeline stages: `dynamics` (mean-photon tables),
//! `pmf` (joint/marginal evaluation), `sample`/`dark` (Monte Carlo runs),
//! `estimate` (statistics of a run), `scan` (coupling-grid sweeps) and `fit`
//! (pump-scan fitting). Shared physics and noise parameters are accepted as
//! flags or from a TOML config file; flags override file values. All floats
//! print with 17 significant digits and failures exit nonzero with a single
//! `error: ...` line on stderr.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use trilight::io::{self, fmt_float};
use trilight::{
    estimate_statistics, fit_pump_scan, joint_pmf, marginal_pmf, mode_means, run_scan,
    sample_dark_run, sample_run, CouplingConfig, DetectionConfig, FitSpec, ModeMeans, NoiseModel,
    Param, Regime, ScanConfig,
};

#[derive(Parser)]
#[command(name = "trilight", version, about = "Tripartite photon-correlation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mean photon numbers over an interaction-length or coupling grid.
    Dynamics {
        #[command(flatten)]
        shared: SharedArgs,
        /// Sweep z over "start:stop:count" (overrides --z)
        #[arg(long)]
        z_grid: Option<String>,
        /// Sweep g1_sq over "start:stop:count" or "v1,v2,..."
        #[arg(long)]
        g1_grid: Option<String>,
        /// Sweep g2_sq over "start:stop:count" or "v1,v2,..."
        #[arg(long)]
        g2_grid: Option<String>,
    },
    /// Evaluate the joint or marginal photon-number distribution.
    Pmf {
        #[command(flatten)]
        shared: SharedArgs,
        /// Joint probability of counts "n,p,r"
        #[arg(long, conflicts_with = "marginal")]
        joint: Option<String>,
        /// Marginal probability "mode,n"
        #[arg(long)]
        marginal: Option<String>,
    },
    /// Generate a seeded Monte Carlo signal run (CSV + metadata sidecar).
    Sample {
        #[command(flatten)]
        shared: SharedArgs,
    },
    /// Generate a dark run: electronic noise only.
    Dark {
        #[command(flatten)]
        shared: SharedArgs,
    },
    /// Estimate means, correlations and noise reduction from a saved run.
    Estimate {
        /// Signal run CSV (with sidecar)
        #[arg(long = "in")]
        input: PathBuf,
        /// Dark run CSV to subtract (with sidecar)
        #[arg(long)]
        dark: Option<PathBuf>,
        /// Emit a one-line CSV row instead of the key-value report
        #[arg(long)]
        csv: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep a coupling grid: analytic and Monte Carlo columns per point.
    Scan {
        #[command(flatten)]
        shared: SharedArgs,
        /// g1_sq grid: "start:stop:count" or "v1,v2,..."
        #[arg(long)]
        g1_grid: Option<String>,
        /// g2_sq grid: "start:stop:count" or "v1,v2,..."
        #[arg(long)]
        g2_grid: Option<String>,
    },
    /// Fit a pump scan (x,M1,Msum CSV + sidecar) to the mean-photon model.
    Fit {
        /// Scan data CSV (with sidecar naming the scanned axis and z)
        #[arg(long = "in")]
        input: PathBuf,
        /// Parameters to float: comma list of coupling,eta1,eta-sum,mu-scale
        #[arg(long, default_value = "coupling,eta1,eta-sum")]
        free: String,
        #[arg(long)]
        init_coupling: Option<f64>,
        #[arg(long, default_value_t = 0.3)]
        init_eta1: f64,
        #[arg(long, default_value_t = 0.3)]
        init_eta_sum: f64,
        #[arg(long, default_value_t = 1.0)]
        init_mu_scale: f64,
        /// Coupling bounds "lo:hi" (defaults to the scan range widened 100x)
        #[arg(long)]
        coupling_bounds: Option<String>,
        /// Residual-bootstrap resamples for confidence intervals
        #[arg(long, default_value_t = 200)]
        resamples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Physics, detection and noise flags shared by most subcommands. Every value
/// can also come from `--config`; flags win.
#[derive(Args, Clone)]
struct SharedArgs {
    /// Squared coupling of the downconversion link (m^-2)
    #[arg(long)]
    g1_sq: Option<f64>,
    /// Squared coupling of the upconversion link (m^-2)
    #[arg(long)]
    g2_sq: Option<f64>,
    /// Effective interaction length (m)
    #[arg(long)]
    z: Option<f64>,
    /// Mean photons in mode 1 (alternative to couplings; requires n2, n3)
    #[arg(long)]
    n1: Option<f64>,
    #[arg(long)]
    n2: Option<f64>,
    #[arg(long)]
    n3: Option<f64>,
    /// Uniform quantum efficiency for all arms
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    eta1: Option<f64>,
    #[arg(long)]
    eta2: Option<f64>,
    #[arg(long)]
    eta3: Option<f64>,
    /// Temporal modes per shot
    #[arg(long)]
    mu: Option<u32>,
    /// Electronic noise sigma per arm: single value or "a,b,c"
    #[arg(long)]
    sigma_el: Option<String>,
    /// Mean stray thermal photons per arm and temporal mode: value or "a,b,c"
    #[arg(long)]
    spurious: Option<String>,
    /// Collected coherence-area fraction per arm: value or "a,b,c"
    #[arg(long)]
    collect: Option<String>,
    #[arg(long)]
    shots: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output path (stdout when omitted, where applicable)
    #[arg(long)]
    out: Option<PathBuf>,
    /// TOML config file supplying any of the above
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Scalar-or-triple noise entry in config files.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
enum Triple {
    Scalar(f64),
    PerArm([f64; 3]),
}

impl Triple {
    fn resolve(self) -> [f64; 3] {
        match self {
            Triple::Scalar(v) => [v; 3],
            Triple::PerArm(a) => a,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    g1_sq: Option<f64>,
    g2_sq: Option<f64>,
    z: Option<f64>,
    n1: Option<f64>,
    n2: Option<f64>,
    n3: Option<f64>,
    eta: Option<f64>,
    eta1: Option<f64>,
    eta2: Option<f64>,
    eta3: Option<f64>,
    mu: Option<u32>,
    sigma_el: Option<Triple>,
    spurious: Option<Triple>,
    collect: Option<Triple>,
    shots: Option<usize>,
    seed: Option<u64>,
    g1_grid: Option<Vec<f64>>,
    g2_grid: Option<Vec<f64>>,
    out: Option<PathBuf>,
}

/// Flag and config values merged, flags first.
struct Resolved {
    args: SharedArgs,
    file: ConfigFile,
}

impl Resolved {
    fn new(args: &SharedArgs) -> Result<Self> {
        let file = match &args.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                toml::from_str(&text)
                    .with_context(|| format!("parsing config {}", path.display()))?
            }
            None => ConfigFile::default(),
        };
        Ok(Self {
            args: args.clone(),
            file,
        })
    }

    fn z(&self) -> f64 {
        self.args.z.or(self.file.z).unwrap_or(1.0)
    }

    fn couplings(&self) -> Option<CouplingConfig> {
        let g1_sq = self.args.g1_sq.or(self.file.g1_sq)?;
        let g2_sq = self.args.g2_sq.or(self.file.g2_sq)?;
        Some(CouplingConfig {
            g1_sq,
            g2_sq,
            z: self.z(),
        })
    }

    /// Mode means from explicit `--n1/--n2/--n3` or from the couplings.
    fn means(&self) -> Result<(ModeMeans, Option<CouplingConfig>)> {
        let n1 = self.args.n1.or(self.file.n1);
        let n2 = self.args.n2.or(self.file.n2);
        let n3 = self.args.n3.or(self.file.n3);
        match (n1, n2, n3) {
            (Some(n1), Some(n2), Some(n3)) => Ok((ModeMeans::new(n1, n2, n3)?, None)),
            (None, None, None) => {
                let coupling = self.couplings().ok_or_else(|| {
                    anyhow!("specify either --g1-sq/--g2-sq or all of --n1/--n2/--n3")
                })?;
                Ok((mode_means(&coupling)?, Some(coupling)))
            }
            _ => bail!("--n1, --n2 and --n3 must be given together"),
        }
    }

    fn detection(&self) -> Result<DetectionConfig> {
        if let Some(eta) = self.args.eta.or(self.file.eta) {
            return Ok(DetectionConfig::uniform(eta)?);
        }
        let e1 = self.args.eta1.or(self.file.eta1);
        let e2 = self.args.eta2.or(self.file.eta2);
        let e3 = self.args.eta3.or(self.file.eta3);
        match (e1, e2, e3) {
            (None, None, None) => Ok(DetectionConfig::uniform(1.0)?),
            _ => Ok(DetectionConfig::per_arm(
                e1.unwrap_or(1.0),
                e2.unwrap_or(1.0),
                e3.unwrap_or(1.0),
            )?),
        }
    }

    fn triple(flag: &Option<String>, file: Option<Triple>, default: f64) -> Result<[f64; 3]> {
        if let Some(text) = flag {
            return parse_triple(text);
        }
        Ok(file.map(Triple::resolve).unwrap_or([default; 3]))
    }

    fn noise(&self) -> Result<NoiseModel> {
        let model = NoiseModel {
            mu: self.args.mu.or(self.file.mu).unwrap_or(1),
            sigma_el: Self::triple(&self.args.sigma_el, self.file.sigma_el, 0.0)?,
            spurious: Self::triple(&self.args.spurious, self.file.spurious, 0.0)?,
            collect: Self::triple(&self.args.collect, self.file.collect, 1.0)?,
        };
        model.validate()?;
        Ok(model)
    }

    fn shots(&self) -> usize {
        self.args.shots.or(self.file.shots).unwrap_or(50_000)
    }

    fn seed(&self) -> u64 {
        self.args.seed.or(self.file.seed).unwrap_or(0)
    }

    fn out(&self) -> Option<PathBuf> {
        self.args.out.clone().or_else(|| self.file.out.clone())
    }

    fn grid(&self, flag: &Option<String>, file: &Option<Vec<f64>>) -> Result<Option<Vec<f64>>> {
        if let Some(text) = flag {
            return Ok(Some(parse_grid(text)?));
        }
        Ok(file.clone())
    }
}

fn parse_triple(text: &str) -> Result<[f64; 3]> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("parsing triple {text:?}"))?;
    match parts.as_slice() {
        [v] => Ok([*v; 3]),
        [a, b, c] => Ok([*a, *b, *c]),
        _ => bail!("expected one value or three comma-separated values, got {text:?}"),
    }
}

/// "start:stop:count" linspace or "v1,v2,..." list.
fn parse_grid(text: &str) -> Result<Vec<f64>> {
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            bail!("grid {text:?} must be start:stop:count");
        }
        let start: f64 = parts[0].trim().parse().context("grid start")?;
        let stop: f64 = parts[1].trim().parse().context("grid stop")?;
        let count: usize = parts[2].trim().parse().context("grid count")?;
        if count < 1 {
            bail!("grid count must be positive");
        }
        if count == 1 {
            return Ok(vec![start]);
        }
        Ok((0..count)
            .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
            .collect())
    } else {
        text.split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .with_context(|| format!("grid value {p:?}"))
            })
            .collect()
    }
}

fn parse_pair(text: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 2 {
        bail!("expected lo:hi, got {text:?}");
    }
    Ok((
        parts[0].trim().parse().context("lower bound")?,
        parts[1].trim().parse().context("upper bound")?,
    ))
}

fn regime_name(regime: Regime) -> &'static str {
    match regime {
        Regime::Oscillatory => "oscillatory",
        Regime::Exponential => "exponential",
        Regime::Degenerate => "degenerate",
    }
}

fn cmd_dynamics(
    shared: &SharedArgs,
    z_grid: &Option<String>,
    g1_grid: &Option<String>,
    g2_grid: &Option<String>,
) -> Result<()> {
    let resolved = Resolved::new(shared)?;
    let base = resolved
        .couplings()
        .ok_or_else(|| anyhow!("dynamics requires --g1-sq and --g2-sq"))?;

    let mut rows: Vec<CouplingConfig> = Vec::new();
    if let Some(text) = z_grid {
        for z in parse_grid(text)? {
            rows.push(CouplingConfig { z, ..base });
        }
    } else if let Some(text) = g1_grid {
        for g1_sq in parse_grid(text)? {
            rows.push(CouplingConfig { g1_sq, ..base });
        }
    } else if let Some(text) = g2_grid {
        for g2_sq in parse_grid(text)? {
            rows.push(CouplingConfig { g2_sq, ..base });
        }
    } else {
        rows.push(base);
    }

    let mut out = String::from("g1_sq,g2_sq,z,regime,n1,n2,n3\n");
    for cfg in rows {
        let m = mode_means(&cfg)?;
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt_float(cfg.g1_sq),
            fmt_float(cfg.g2_sq),
            fmt_float(cfg.z),
            regime_name(cfg.regime()),
            fmt_float(m.n1),
            fmt_float(m.n2),
            fmt_float(m.n3)
        ));
    }
    io::write_text(&out, resolved.out().as_deref())?;
    Ok(())
}

fn cmd_pmf(shared: &SharedArgs, joint: &Option<String>, marginal: &Option<String>) -> Result<()> {
    let resolved = Resolved::new(shared)?;
    let (means, _) = resolved.means()?;
    let value = match (joint, marginal) {
        (Some(text), None) => {
            let counts: Vec<u64> = text
                .split(',')
                .map(|p| p.trim().parse::<u64>())
                .collect::<std::result::Result<_, _>>()
                .with_context(|| format!("parsing counts {text:?}"))?;
            let [n, p, r] = counts.as_slice() else {
                bail!("--joint expects n,p,r");
            };
            joint_pmf(&means, *n, *p, *r)?
        }
        (None, Some(text)) => {
            let parts: Vec<u64> = text
                .split(',')
                .map(|p| p.trim().parse::<u64>())
                .collect::<std::result::Result<_, _>>()
                .with_context(|| format!("parsing {text:?}"))?;
            let [mode, n] = parts.as_slice() else {
                bail!("--marginal expects mode,n");
            };
            marginal_pmf(&means, *mode as usize, *n)?
        }
        _ => bail!("pmf requires exactly one of --joint or --marginal"),
    };
    io::write_text(
        &format!("{}\n", fmt_float(value)),
        resolved.out().as_deref(),
    )?;
    Ok(())
}

fn cmd_sample(shared: &SharedArgs, dark: bool) -> Result<()> {
    let resolved = Resolved::new(shared)?;
    let detection = resolved.detection()?;
    let noise = resolved.noise()?;
    let shots = resolved.shots();
    let seed = resolved.seed();
    let out = resolved
        .out()
        .ok_or_else(|| anyhow!("--out is required to store the run"))?;

    let set = if dark {
        sample_dark_run(&detection, &noise, shots, seed)?
    } else {
        let (means, couplings) = resolved.means()?;
        let mut set = sample_run(&means, &detection, &noise, shots, seed)?;
        if let Some(c) = couplings {
            set = trilight::sampling::ShotSet::from_records(
                set.records().to_vec(),
                trilight::sampling::RunMeta {
                    couplings: Some(c),
                    ..set.meta().clone()
                },
            )?;
        }
        set
    };
    io::write_shot_set(&set, &out)?;
    eprintln!("wrote {} shots to {}", set.len(), out.display());
    Ok(())
}

fn cmd_estimate(
    input: &Path,
    dark: &Option<PathBuf>,
    csv: bool,
    out: &Option<PathBuf>,
) -> Result<()> {
    let signal = io::read_shot_set(input)?;
    let dark_set = dark.as_ref().map(|p| io::read_shot_set(p)).transpose()?;
    let report = estimate_statistics(&signal, dark_set.as_ref())?;
    let text = if csv {
        format!(
            "{}\n{}\n",
            io::ESTIMATE_CSV_HEADER,
            io::estimate_csv_row(&report)
        )
    } else {
        io::estimate_report_text(&report)
    };
    io::write_text(&text, out.as_deref())?;
    Ok(())
}

fn cmd_scan(shared: &SharedArgs, g1_grid: &Option<String>, g2_grid: &Option<String>) -> Result<()> {
    let resolved = Resolved::new(shared)?;
    let g1 = resolved
        .grid(g1_grid, &resolved.file.g1_grid.clone())?
        .ok_or_else(|| anyhow!("scan requires --g1-grid (flag or config)"))?;
    let g2 = resolved
        .grid(g2_grid, &resolved.file.g2_grid.clone())?
        .ok_or_else(|| anyhow!("scan requires --g2-grid (flag or config)"))?;
    let config = ScanConfig {
        g1_grid: g1,
        g2_grid: g2,
        z: resolved.z(),
        detection: resolved.detection()?,
        noise: resolved.noise()?,
        shots: resolved.shots(),
        seed: resolved.seed(),
    };
    let rows = run_scan(&config)?;
    io::write_text(
        &trilight::scan::scan_table_csv(&rows),
        resolved.out().as_deref(),
    )?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_fit(
    input: &Path,
    free: &str,
    init_coupling: Option<f64>,
    init_eta1: f64,
    init_eta_sum: f64,
    init_mu_scale: f64,
    coupling_bounds: &Option<String>,
    resamples: usize,
    seed: u64,
    out: &Option<PathBuf>,
) -> Result<()> {
    let data = io::read_scan_data(input)?;
    let free_set: Vec<&str> = free.split(',').map(str::trim).collect();
    for name in &free_set {
        if !["coupling", "eta1", "eta-sum", "mu-scale"].contains(name) {
            bail!("unknown free parameter {name:?}");
        }
    }
    let is_free = |name: &str| free_set.contains(&name);

    let x_lo = data.points.first().map(|p| p.x).unwrap_or(1.0);
    let x_hi = data.points.last().map(|p| p.x).unwrap_or(1.0);
    let coupling_init = init_coupling.unwrap_or(0.5 * (x_lo + x_hi));
    let (c_lo, c_hi) = match coupling_bounds {
        Some(text) => parse_pair(text)?,
        None => (x_lo / 100.0, x_hi * 100.0),
    };

    let param = |free: bool, init: f64, lo: f64, hi: f64| {
        if free {
            Param::free(init, lo, hi)
        } else {
            Param::fixed(init)
        }
    };
    let spec = FitSpec {
        fixed_coupling: param(is_free("coupling"), coupling_init, c_lo, c_hi),
        eta_1: param(is_free("eta1"), init_eta1, 0.001, 1.0),
        eta_sum: param(is_free("eta-sum"), init_eta_sum, 0.001, 1.0),
        mu_scale: param(is_free("mu-scale"), init_mu_scale, 1e-6, 1e9),
        bootstrap_resamples: resamples,
        seed,
    };
    let result = fit_pump_scan(&data, &spec)?;
    io::write_text(&io::fit_result_text(&result), out.as_deref())?;
    Ok(())
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Dynamics {
            shared,
            z_grid,
            g1_grid,
            g2_grid,
        } => cmd_dynamics(shared, z_grid, g1_grid, g2_grid),
        Command::Pmf {
            shared,
            joint,
            marginal,
        } => cmd_pmf(shared, joint, marginal),
        Command::Sample { shared } => cmd_sample(shared, false),
        Command::Dark { shared } => cmd_sample(shared, true),
        Command::Estimate {
            input,
            dark,
            csv,
            out,
        } => cmd_estimate(input, dark, *csv, out),
        Command::Scan {
            shared,
            g1_grid,
            g2_grid,
        } => cmd_scan(shared, g1_grid, g2_grid),
        Command::Fit {
            input,
            free,
            init_coupling,
            init_eta1,
            init_eta_sum,
            init_mu_scale,
            coupling_bounds,
            resamples,
            seed,
            out,
        } => cmd_fit(
            input,
            free,
            *init_coupling,
            *init_eta1,
            *init_eta_sum,
            *init_mu_scale,
            coupling_bounds,
            *resamples,
            *seed,
            out,
        ),
    }
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
