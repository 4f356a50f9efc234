//! Command-line interface for the sheared linear-Boltzmann toolkit.
//!
//! Exit code is 0 iff every verdict asserted by the invoked command passes.

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use shearbolt::harness::{
    acceptance,
    config::{parse_f64_list, RunSpec, SourceChoice},
    scenario::{self, run_from_spec, run_scenario, RunManifest, Scenario, ScenarioKind},
};
use shearbolt::kernels::kernel_moments;
use shearbolt::moments::{build_operator, evolve, stationary_moments, MomentMatrix};
use shearbolt::spectral;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "shearbolt",
    version,
    about = "Monte Carlo and moment analysis of a tagged particle under uniform shear"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration file (flat key = value with [sections]).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the configured RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory for CSV and manifest outputs.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Use the β/3 source constant in the moment ODE oracles.
    #[arg(long = "paper-source", global = true)]
    paper_source: bool,

    /// Number of worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a particle simulation from a config file or a named preset.
    Simulate {
        /// Scenario preset: relax_k0, subcritical, supercritical,
        /// hard_potential, k_sweep, or selfsim.
        #[arg(long)]
        scenario: Option<String>,
    },
    /// Integrate the moment ODE and report the stationary state.
    Moments {
        /// Shear rate (overrides the config).
        #[arg(long)]
        k: Option<f64>,
        /// Final time of the ODE trajectory.
        #[arg(long, default_value_t = 5.0)]
        t_end: f64,
        /// Number of output times.
        #[arg(long, default_value_t = 50)]
        steps: usize,
    },
    /// Print the spectral report (eigenvalues, threshold, growing mode).
    Spectrum {
        /// Shear rate (overrides the config).
        #[arg(long)]
        k: Option<f64>,
    },
    /// Sweep the shear rate across the stability threshold.
    ScanK {
        /// Grid of K values: comma list or start:step:stop. Defaults to the
        /// preset grid {0, 0.5, 0.9, 1.1, 2}·K₀ with asserted verdicts.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long, default_value_t = 20_000)]
        n_particles: usize,
        #[arg(long, default_value_t = 20.0)]
        t_end: f64,
    },
    /// Probe the conjectured self-similar speed profile above threshold.
    Selfsim,
    /// Run the acceptance suite: one pass/fail line per criterion.
    Check,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let source = if cli.paper_source {
        SourceChoice::BetaOverThree
    } else {
        SourceChoice::Beta
    };

    match &cli.command {
        Command::Simulate { scenario } => simulate(&cli, scenario.as_deref(), source),
        Command::Moments { k, t_end, steps } => moments(&cli, *k, *t_end, *steps, source),
        Command::Spectrum { k } => spectrum(&cli, *k),
        Command::ScanK {
            grid,
            n_particles,
            t_end,
        } => scan_k(&cli, grid.as_deref(), *n_particles, *t_end, source),
        Command::Selfsim => preset(&cli, ScenarioKind::Selfsim, source),
        Command::Check => check(),
    }
}

/// Load the config file when given, otherwise start from defaults.
fn load_spec(cli: &Cli) -> Result<RunSpec> {
    let mut spec = match &cli.config {
        Some(path) => RunSpec::from_file(path)
            .with_context(|| format!("reading {}", path.display()))?,
        None => RunSpec::default(),
    };
    if let Some(seed) = cli.seed {
        spec.seed = seed;
    }
    if cli.paper_source {
        spec.source = SourceChoice::BetaOverThree;
    }
    Ok(spec)
}

fn report_manifest(manifest: &RunManifest, dir: &Path) -> bool {
    for v in &manifest.verdicts {
        println!(
            "{} {:<32} {}",
            if v.passed { "PASS" } else { "FAIL" },
            v.check,
            v.detail
        );
    }
    println!(
        "wrote {} ({} data file{})",
        dir.join("manifest.json").display(),
        manifest.outputs.len(),
        if manifest.outputs.len() == 1 { "" } else { "s" }
    );
    manifest.all_passed()
}

fn preset(cli: &Cli, kind: ScenarioKind, source: SourceChoice) -> Result<bool> {
    let mut scenario = Scenario::preset(kind);
    scenario.source = source;
    if let Some(seed) = cli.seed {
        scenario.seed = seed;
    }
    let dir = cli.out.join(kind.name());
    let manifest = run_scenario(&scenario, &dir)?;
    Ok(report_manifest(&manifest, &dir))
}

fn simulate(cli: &Cli, scenario: Option<&str>, source: SourceChoice) -> Result<bool> {
    if let Some(name) = scenario {
        return preset(cli, ScenarioKind::parse(name)?, source);
    }
    if cli.config.is_none() {
        bail!("simulate needs --config <path> or --scenario <name>");
    }
    let spec = load_spec(cli)?;
    let dir = cli.out.join(&spec.name);
    let manifest = run_from_spec(&spec, &dir)?;
    Ok(report_manifest(&manifest, &dir))
}

fn initial_matrix(spec: &RunSpec) -> Result<MomentMatrix> {
    use shearbolt::sim::InitialCondition::*;
    Ok(match spec.initial_condition()? {
        Maxwellian => MomentMatrix::identity(),
        PointMass(v) => {
            let mut m = MomentMatrix::zeros();
            m.m11 = v[0] * v[0];
            m.m12 = v[0] * v[1];
            m.m13 = v[0] * v[2];
            m.m22 = v[1] * v[1];
            m.m23 = v[1] * v[2];
            m.m33 = v[2] * v[2];
            m
        }
        AnisotropicGaussian(d) => MomentMatrix::diagonal(d[0], d[1], d[2]),
    })
}

fn moments(cli: &Cli, k: Option<f64>, t_end: f64, steps: usize, source: SourceChoice) -> Result<bool> {
    let mut spec = load_spec(cli)?;
    if let Some(k) = k {
        spec.k = k;
    }
    spec.source = source;
    let kernel = spec.kernel()?;
    let km = kernel_moments(&kernel)?;
    let op = build_operator(&km, spec.k, spec.source.source_c(&km))?;
    let m0 = initial_matrix(&spec)?;

    std::fs::create_dir_all(&cli.out)?;
    let path = cli.out.join("ode_moments.csv");
    let mut rows = Vec::with_capacity(steps);
    for i in 0..=steps {
        let t = t_end * i as f64 / steps as f64;
        let m = evolve(&op, &m0, t)?;
        rows.push((t, m));
    }
    write_ode_csv(&path, &rows)?;

    let report = spectral::eigenvalues(km.c1(), km.c2(), spec.k);
    let stationary = if report.stable {
        Some(stationary_moments(&op)?)
    } else {
        None
    };
    let summary = serde_json::json!({
        "k": spec.k,
        "source_c": spec.source.source_c(&km),
        "k0": report.k0,
        "max_re_lambda": report.max_real_part,
        "stable": report.stable,
        "stationary": stationary.map(|m| m.to_vector().as_slice().to_vec()),
        "trajectory_csv": path.display().to_string(),
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(true)
}

fn write_ode_csv(path: &Path, rows: &[(f64, MomentMatrix)]) -> Result<()> {
    use std::io::Write;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "# shearbolt-ode-moments-v1")?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["time", "M11", "M12", "M13", "M22", "M23", "M33"])?;
    for (t, m) in rows {
        let mut row = vec![t.to_string()];
        row.extend(m.to_vector().iter().map(|x| x.to_string()));
        csv.write_record(&row)?;
    }
    csv.flush()?;
    Ok(())
}

fn spectrum(cli: &Cli, k: Option<f64>) -> Result<bool> {
    let mut spec = load_spec(cli)?;
    if let Some(k) = k {
        spec.k = k;
    }
    let km = kernel_moments(&spec.kernel()?)?;
    let report = spectral::eigenvalues(km.c1(), km.c2(), spec.k);
    let mut value = report.to_json();
    if report.mu.is_some() {
        let mode = spectral::growing_mode(km.c1(), km.c2(), spec.k)?;
        value["growing_mode"] = serde_json::to_value(&mode)?;
        match spectral::reconstruct_measure(&mode) {
            Ok(params) => value["reconstruction"] = serde_json::to_value(&params)?,
            Err(e) => value["reconstruction_error"] = serde_json::json!(e.to_string()),
        }
    }
    let text = serde_json::to_string_pretty(&value)?;
    std::fs::create_dir_all(&cli.out)?;
    std::fs::write(cli.out.join("spectrum.json"), format!("{text}\n"))?;
    println!("{text}");
    Ok(true)
}

fn scan_k(
    cli: &Cli,
    grid: Option<&str>,
    n_particles: usize,
    t_end: f64,
    source: SourceChoice,
) -> Result<bool> {
    match grid {
        None => preset(cli, ScenarioKind::KSweep, source),
        Some(text) => {
            let grid = parse_f64_list(text)?;
            let seed = cli.seed.unwrap_or(1501);
            let rows = scenario::k_sweep(&grid, n_particles, t_end, seed, source)?;
            std::fs::create_dir_all(&cli.out)?;
            let path = cli.out.join("sweep.csv");
            scenario::write_sweep_csv(&path, &rows)?;
            for row in &rows {
                println!(
                    "K = {:>9.4}: max Re lambda = {:>9.4}, MC rate = {:>8.4}, {}",
                    row.k, row.max_re_lambda, row.mc_growth_rate, row.verdict
                );
            }
            println!("wrote {}", path.display());
            Ok(true)
        }
    }
}

fn check() -> Result<bool> {
    let reports = acceptance::run_all();
    for report in &reports {
        println!("{}", report.line());
    }
    let passed = reports.iter().filter(|r| r.passed).count();
    println!("{passed}/{} criteria passed", reports.len());
    Ok(passed == reports.len())
}
