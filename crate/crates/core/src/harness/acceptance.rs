//! The cross-module acceptance suite: twelve numbered criteria spanning
//! kernel constants, Monte Carlo ↔ ODE agreement, spectral thresholds,
//! moment inequalities, thinning exactness, and artifact determinism.
//!
//! Each criterion is a self-contained check with frozen seeds; the CLI
//! `check` subcommand and the acceptance integration tests both call into
//! this module, printing one pass/fail line per criterion.

use crate::error::Result;
use crate::harness::scenario::{
    outputs_identical, rerun_from_manifest, run_scenario, RunManifest, Scenario, ScenarioKind,
};
use crate::kernels::{kernel_moments, CollisionKernel};
use crate::moments::{
    evolve, find_povzner_constant, povzner_check, sample_povzner_triple, MomentMatrix,
    MomentOperator,
};
use crate::sim::{self, InitialCondition, SimConfig};
use crate::spectral;
use crate::stats::{chi_square_exponential, fit_log_slope};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, OnceLock};

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone)]
pub struct CriterionReport {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CriterionReport {
    pub fn line(&self) -> String {
        format!(
            "{} {:>2}  {:<30} {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail
        )
    }
}

pub const CRITERION_COUNT: u32 = 12;

const NAMES: [&str; 12] = [
    "kernel-constants",
    "equilibrium-preservation",
    "source-constant-adjudication",
    "subcritical-mc-vs-ode",
    "threshold-k0",
    "supercritical-growth-rate",
    "large-k-asymptotics",
    "reconstruction-roundtrip",
    "povzner-constants",
    "hard-potential-stationarity",
    "thinning-exactness",
    "scenario-determinism",
];

/// Run one criterion (1-based id); errors are reported as failures.
pub fn criterion(id: u32) -> CriterionReport {
    assert!((1..=CRITERION_COUNT).contains(&id), "criterion id {id}");
    let result = match id {
        1 => c01_kernel_constants(),
        2 => c02_equilibrium_preservation(),
        3 => c03_source_constant(),
        4 => c04_subcritical_agreement(),
        5 => c05_threshold(),
        6 => c06_growth_rate(),
        7 => c07_large_k(),
        8 => c08_reconstruction(),
        9 => c09_povzner(),
        10 => c10_hard_potential(),
        11 => c11_thinning(),
        12 => c12_determinism(),
        _ => unreachable!(),
    };
    let (passed, detail) = result.unwrap_or_else(|e| (false, format!("error: {e}")));
    CriterionReport {
        id,
        name: NAMES[(id - 1) as usize],
        passed,
        detail,
    }
}

/// Run the whole suite in order.
pub fn run_all() -> Vec<CriterionReport> {
    (1..=CRITERION_COUNT).map(criterion).collect()
}

// ---------------------------------------------------------------------------
// Shared scenario artifacts (each preset executes once per process)
// ---------------------------------------------------------------------------

struct ScenarioArtifacts {
    dir: PathBuf,
    manifest: RunManifest,
    _keep: tempfile::TempDir,
}

fn scenario_artifacts(kind: ScenarioKind) -> Result<&'static ScenarioArtifacts> {
    static CACHE: OnceLock<Mutex<HashMap<ScenarioKind, &'static ScenarioArtifacts>>> =
        OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    // Holding the lock while running serializes scenarios, which keeps the
    // particle engine from oversubscribing the thread pool.
    let mut guard = cache.lock().unwrap();
    if let Some(art) = guard.get(&kind) {
        return Ok(art);
    }
    let tmp = tempfile::Builder::new()
        .prefix(&format!("shearbolt-{}-", kind.name()))
        .tempdir()?;
    let manifest = run_scenario(&Scenario::preset(kind), tmp.path())?;
    let art: &'static ScenarioArtifacts = Box::leak(Box::new(ScenarioArtifacts {
        dir: tmp.path().to_path_buf(),
        manifest,
        _keep: tmp,
    }));
    guard.insert(kind, art);
    Ok(art)
}

/// Manifest of a cached preset run (for auxiliary assertions in tests).
pub fn cached_scenario(kind: ScenarioKind) -> Result<(&'static Path, &'static RunManifest)> {
    let art = scenario_artifacts(kind)?;
    Ok((art.dir.as_path(), &art.manifest))
}

fn manifest_verdicts(kind: ScenarioKind, checks: &[&str]) -> Result<(bool, String)> {
    let art = scenario_artifacts(kind)?;
    let mut passed = true;
    let mut parts = Vec::new();
    for check in checks {
        match art.manifest.verdict(check) {
            Some(v) => {
                passed &= v.passed;
                parts.push(format!("{}: {}", check, v.detail));
            }
            None => {
                passed = false;
                parts.push(format!("{check}: missing verdict"));
            }
        }
    }
    Ok((passed, parts.join("; ")))
}

fn reference_rates() -> Result<(f64, f64, f64)> {
    let km = kernel_moments(&CollisionKernel::constant(0.0)?)?;
    Ok((km.c1(), km.c2(), km.beta))
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

/// 1: closed-form angular moments of b ≡ 1 to 1e−10 relative.
fn c01_kernel_constants() -> Result<(bool, String)> {
    let km = kernel_moments(&CollisionKernel::constant(0.0)?)?;
    let targets = [
        (km.alpha, 4.0 * PI / 5.0, "alpha"),
        (km.beta, 4.0 * PI / 3.0, "beta"),
        (km.b_l1, 4.0 * PI, "|b|"),
    ];
    let worst = targets
        .iter()
        .map(|(got, want, _)| (got - want).abs() / want)
        .fold(0.0, f64::max);
    Ok((
        worst <= 1e-10,
        format!(
            "alpha = {:.12}, beta = {:.12}, |b| = {:.12}; worst rel err {worst:.2e}",
            km.alpha, km.beta, km.b_l1
        ),
    ))
}

/// 2: γ=0, K=0, N=10⁵ Maxwellian start stays within 4 SE of the identity.
fn c02_equilibrium_preservation() -> Result<(bool, String)> {
    manifest_verdicts(ScenarioKind::RelaxK0, &["identity-within-4se"])
}

/// 3: point-mass trace relaxation matches the c = β source and excludes
/// c = β/3 by more than 10 SE at the final time.
fn c03_source_constant() -> Result<(bool, String)> {
    let (_, _, beta) = reference_rates()?;
    let times = vec![0.05, 0.12, 0.24];
    let config = SimConfig {
        k: 0.0,
        kernel: CollisionKernel::constant(0.0)?,
        n_particles: 100_000,
        t_end: 0.24,
        substep: None,
        seed: 2301,
        initial_condition: InitialCondition::PointMass([2.0, 0.0, 0.0]),
        record_times: times.clone(),
        s_moments: vec![2.0],
    };
    let (traj, _) = sim::run(&config)?;
    let mut worst = 0.0f64;
    for est in &traj {
        let ms2 = est.ms(2.0).expect("s = 2 recorded");
        let target = 3.0 + (-beta * est.time).exp();
        worst = worst.max((ms2.mean - target).abs() / ms2.se);
    }
    let last = traj.last().unwrap();
    let ms2 = last.ms(2.0).unwrap();
    let third = 1.0 + 3.0 * (-beta * last.time).exp();
    let exclusion = (ms2.mean - third).abs() / ms2.se;
    Ok((
        worst < 4.0 && exclusion > 10.0,
        format!(
            "worst |z| vs c=beta: {worst:.2}; c=beta/3 excluded by {exclusion:.0} SE"
        ),
    ))
}

/// 4: K=1, N=2×10⁵ Monte Carlo matches the moment ODE at t ∈ {0.5,1,2,5}.
fn c04_subcritical_agreement() -> Result<(bool, String)> {
    manifest_verdicts(ScenarioKind::Subcritical, &["mc-matches-ode-4se"])
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    debug_assert!(f(lo) < 0.0 && f(hi) > 0.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// 5: the closed-form threshold agrees with a dense-eigensolver bracket and
/// a cubic-root bracket to 1e−8, and with the quoted value 10.5972.
fn c05_threshold() -> Result<(bool, String)> {
    let (c1, c2, beta) = reference_rates()?;
    let k0 = spectral::find_k0(c1, c2);
    let dense = bisect(0.8 * k0, 1.2 * k0, |k| {
        let op = MomentOperator::from_rates(c1, c2, k, beta).expect("valid rates");
        op.matrix()
            .complex_eigenvalues()
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max)
    });
    let cubic = bisect(0.8 * k0, 1.2 * k0, |k| {
        spectral::reduced_cubic_roots(c2, k).0 - c1
    });
    let quoted = (k0 - 10.5972).abs() <= 5e-4;
    let ok = (k0 - dense).abs() <= 1e-8 && (k0 - cubic).abs() <= 1e-8 && quoted;
    Ok((
        ok,
        format!(
            "K0 = {k0:.10}; dense bracket off by {:.2e}, cubic bracket off by {:.2e}",
            (k0 - dense).abs(),
            (k0 - cubic).abs()
        ),
    ))
}

/// 6: at K = 2K₀ the ODE trace grows at exactly μ (to 1e−6) and the Monte
/// Carlo fitted rate lands within 10%.
fn c06_growth_rate() -> Result<(bool, String)> {
    let (c1, c2, beta) = reference_rates()?;
    let k0 = spectral::find_k0(c1, c2);
    let k = 2.0 * k0;
    let mu = spectral::eigenvalues(c1, c2, k).mu.expect("supercritical");

    // ODE side: fit log tr M on a late window where subdominant modes have
    // decayed below rounding.
    let op = MomentOperator::from_rates(c1, c2, k, beta)?;
    let m0 = MomentMatrix::identity();
    let (t_lo, t_hi, n) = (15.0 / mu, 30.0 / mu, 200usize);
    let mut ts = Vec::with_capacity(n);
    let mut traces = Vec::with_capacity(n);
    for i in 0..n {
        let t = t_lo + (t_hi - t_lo) * i as f64 / (n - 1) as f64;
        ts.push(t);
        traces.push(evolve(&op, &m0, t)?.trace());
    }
    let ode_rate = fit_log_slope(&ts, &traces)?;
    let ode_ok = (ode_rate - mu).abs() <= 1e-6;

    let (mc_ok, mc_detail) =
        manifest_verdicts(ScenarioKind::Supercritical, &["growth-rate-within-10pct"])?;
    Ok((
        ode_ok && mc_ok,
        format!(
            "ODE rate {ode_rate:.10} vs mu {mu:.10} (|diff| {:.1e}); {mc_detail}",
            (ode_rate - mu).abs()
        ),
    ))
}

/// 7: μ(K) K^{−2/3} → (2C2)^{1/3} within 0.5% at K = 10⁵, and the rescaled
/// growing mode matches (1, −θ/2, θ²/2, θ²/2) within 1%.
fn c07_large_k() -> Result<(bool, String)> {
    let (c1, c2, _) = reference_rates()?;
    let k = 1e5;
    let theta = (2.0 * c2).cbrt();
    let mu = spectral::eigenvalues(c1, c2, k).mu.expect("supercritical");
    let mu_dev = (mu * k.powf(-2.0 / 3.0) - theta).abs() / theta;

    let mode = spectral::growing_mode(c1, c2, k)?;
    let e = mode.eigvec;
    let rescaled = [
        e.m11,
        k.cbrt() * e.m12,
        k.powf(2.0 / 3.0) * e.m22,
        k.powf(2.0 / 3.0) * e.m33,
    ];
    let target = [1.0, -theta / 2.0, theta * theta / 2.0, theta * theta / 2.0];
    let vec_dev = rescaled
        .iter()
        .zip(target)
        .map(|(got, want)| (got - want).abs() / want.abs())
        .fold(0.0, f64::max);
    Ok((
        mu_dev <= 0.005 && vec_dev <= 0.01,
        format!(
            "mu K^(-2/3) off by {:.3}%, rescaled eigenvector off by {:.3}%",
            100.0 * mu_dev,
            100.0 * vec_dev
        ),
    ))
}

/// 8: the reconstructed measure parameters reproduce the growing-mode
/// moments to 1e−10 at K ∈ {1.5K₀, 10K₀}.
fn c08_reconstruction() -> Result<(bool, String)> {
    let (c1, c2, _) = reference_rates()?;
    let k0 = spectral::find_k0(c1, c2);
    let mut worst = 0.0f64;
    for factor in [1.5, 10.0] {
        let mode = spectral::growing_mode(c1, c2, factor * k0)?;
        let params = spectral::reconstruct_measure(&mode)?;
        let back = params.moments();
        let got = back.to_vector();
        let want = mode.eigvec.to_vector();
        let scale = mode.eigvec.max_abs();
        for i in 0..6 {
            worst = worst.max((got[i] - want[i]).abs() / scale);
        }
    }
    Ok((
        worst <= 1e-10,
        format!("worst roundtrip deviation {worst:.2e} (scaled)"),
    ))
}

/// 9: machine-found Povzner constants validate 10⁶ fresh triples per
/// exponent with zero violations.
fn c09_povzner() -> Result<(bool, String)> {
    let mut all_ok = true;
    let mut parts = Vec::new();
    for (j, &s) in [2.1, 2.5, 2.9].iter().enumerate() {
        let cs = find_povzner_constant(s, 200_000, 2901 + j as u64)?;
        let mut rng = ChaCha12Rng::seed_from_u64(3901 + j as u64);
        let mut violations = 0u64;
        for _ in 0..1_000_000 {
            let (v, v_star, omega) = sample_povzner_triple(&mut rng);
            if !povzner_check(&v, &v_star, &omega, s, cs) {
                violations += 1;
            }
        }
        all_ok &= violations == 0;
        parts.push(format!("s={s}: Cs={cs}, violations={violations}"));
    }
    Ok((all_ok, parts.join("; ")))
}

/// 10: γ=0.5, K=5 hard potential settles to a bounded stationary state.
fn c10_hard_potential() -> Result<(bool, String)> {
    manifest_verdicts(ScenarioKind::HardPotential, &["stationarity", "m2-bounded"])
}

/// 11: γ=0, b≡1, K=3 collision interarrivals are exponential(4π).
fn c11_thinning() -> Result<(bool, String)> {
    let kernel = CollisionKernel::constant(0.0)?;
    let times = sim::collision_times(&kernel, 3.0, 3111, 100_000)?;
    let gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    let (chi2, p) = chi_square_exponential(&gaps, 4.0 * PI, 60)?;

    // Acceptance ratio of an ensemble run at the same shear (exactly 1 for
    // Maxwell molecules, where the event rate is constant).
    let config = SimConfig {
        k: 3.0,
        kernel,
        n_particles: 2000,
        t_end: 2.0,
        substep: None,
        seed: 3112,
        initial_condition: InitialCondition::Maxwellian,
        record_times: vec![2.0],
        s_moments: vec![2.0],
    };
    let (_, ensemble) = sim::run(&config)?;
    let ratio = ensemble.acceptance_ratio();
    Ok((
        p > 0.001,
        format!("GoF p = {p:.4} (chi2 = {chi2:.1}, 10^5 events); acceptance ratio = {ratio}"),
    ))
}

/// 12: every scenario preset rerun from its manifest reproduces its CSV
/// outputs byte for byte.
fn c12_determinism() -> Result<(bool, String)> {
    let mut all = true;
    let mut parts = Vec::new();
    for kind in ScenarioKind::ALL {
        let art = scenario_artifacts(kind)?;
        let rerun_dir = tempfile::Builder::new()
            .prefix(&format!("shearbolt-rerun-{}-", kind.name()))
            .tempdir()?;
        rerun_from_manifest(&art.dir.join("manifest.json"), rerun_dir.path())?;
        let same = outputs_identical(&art.manifest, &art.dir, rerun_dir.path())?;
        all &= same;
        parts.push(format!(
            "{}: {}",
            kind.name(),
            if same { "identical" } else { "DIVERGED" }
        ));
    }
    Ok((all, parts.join("; ")))
}
