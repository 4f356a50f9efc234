//! Event-driven Monte Carlo for the sheared tagged particle.
//!
//! Each particle follows the characteristic flow of the transport term,
//! v(t+s) = (v₁ − K v₂ s, v₂, v₃), interrupted by collisions with the
//! Maxwellian background at state-dependent rate ν(|v|) = ‖b‖·E|v − v⋆|^γ.
//! Collisions are generated by exact thinning:
//!
//! * γ = 0: ν ≡ ‖b‖ is constant, so events come straight from an
//!   exponential clock — no rejection at all.
//! * γ > 0: within a window of length w the drifted speed is bounded by
//!   R̂ = |v|(1 + Kw), and the subadditivity (R̂ + u)^γ ≤ R̂^γ + u^γ gives a
//!   closed-form majorant rate ρ̂ = 4π b_max (R̂^γ + m_γ), m_γ = E|v⋆|^γ.
//!   Candidates arrive at rate ρ̂; the background velocity is drawn from the
//!   tilted mixture q(v⋆) ∝ M(v⋆)(R̂^γ + |v⋆|^γ) (a Maxwellian with
//!   probability R̂^γ/(R̂^γ + m_γ), else a Gamma-radius speed bias), and the
//!   event is accepted with probability
//!   (‖b‖/4πb_max) · |v − v⋆|^γ / (R̂^γ + |v⋆|^γ) ≤ 1 evaluated at the
//!   exactly drifted velocity. Accepted events then draw ω ∝ b(n·ω) and
//!   apply the collision rule. The accepted intensity telescopes to ν with
//!   no quadrature anywhere, and the majorant is refreshed from the current
//!   velocity after every candidate, so the scheme is exact, not
//!   approximate.
//!
//! Every particle owns a counter-mode RNG stream derived from (seed, index),
//! which makes runs bit-identical regardless of how rayon schedules them.

use crate::error::{Error, Result};
use crate::kernels::{
    apply_collision, kernel_moments, maxwellian_speed_moment, sample_background,
    sample_scatter_direction, CollisionKernel,
};
use crate::moments::MomentMatrix;
use crate::stats;
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Initial law of the ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitialCondition {
    /// Unit-covariance Maxwellian (the background equilibrium).
    Maxwellian,
    /// All particles start at the given velocity.
    PointMass([f64; 3]),
    /// Centered Gaussian with the given diagonal covariance.
    AnisotropicGaussian([f64; 3]),
}

impl InitialCondition {
    fn sample(&self, rng: &mut ChaCha12Rng) -> Vector3<f64> {
        match self {
            Self::Maxwellian => sample_background(rng),
            Self::PointMass(v) => Vector3::from_column_slice(v),
            Self::AnisotropicGaussian(d) => {
                let g = sample_background(rng);
                Vector3::new(d[0].sqrt() * g.x, d[1].sqrt() * g.y, d[2].sqrt() * g.z)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = |v: &[f64; 3]| v.iter().all(|x| x.is_finite());
        match self {
            Self::Maxwellian => Ok(()),
            Self::PointMass(v) if finite(v) => Ok(()),
            Self::AnisotropicGaussian(d) if finite(d) && d.iter().all(|&x| x >= 0.0) => Ok(()),
            _ => Err(Error::InvalidConfig(
                "initial condition parameters must be finite (covariances nonnegative)".into(),
            )),
        }
    }
}

/// Full specification of a simulation run.
#[derive(Debug, Clone)]
pub struct SimConfig {
    /// Shear rate K ≥ 0.
    pub k: f64,
    pub kernel: CollisionKernel,
    pub n_particles: usize,
    pub t_end: f64,
    /// Thinning window; `None` uses the default min(0.05, 0.5/(1+K)).
    pub substep: Option<f64>,
    pub seed: u64,
    pub initial_condition: InitialCondition,
    /// Strictly increasing times in [0, t_end] at which moments are recorded.
    pub record_times: Vec<f64>,
    /// Exponents s for the scalar moments E|v|^s (2 is always included).
    pub s_moments: Vec<f64>,
}

impl SimConfig {
    /// Default window: short enough that the majorant inflation factor
    /// (1 + Kτ)^γ stays within a few percent.
    pub fn effective_substep(&self) -> f64 {
        self.substep
            .unwrap_or_else(|| 0.05f64.min(0.5 / (1.0 + self.k)))
    }

    /// The s-exponent list actually recorded: sorted, deduplicated, with 2
    /// guaranteed present (the stationarity test pools over E|v|²).
    pub fn effective_s_moments(&self) -> Vec<f64> {
        let mut s = self.s_moments.clone();
        if !s.iter().any(|&x| x == 2.0) {
            s.push(2.0);
        }
        s.sort_by(f64::total_cmp);
        s.dedup();
        s
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.k.is_finite() && self.k >= 0.0) {
            return fail(format!("shear rate must be finite and >= 0, got {}", self.k));
        }
        if self.n_particles == 0 {
            return fail("n_particles must be >= 1".into());
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return fail(format!("t_end must be finite and > 0, got {}", self.t_end));
        }
        if let Some(tau) = self.substep {
            if !(tau.is_finite() && tau > 0.0 && tau <= self.t_end) {
                return fail(format!("substep must lie in (0, t_end], got {tau}"));
            }
        }
        for w in self.record_times.windows(2) {
            if w[1] <= w[0] {
                return fail("record_times must be strictly increasing".into());
            }
        }
        if self
            .record_times
            .iter()
            .any(|&t| !t.is_finite() || t < 0.0 || t > self.t_end)
        {
            return fail("record_times must lie in [0, t_end]".into());
        }
        if self.s_moments.iter().any(|&s| !s.is_finite() || s < 0.0) {
            return fail("s-moment exponents must be finite and >= 0".into());
        }
        self.initial_condition.validate()
    }
}

#[derive(Debug, Clone)]
struct Particle {
    v: Vector3<f64>,
    rng: ChaCha12Rng,
    accepted: u64,
    candidates: u64,
}

/// Empirical representation of f(t, dv): N particles with mass 1/N each,
/// their per-particle RNG streams, and collision counters.
#[derive(Debug, Clone)]
pub struct Ensemble {
    particles: Vec<Particle>,
    time: f64,
}

impl Ensemble {
    /// Build an ensemble directly from velocities (diagnostics and tests);
    /// per-particle streams are derived from `seed` as in a fresh run.
    pub fn from_velocities(velocities: Vec<Vector3<f64>>, time: f64, seed: u64) -> Self {
        let particles = velocities
            .into_iter()
            .enumerate()
            .map(|(i, v)| Particle {
                v,
                rng: particle_rng(seed, i as u64),
                accepted: 0,
                candidates: 0,
            })
            .collect();
        Self { particles, time }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn velocities(&self) -> impl ExactSizeIterator<Item = &Vector3<f64>> {
        self.particles.iter().map(|p| &p.v)
    }

    pub fn speeds(&self) -> Vec<f64> {
        self.particles.iter().map(|p| p.v.norm()).collect()
    }

    pub fn accepted_collisions(&self) -> u64 {
        self.particles.iter().map(|p| p.accepted).sum()
    }

    pub fn candidate_collisions(&self) -> u64 {
        self.particles.iter().map(|p| p.candidates).sum()
    }

    /// Fraction of candidate events accepted (1 when no thinning occurred).
    pub fn acceptance_ratio(&self) -> f64 {
        let c = self.candidate_collisions();
        if c == 0 {
            1.0
        } else {
            self.accepted_collisions() as f64 / c as f64
        }
    }
}

/// A scalar moment E|v|^s with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SMoment {
    pub s: f64,
    pub mean: f64,
    pub se: f64,
}

/// Sample moments of an ensemble at one instant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub m: MomentMatrix,
    /// Standard errors of the corresponding entries of `m`.
    pub m_se: MomentMatrix,
    /// Scalar moments E|v|^s for the requested exponents.
    pub ms: Vec<SMoment>,
    pub time: f64,
}

impl MomentEstimate {
    pub fn ms(&self, s: f64) -> Option<&SMoment> {
        self.ms.iter().find(|e| (e.s - s).abs() < 1e-12)
    }
}

/// Exact shear flow over a time step: (v₁ − K v₂ dt, v₂, v₃).
pub fn shear_drift(v: &Vector3<f64>, dt: f64, k: f64) -> Vector3<f64> {
    debug_assert!(dt >= 0.0);
    Vector3::new(v.x - k * v.y * dt, v.y, v.z)
}

fn particle_rng(seed: u64, index: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Exp(1) draw that can never return infinity (1 − U ∈ (0, 1]).
fn standard_exponential(rng: &mut ChaCha12Rng) -> f64 {
    -(1.0 - rng.random::<f64>()).ln()
}

/// Receives absolute times of accepted collisions (diagnostics only).
trait EventSink {
    fn record(&mut self, t: f64);
}

struct NoSink;

impl EventSink for NoSink {
    #[inline]
    fn record(&mut self, _t: f64) {}
}

impl EventSink for Vec<f64> {
    fn record(&mut self, t: f64) {
        self.push(t);
    }
}

/// Precomputed thinning quantities shared by all particles.
struct Engine<'a> {
    kernel: &'a CollisionKernel,
    k: f64,
    gamma: f64,
    /// ‖b‖ = total angular mass: the exact rate at γ = 0.
    b_l1: f64,
    /// E|v⋆|^γ over the background.
    m_gamma: f64,
    four_pi_b_max: f64,
    /// ‖b‖ / (4π b_max) ≤ 1, the angular part of the acceptance bound.
    accept_scale: f64,
    /// Radius law |v⋆|²/2 ~ Gamma((3+γ)/2) of the speed-tilted proposal.
    radial: Option<rand_distr::Gamma<f64>>,
}

impl<'a> Engine<'a> {
    fn new(kernel: &'a CollisionKernel, k: f64) -> Result<Self> {
        let km = kernel_moments(kernel)?;
        let gamma = kernel.gamma();
        let radial = if gamma > 0.0 {
            Some(
                rand_distr::Gamma::new((3.0 + gamma) / 2.0, 1.0)
                    .expect("gamma shape is positive"),
            )
        } else {
            None
        };
        Ok(Self {
            kernel,
            k,
            gamma,
            b_l1: km.b_l1,
            m_gamma: maxwellian_speed_moment(gamma),
            four_pi_b_max: 4.0 * std::f64::consts::PI * kernel.b_max(),
            accept_scale: km.b_l1 / (4.0 * std::f64::consts::PI * kernel.b_max()),
            radial,
        })
    }

    /// Advance one particle across a window starting at absolute time t0.
    fn advance(
        &self,
        p: &mut Particle,
        window: f64,
        t0: f64,
        sink: &mut impl EventSink,
    ) -> Result<()> {
        if self.gamma == 0.0 {
            self.advance_constant_rate(p, window, t0, sink)
        } else {
            self.advance_thinned(p, window, t0, sink)
        }
    }

    /// Maxwell molecules: the rate is exactly ‖b‖ independent of speed.
    fn advance_constant_rate(
        &self,
        p: &mut Particle,
        window: f64,
        t0: f64,
        sink: &mut impl EventSink,
    ) -> Result<()> {
        let mut remaining = window;
        loop {
            let dt = standard_exponential(&mut p.rng) / self.b_l1;
            if dt >= remaining {
                p.v = shear_drift(&p.v, remaining, self.k);
                return Ok(());
            }
            p.v = shear_drift(&p.v, dt, self.k);
            remaining -= dt;
            p.candidates += 1;
            p.accepted += 1;
            sink.record(t0 + (window - remaining));
            let v_star = sample_background(&mut p.rng);
            if (p.v - v_star).norm_squared() > 0.0 {
                let omega = sample_scatter_direction(self.kernel, &p.v, &v_star, &mut p.rng)?;
                p.v = apply_collision(&p.v, &v_star, &omega).0;
            }
            // Zero relative speed: the collision rule is the identity.
        }
    }

    /// Hard potentials: windowed majorant, refreshed after every candidate.
    fn advance_thinned(
        &self,
        p: &mut Particle,
        window: f64,
        t0: f64,
        sink: &mut impl EventSink,
    ) -> Result<()> {
        let mut remaining = window;
        loop {
            // Drift within the remaining window cannot push the speed past
            // |v|(1 + K·remaining), because |v₂| ≤ |v|.
            let r_hat = p.v.norm() * (1.0 + self.k * remaining);
            let r_hat_pow = r_hat.powf(self.gamma);
            let rho = self.four_pi_b_max * (r_hat_pow + self.m_gamma);
            let dt = standard_exponential(&mut p.rng) / rho;
            if dt >= remaining {
                p.v = shear_drift(&p.v, remaining, self.k);
                return Ok(());
            }
            p.v = shear_drift(&p.v, dt, self.k);
            remaining -= dt;
            p.candidates += 1;

            let v_star = self.sample_tilted_background(r_hat_pow, &mut p.rng);
            let rel_speed = (p.v - v_star).norm();
            if rel_speed == 0.0 {
                continue; // |v − v⋆|^γ = 0: certain rejection
            }
            let acceptance = self.accept_scale * rel_speed.powf(self.gamma)
                / (r_hat_pow + v_star.norm().powf(self.gamma));
            if acceptance > 1.0 + 1e-9 {
                return Err(Error::MajorantViolation {
                    t: t0 + (window - remaining),
                    speed: p.v.norm(),
                    envelope_speed: r_hat,
                    acceptance,
                });
            }
            if p.rng.random::<f64>() < acceptance {
                let omega = sample_scatter_direction(self.kernel, &p.v, &v_star, &mut p.rng)?;
                p.v = apply_collision(&p.v, &v_star, &omega).0;
                p.accepted += 1;
                sink.record(t0 + (window - remaining));
            }
        }
    }

    /// Draw v⋆ from q(v⋆) ∝ M(v⋆)(R̂^γ + |v⋆|^γ): plain Maxwellian with
    /// probability R̂^γ/(R̂^γ + m_γ), otherwise the |v⋆|^γ-tilted Maxwellian
    /// whose squared radius is 2·Gamma((3+γ)/2).
    fn sample_tilted_background(&self, r_hat_pow: f64, rng: &mut ChaCha12Rng) -> Vector3<f64> {
        let w_plain = r_hat_pow / (r_hat_pow + self.m_gamma);
        if rng.random::<f64>() < w_plain {
            sample_background(rng)
        } else {
            let radius = (2.0 * self.radial.expect("γ > 0 path").sample(rng)).sqrt();
            let dir: [f64; 3] = rand_distr::UnitSphere.sample(rng);
            Vector3::from_column_slice(&dir) * radius
        }
    }
}

/// A recorded moment estimate together with the cumulative collision
/// counters at that instant.
#[derive(Debug, Clone)]
pub struct TracePoint {
    pub estimate: MomentEstimate,
    pub accepted: u64,
    pub candidates: u64,
}

/// Velocities captured mid-run (per-particle diagnostics such as the weak
/// form and the self-similarity probe).
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub time: f64,
    pub velocities: Vec<Vector3<f64>>,
}

impl Snapshot {
    pub fn to_ensemble(&self, seed: u64) -> Ensemble {
        Ensemble::from_velocities(self.velocities.clone(), self.time, seed)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trajectory: Vec<TracePoint>,
    pub snapshots: Vec<Snapshot>,
    pub final_ensemble: Ensemble,
}

/// Run a simulation: returns the moment estimates at the configured record
/// times and the final ensemble. Deterministic given the config (including
/// across thread counts).
pub fn run(config: &SimConfig) -> Result<(Vec<MomentEstimate>, Ensemble)> {
    let output = run_full(config, &[])?;
    Ok((
        output.trajectory.into_iter().map(|t| t.estimate).collect(),
        output.final_ensemble,
    ))
}

/// As `run`, additionally capturing velocity snapshots at the given strictly
/// increasing times and collision counters at every record time.
pub fn run_full(config: &SimConfig, snapshot_times: &[f64]) -> Result<RunOutput> {
    config.validate()?;
    for w in snapshot_times.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::InvalidConfig(
                "snapshot times must be strictly increasing".into(),
            ));
        }
    }
    if snapshot_times
        .iter()
        .any(|&t| !t.is_finite() || t < 0.0 || t > config.t_end)
    {
        return Err(Error::InvalidConfig(
            "snapshot times must lie in [0, t_end]".into(),
        ));
    }

    let engine = Engine::new(&config.kernel, config.k)?;
    let tau = config.effective_substep();
    let s_list = config.effective_s_moments();

    let mut particles: Vec<Particle> = (0..config.n_particles)
        .into_par_iter()
        .map(|i| {
            let mut rng = particle_rng(config.seed, i as u64);
            let v = config.initial_condition.sample(&mut rng);
            Particle {
                v,
                rng,
                accepted: 0,
                candidates: 0,
            }
        })
        .collect();

    // Anchor grid: record and snapshot times plus the endpoints, each gap
    // subdivided into equal pieces no longer than the thinning window.
    let mut anchors = vec![0.0, config.t_end];
    anchors.extend_from_slice(&config.record_times);
    anchors.extend_from_slice(snapshot_times);
    anchors.sort_by(f64::total_cmp);
    anchors.dedup();

    let mut trajectory = Vec::with_capacity(config.record_times.len());
    let mut snapshots = Vec::with_capacity(snapshot_times.len());
    let is_recorded = |t: f64| config.record_times.iter().any(|&r| r == t);
    let is_snapshot = |t: f64| snapshot_times.iter().any(|&r| r == t);

    for (idx, &anchor) in anchors.iter().enumerate() {
        if idx > 0 {
            let start = anchors[idx - 1];
            let gap = anchor - start;
            let n_pieces = (gap / tau).ceil().max(1.0) as usize;
            let piece = gap / n_pieces as f64;
            for j in 0..n_pieces {
                let t0 = start + j as f64 * piece;
                particles
                    .par_iter_mut()
                    .try_for_each(|p| engine.advance(p, piece, t0, &mut NoSink))?;
            }
            if let Some(bad) = particles
                .iter()
                .position(|p| !p.v.iter().all(|x| x.is_finite()))
            {
                return Err(Error::NonFiniteVelocity {
                    index: bad,
                    t: anchor,
                });
            }
        }
        if is_snapshot(anchor) {
            snapshots.push(Snapshot {
                time: anchor,
                velocities: particles.iter().map(|p| p.v).collect(),
            });
        }
        if is_recorded(anchor) {
            let ensemble = Ensemble {
                particles: std::mem::take(&mut particles),
                time: anchor,
            };
            trajectory.push(TracePoint {
                estimate: estimate_moments(&ensemble, &s_list),
                accepted: ensemble.accepted_collisions(),
                candidates: ensemble.candidate_collisions(),
            });
            particles = ensemble.particles;
        }
    }

    Ok(RunOutput {
        trajectory,
        snapshots,
        final_ensemble: Ensemble {
            particles,
            time: config.t_end,
        },
    })
}

/// Sample moments with standard errors. The reduction runs in particle-index
/// order, so results are independent of thread scheduling.
pub fn estimate_moments(ensemble: &Ensemble, s_list: &[f64]) -> MomentEstimate {
    assert!(!ensemble.is_empty(), "ensemble must be nonempty");
    let n = ensemble.len() as f64;
    let mut sums = [0.0f64; 6];
    let mut sq = [0.0f64; 6];
    let mut s_sums = vec![0.0f64; s_list.len()];
    let mut s_sq = vec![0.0f64; s_list.len()];
    for p in &ensemble.particles {
        let v = &p.v;
        let prods = [
            v.x * v.x,
            v.x * v.y,
            v.x * v.z,
            v.y * v.y,
            v.y * v.z,
            v.z * v.z,
        ];
        for (i, x) in prods.iter().enumerate() {
            sums[i] += x;
            sq[i] += x * x;
        }
        let nsq = v.norm_squared();
        for (i, &s) in s_list.iter().enumerate() {
            let x = if s == 2.0 { nsq } else { nsq.powf(s / 2.0) };
            s_sums[i] += x;
            s_sq[i] += x * x;
        }
    }
    let se = |sum: f64, sumsq: f64| {
        if ensemble.len() < 2 {
            return 0.0;
        }
        let mean = sum / n;
        let var = ((sumsq - n * mean * mean) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    };
    MomentEstimate {
        m: MomentMatrix::new(
            sums[0] / n,
            sums[1] / n,
            sums[2] / n,
            sums[3] / n,
            sums[4] / n,
            sums[5] / n,
        ),
        m_se: MomentMatrix::new(
            se(sums[0], sq[0]),
            se(sums[1], sq[1]),
            se(sums[2], sq[2]),
            se(sums[3], sq[3]),
            se(sums[4], sq[4]),
            se(sums[5], sq[5]),
        ),
        ms: s_list
            .iter()
            .enumerate()
            .map(|(i, &s)| SMoment {
                s,
                mean: s_sums[i] / n,
                se: se(s_sums[i], s_sq[i]),
            })
            .collect(),
        time: ensemble.time,
    }
}

/// Outcome of the empirical stationarity detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Stationary,
    Drifting,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Verdict::Stationary => "stationary",
            Verdict::Drifting => "drifting",
            Verdict::Inconclusive => "inconclusive",
        };
        f.write_str(s)
    }
}

/// Compare block means of all six M_jk and of E|v|² between the last two
/// windows of the trajectory: stationary when every difference stays within
/// tol_sigma pooled standard errors, drifting when any exceeds 3·tol_sigma.
pub fn stationarity_test(
    trajectory: &[MomentEstimate],
    window: usize,
    tol_sigma: f64,
) -> Result<Verdict> {
    assert!(window >= 1 && tol_sigma > 0.0);
    if trajectory.len() < 2 * window {
        return Err(Error::TrajectoryTooShort {
            len: trajectory.len(),
            needed: 2 * window,
        });
    }
    let late = &trajectory[trajectory.len() - window..];
    let early = &trajectory[trajectory.len() - 2 * window..trajectory.len() - window];

    type Extract = fn(&MomentEstimate) -> Option<(f64, f64)>;
    let stats_list: [Extract; 7] = [
        |e| Some((e.m.m11, e.m_se.m11)),
        |e| Some((e.m.m12, e.m_se.m12)),
        |e| Some((e.m.m13, e.m_se.m13)),
        |e| Some((e.m.m22, e.m_se.m22)),
        |e| Some((e.m.m23, e.m_se.m23)),
        |e| Some((e.m.m33, e.m_se.m33)),
        |e| e.ms(2.0).map(|m| (m.mean, m.se)),
    ];

    let block = |block: &[MomentEstimate], f: Extract| -> Result<(f64, f64)> {
        let mut mean = 0.0;
        let mut var = 0.0;
        for e in block {
            let (value, se) = f(e).ok_or_else(|| {
                Error::InvalidConfig("stationarity test needs E|v|² in the trajectory".into())
            })?;
            mean += value;
            var += se * se;
        }
        let w = block.len() as f64;
        Ok((mean / w, var.sqrt() / w))
    };

    let mut all_within = true;
    for f in stats_list {
        let (m1, se1) = block(early, f)?;
        let (m2, se2) = block(late, f)?;
        let pooled = (se1 * se1 + se2 * se2).sqrt();
        let diff = (m2 - m1).abs();
        if diff > 3.0 * tol_sigma * pooled {
            return Ok(Verdict::Drifting);
        }
        if diff > tol_sigma * pooled {
            all_within = false;
        }
    }
    Ok(if all_within {
        Verdict::Stationary
    } else {
        Verdict::Inconclusive
    })
}

/// Two-sample KS distance between speeds rescaled by the conjectured
/// self-similar factor e^{−μt/2}. Report-only: the self-similar profile is a
/// conjecture, so no pass/fail contract is attached.
pub fn selfsim_diagnostic(early: &Ensemble, late: &Ensemble, mu: f64) -> Result<f64> {
    if !(mu > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "self-similar diagnostic needs mu > 0, got {mu}"
        )));
    }
    let rescale = |e: &Ensemble| -> Vec<f64> {
        let factor = (-mu * e.time() / 2.0).exp();
        e.particles.iter().map(|p| p.v.norm() * factor).collect()
    };
    Ok(stats::ks_two_sample(&rescale(early), &rescale(late)))
}

/// Absolute times of one particle's accepted collisions, for goodness-of-fit
/// diagnostics of the event stream (runs the same engine as `run`).
pub fn collision_times(
    kernel: &CollisionKernel,
    k: f64,
    seed: u64,
    n_events: usize,
) -> Result<Vec<f64>> {
    let engine = Engine::new(kernel, k)?;
    let tau = 0.05f64.min(0.5 / (1.0 + k));
    let mut rng = particle_rng(seed, 0);
    let mut particle = Particle {
        v: sample_background(&mut rng),
        rng,
        accepted: 0,
        candidates: 0,
    };
    let mut events = Vec::with_capacity(n_events);
    let mut t = 0.0;
    while events.len() < n_events {
        engine.advance(&mut particle, tau, t, &mut events)?;
        t += tau;
        if !particle.v.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFiniteVelocity { index: 0, t });
        }
    }
    events.truncate(n_events);
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn maxwell_config(n: usize, t_end: f64, k: f64, seed: u64) -> SimConfig {
        SimConfig {
            k,
            kernel: CollisionKernel::constant(0.0).unwrap(),
            n_particles: n,
            t_end,
            substep: None,
            seed,
            initial_condition: InitialCondition::Maxwellian,
            record_times: vec![t_end],
            s_moments: vec![2.0],
        }
    }

    #[test]
    fn shear_drift_closed_form() {
        let v = Vector3::new(0.0, 1.0, 0.0);
        assert_eq!(shear_drift(&v, 2.0, 1.0), Vector3::new(-2.0, 1.0, 0.0));
        let w = Vector3::new(0.3, -1.2, 0.7);
        assert_eq!(shear_drift(&w, 5.0, 0.0), w);
        let u = Vector3::new(0.3, 0.0, 0.7);
        assert_eq!(shear_drift(&u, 9.0, 4.0), u);
    }

    #[test]
    fn single_particle_moments() {
        let e = Ensemble::from_velocities(vec![Vector3::new(1.0, 2.0, 0.0)], 0.0, 0);
        let est = estimate_moments(&e, &[2.0]);
        assert_eq!(est.m.m12, 2.0);
        assert_eq!(est.m.m22, 4.0);
        assert_eq!(est.ms(2.0).unwrap().mean, 5.0);
        assert_eq!(est.m.m13, 0.0);
        assert!(est.m.is_physical(1e-12));
    }

    #[test]
    fn repeated_velocity_has_zero_standard_errors() {
        let v = Vector3::new(1.0, -2.0, 3.0);
        let e = Ensemble::from_velocities(vec![v; 1000], 0.0, 0);
        let est = estimate_moments(&e, &[2.0]);
        assert_eq!(est.m_se.max_abs(), 0.0);
        assert_eq!(est.ms(2.0).unwrap().se, 0.0);
        assert_eq!(est.ms(2.0).unwrap().mean, 14.0);
    }

    #[test]
    fn maxwellian_sample_moments_match_identity() {
        let mut rng = ChaCha12Rng::seed_from_u64(51);
        let velocities: Vec<_> = (0..1_000_000).map(|_| sample_background(&mut rng)).collect();
        let e = Ensemble::from_velocities(velocities, 0.0, 0);
        let est = estimate_moments(&e, &[2.0]);
        let target = MomentMatrix::identity();
        for (got, want, se) in [
            (est.m.m11, target.m11, est.m_se.m11),
            (est.m.m12, target.m12, est.m_se.m12),
            (est.m.m13, target.m13, est.m_se.m13),
            (est.m.m22, target.m22, est.m_se.m22),
            (est.m.m23, target.m23, est.m_se.m23),
            (est.m.m33, target.m33, est.m_se.m33),
        ] {
            assert!((got - want).abs() < 4.0 * se, "{got} vs {want} (se {se})");
        }
    }

    #[test]
    fn estimate_cauchy_schwarz_consistency() {
        let mut rng = ChaCha12Rng::seed_from_u64(52);
        let velocities: Vec<_> = (0..5000)
            .map(|_| sample_background(&mut rng) * (1.0 + rng.random::<f64>()))
            .collect();
        let e = Ensemble::from_velocities(velocities, 0.0, 0);
        let est = estimate_moments(&e, &[2.0]);
        let m = est.m;
        assert!(m.m12.abs() <= (m.m11 * m.m22).sqrt() + 1e-12);
        assert!(m.m13.abs() <= (m.m11 * m.m33).sqrt() + 1e-12);
        assert!(m.m23.abs() <= (m.m22 * m.m33).sqrt() + 1e-12);
        assert!(m.min_eigenvalue() >= -1e-12);
        // E|v|² equals the trace on the same sample, exactly up to rounding.
        assert_relative_eq!(est.ms(2.0).unwrap().mean, m.trace(), max_relative = 1e-12);
    }

    #[test]
    fn runs_are_bit_identical() {
        let mut config = maxwell_config(300, 0.8, 1.3, 99);
        config.kernel = CollisionKernel::constant(0.5).unwrap();
        config.record_times = vec![0.4, 0.8];
        let (traj_a, final_a) = run(&config).unwrap();
        let (traj_b, final_b) = run(&config).unwrap();
        assert_eq!(final_a.time(), final_b.time());
        assert_eq!(final_a.accepted_collisions(), final_b.accepted_collisions());
        assert_eq!(
            final_a.candidate_collisions(),
            final_b.candidate_collisions()
        );
        for (a, b) in final_a.velocities().zip(final_b.velocities()) {
            assert_eq!(a, b);
        }
        for (a, b) in traj_a.iter().zip(&traj_b) {
            assert_eq!(a.m.to_vector(), b.m.to_vector());
            assert_eq!(a.m_se.to_vector(), b.m_se.to_vector());
        }
    }

    #[test]
    fn equilibrium_is_preserved_at_zero_shear() {
        let config = maxwell_config(20_000, 1.0, 0.0, 7);
        let (traj, final_ensemble) = run(&config).unwrap();
        assert_eq!(final_ensemble.len(), 20_000);
        let est = &traj[0];
        let target = MomentMatrix::identity().to_vector();
        let got = est.m.to_vector();
        let se = est.m_se.to_vector();
        for i in 0..6 {
            assert!(
                (got[i] - target[i]).abs() < 5.0 * se[i].max(1e-9),
                "component {i}: {} vs {} (se {})",
                got[i],
                target[i],
                se[i]
            );
        }
        // Acceptance ratio is exactly 1 for Maxwell molecules.
        assert_eq!(
            final_ensemble.accepted_collisions(),
            final_ensemble.candidate_collisions()
        );
    }

    #[test]
    fn point_mass_trace_relaxes_at_the_collision_rate() {
        let beta = 4.0 * PI / 3.0;
        let times: Vec<f64> = [0.2, 0.5, 1.0].iter().map(|f| f / beta).collect();
        let config = SimConfig {
            k: 0.0,
            kernel: CollisionKernel::constant(0.0).unwrap(),
            n_particles: 20_000,
            t_end: times[2],
            substep: None,
            seed: 21,
            initial_condition: InitialCondition::PointMass([2.0, 0.0, 0.0]),
            record_times: times.clone(),
            s_moments: vec![2.0],
        };
        let (traj, _) = run(&config).unwrap();
        for est in &traj {
            let expect = 3.0 + (4.0 - 3.0) * (-beta * est.time).exp();
            let ms2 = est.ms(2.0).unwrap();
            assert!(
                (ms2.mean - expect).abs() < 5.0 * ms2.se,
                "trace {} vs {} (se {}) at t = {}",
                ms2.mean,
                expect,
                ms2.se,
                est.time
            );
        }
    }

    #[test]
    fn anisotropic_initial_condition_matches_requested_covariance() {
        let config = SimConfig {
            k: 0.0,
            kernel: CollisionKernel::constant(0.0).unwrap(),
            n_particles: 50_000,
            t_end: 1.0,
            substep: None,
            seed: 5,
            initial_condition: InitialCondition::AnisotropicGaussian([2.0, 1.0, 0.5]),
            record_times: vec![0.0],
            s_moments: vec![2.0],
        };
        let (traj, _) = run(&config).unwrap();
        let est = &traj[0];
        for (got, want, se) in [
            (est.m.m11, 2.0, est.m_se.m11),
            (est.m.m22, 1.0, est.m_se.m22),
            (est.m.m33, 0.5, est.m_se.m33),
            (est.m.m12, 0.0, est.m_se.m12),
        ] {
            assert!((got - want).abs() < 4.0 * se, "{got} vs {want}");
        }
    }

    #[test]
    fn hard_potential_run_counts_and_accepts_sanely() {
        let config = SimConfig {
            k: 1.0,
            kernel: CollisionKernel::constant(0.5).unwrap(),
            n_particles: 2000,
            t_end: 1.0,
            substep: None,
            seed: 3,
            initial_condition: InitialCondition::Maxwellian,
            record_times: vec![1.0],
            s_moments: vec![2.0, 2.5],
        };
        let (traj, ensemble) = run(&config).unwrap();
        assert!(ensemble.accepted_collisions() <= ensemble.candidate_collisions());
        assert!(ensemble.accepted_collisions() > 0);
        let ratio = ensemble.acceptance_ratio();
        assert!(ratio > 0.2 && ratio <= 1.0, "acceptance ratio {ratio}");
        assert!(traj[0].ms(2.5).is_some());
        assert!(traj[0].m.is_physical(1e-12));
    }

    #[test]
    fn config_validation_rejects_bad_inputs() {
        let base = maxwell_config(100, 1.0, 1.0, 0);
        let mut c = base.clone();
        c.k = -1.0;
        assert!(c.validate().is_err());
        c = base.clone();
        c.n_particles = 0;
        assert!(c.validate().is_err());
        c = base.clone();
        c.substep = Some(2.0);
        assert!(c.validate().is_err());
        c = base.clone();
        c.record_times = vec![0.5, 0.5];
        assert!(c.validate().is_err());
        c = base.clone();
        c.record_times = vec![1.5];
        assert!(c.validate().is_err());
        c = base.clone();
        c.initial_condition = InitialCondition::AnisotropicGaussian([-1.0, 1.0, 1.0]);
        assert!(c.validate().is_err());
        assert!(base.validate().is_ok());
    }

    #[test]
    fn default_substep_shrinks_with_shear() {
        let slow = maxwell_config(1, 1.0, 0.0, 0);
        assert_relative_eq!(slow.effective_substep(), 0.05, epsilon = 1e-15);
        let fast = maxwell_config(1, 1.0, 99.0, 0);
        assert_relative_eq!(fast.effective_substep(), 0.005, epsilon = 1e-15);
    }

    #[test]
    fn stationarity_verdicts_on_synthetic_trajectories() {
        let flat = |value: f64, se: f64, t: f64| MomentEstimate {
            m: MomentMatrix::diagonal(value, value, value),
            m_se: MomentMatrix::new(se, se, se, se, se, se),
            ms: vec![SMoment {
                s: 2.0,
                mean: 3.0 * value,
                se,
            }],
            time: t,
        };
        let constant: Vec<_> = (0..8).map(|i| flat(1.0, 0.01, i as f64)).collect();
        assert_eq!(
            stationarity_test(&constant, 4, 2.0).unwrap(),
            Verdict::Stationary
        );
        // Trace doubles every estimate: unambiguous drift.
        let doubling: Vec<_> = (0..8)
            .map(|i| flat(2f64.powi(i), 0.01, i as f64))
            .collect();
        assert_eq!(
            stationarity_test(&doubling, 4, 2.0).unwrap(),
            Verdict::Drifting
        );
        // Exactly constant with zero SEs still counts as stationary.
        let exact: Vec<_> = (0..4).map(|i| flat(1.0, 0.0, i as f64)).collect();
        assert_eq!(
            stationarity_test(&exact, 2, 2.0).unwrap(),
            Verdict::Stationary
        );
        assert!(matches!(
            stationarity_test(&constant[..3], 2, 2.0),
            Err(Error::TrajectoryTooShort { .. })
        ));
    }

    #[test]
    fn selfsim_distance_vanishes_for_identical_ensembles() {
        let velocities: Vec<_> = (0..100)
            .map(|i| Vector3::new(i as f64 * 0.01, 0.0, 0.0))
            .collect();
        let a = Ensemble::from_velocities(velocities.clone(), 2.0, 0);
        let b = Ensemble::from_velocities(velocities, 2.0, 0);
        assert_eq!(selfsim_diagnostic(&a, &b, 1.0).unwrap(), 0.0);
        assert!(selfsim_diagnostic(&a, &b, 0.0).is_err());
        assert!(selfsim_diagnostic(&a, &b, -1.0).is_err());
    }

    #[test]
    fn selfsim_distance_small_for_equal_laws() {
        let mut rng = ChaCha12Rng::seed_from_u64(53);
        let make = |rng: &mut ChaCha12Rng| {
            let v: Vec<_> = (0..100_000).map(|_| sample_background(rng)).collect();
            Ensemble::from_velocities(v, 0.0, 0)
        };
        let a = make(&mut rng);
        let b = make(&mut rng);
        // mu·t = 0: plain two-sample KS under the null.
        let d = selfsim_diagnostic(&a, &b, 1.0).unwrap();
        assert!(d < 0.01, "KS statistic {d}");
    }

    #[test]
    fn interarrival_times_are_exponential_for_maxwell_molecules() {
        let kernel = CollisionKernel::constant(0.0).unwrap();
        let times = collision_times(&kernel, 3.0, 61, 20_000).unwrap();
        let gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
        let (_, p) = stats::chi_square_exponential(&gaps, 4.0 * PI, 40).unwrap();
        assert!(p > 0.001, "goodness-of-fit p-value {p}");
        // Sample mean of the gaps matches 1/(4π) closely.
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        assert_relative_eq!(mean, 1.0 / (4.0 * PI), max_relative = 0.05);
    }
}
