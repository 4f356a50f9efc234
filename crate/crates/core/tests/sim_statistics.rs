//! Heavier Monte Carlo checks of the particle engine: equilibrium exactness
//! for hard potentials, anisotropic-kernel agreement with the moment ODE,
//! and scheduling/thread-count invariance of the deterministic RNG layout.

use nalgebra::Vector3;
use shearbolt::kernels::{kernel_moments, CollisionKernel};
use shearbolt::moments::{build_operator, evolve, MomentMatrix};
use shearbolt::sim::{self, estimate_moments, InitialCondition, SimConfig};

fn config(kernel: CollisionKernel, k: f64, n: usize, t_end: f64, seed: u64) -> SimConfig {
    SimConfig {
        k,
        kernel,
        n_particles: n,
        t_end,
        substep: None,
        seed,
        initial_condition: InitialCondition::Maxwellian,
        record_times: vec![t_end],
        s_moments: vec![2.0],
    }
}

fn worst_z(est: &sim::MomentEstimate, target: &MomentMatrix) -> f64 {
    let got = est.m.to_vector();
    let want = target.to_vector();
    let se = est.m_se.to_vector();
    (0..6)
        .map(|i| (got[i] - want[i]).abs() / se[i].max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

#[test]
fn hard_potential_thinning_preserves_equilibrium() {
    // The Maxwellian is invariant for every homogeneity, so any systematic
    // drift here would expose a bias in the speed-dependent thinning.
    let cfg = config(CollisionKernel::constant(0.5).unwrap(), 0.0, 50_000, 2.0, 101);
    let (traj, ensemble) = sim::run(&cfg).unwrap();
    let z = worst_z(traj.last().unwrap(), &MomentMatrix::identity());
    assert!(z < 5.0, "worst |z| = {z:.2}");
    let ratio = ensemble.acceptance_ratio();
    assert!(ratio > 0.0 && ratio < 1.0, "gamma > 0 must thin: {ratio}");
}

#[test]
fn hard_potential_relaxes_a_point_mass_to_equilibrium() {
    let mut cfg = config(CollisionKernel::constant(0.5).unwrap(), 0.0, 50_000, 6.0, 103);
    cfg.initial_condition = InitialCondition::PointMass([2.0, 0.0, 0.0]);
    let (traj, _) = sim::run(&cfg).unwrap();
    let z = worst_z(traj.last().unwrap(), &MomentMatrix::identity());
    assert!(z < 5.0, "worst |z| = {z:.2}");
}

#[test]
fn quadratic_kernel_tracks_its_moment_ode() {
    // b(x) = x² has different C1/C2 than b ≡ 1; the engine's b-weighted
    // scattering must reproduce the quadrature-derived rates.
    let kernel = CollisionKernel::quadratic(0.0).unwrap();
    let km = kernel_moments(&kernel).unwrap();
    let op = build_operator(&km, 1.0, km.beta).unwrap();
    let mut cfg = config(kernel, 1.0, 50_000, 3.0, 107);
    cfg.record_times = vec![1.0, 2.0, 3.0];
    // Point-mass start: the initial matrix is exact, so the z-scores carry
    // no initial-sampling noise.
    cfg.initial_condition = InitialCondition::PointMass([2.0, 1.0, 0.0]);
    let m0 = MomentMatrix::new(4.0, 2.0, 0.0, 1.0, 0.0, 0.0);
    let (traj, _) = sim::run(&cfg).unwrap();
    for est in &traj {
        let target = evolve(&op, &m0, est.time).unwrap();
        let z = worst_z(est, &target);
        assert!(z < 5.0, "t = {}: worst |z| = {z:.2}", est.time);
    }
}

#[test]
fn tabulated_kernel_matches_its_analytic_presets() {
    // A fine table of b(x) = x² must agree with the closed-form preset in
    // both derived rates and simulated moments (statistically).
    let n_nodes = 401;
    let xs: Vec<f64> = (0..n_nodes)
        .map(|i| -1.0 + 2.0 * i as f64 / (n_nodes - 1) as f64)
        .collect();
    let bs: Vec<f64> = xs.iter().map(|x| x * x).collect();
    let table = CollisionKernel::tabulated(xs, bs, 0.0).unwrap();
    let km_t = kernel_moments(&table).unwrap();
    let km_q = kernel_moments(&CollisionKernel::quadratic(0.0).unwrap()).unwrap();
    assert!((km_t.alpha - km_q.alpha).abs() < 1e-4);
    assert!((km_t.beta - km_q.beta).abs() < 1e-4);
    assert!((km_t.b_l1 - km_q.b_l1).abs() < 1e-4);

    let op = build_operator(&km_q, 1.0, km_q.beta).unwrap();
    let cfg = config(table, 1.0, 50_000, 2.0, 109);
    let (traj, _) = sim::run(&cfg).unwrap();
    let target = evolve(&op, &MomentMatrix::identity(), 2.0).unwrap();
    let z = worst_z(traj.last().unwrap(), &target);
    assert!(z < 5.0, "worst |z| = {z:.2}");
}

#[test]
fn results_do_not_depend_on_the_thread_count() {
    let make = || config(CollisionKernel::constant(0.5).unwrap(), 1.3, 2_000, 1.0, 211);
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| sim::run(&make()).unwrap());
    let parallel = sim::run(&make()).unwrap();
    let a: Vec<Vector3<f64>> = single.1.velocities().cloned().collect();
    let b: Vec<Vector3<f64>> = parallel.1.velocities().cloned().collect();
    assert_eq!(a.len(), b.len());
    for i in 0..a.len() {
        for j in 0..3 {
            assert_eq!(
                a[i][j].to_bits(),
                b[i][j].to_bits(),
                "particle {i} component {j} differs across thread counts"
            );
        }
    }
    assert_eq!(
        single.1.accepted_collisions(),
        parallel.1.accepted_collisions()
    );
}

#[test]
fn snapshots_agree_with_trajectory_estimates_exactly() {
    let mut cfg = config(CollisionKernel::constant(0.5).unwrap(), 2.0, 5_000, 1.0, 223);
    cfg.record_times = vec![0.5, 1.0];
    let output = sim::run_full(&cfg, &[0.5, 1.0]).unwrap();
    assert_eq!(output.snapshots.len(), 2);
    for (snap, point) in output.snapshots.iter().zip(&output.trajectory) {
        assert_eq!(snap.time, point.estimate.time);
        let here = estimate_moments(&snap.to_ensemble(cfg.seed), &[2.0]);
        // Same velocities, same summation order: identical to the bit.
        assert_eq!(here.m.to_vector(), point.estimate.m.to_vector());
        assert_eq!(here.ms(2.0).unwrap().mean, point.estimate.ms(2.0).unwrap().mean);
    }
}

#[test]
fn different_seeds_give_different_ensembles() {
    let a = sim::run(&config(CollisionKernel::constant(0.0).unwrap(), 1.0, 500, 0.5, 1)).unwrap();
    let b = sim::run(&config(CollisionKernel::constant(0.0).unwrap(), 1.0, 500, 0.5, 2)).unwrap();
    let same = a
        .1
        .velocities()
        .zip(b.1.velocities())
        .all(|(x, y)| x == y);
    assert!(!same, "distinct seeds must decorrelate the ensemble");
}
