//! Shared fixtures for the criterion benchmarks.

use shearbolt::kernels::CollisionKernel;
use shearbolt::sim::{InitialCondition, SimConfig};

/// A short ensemble run exercising the collision loop.
pub fn bench_config(gamma: f64, k: f64, n_particles: usize) -> SimConfig {
    SimConfig {
        k,
        kernel: CollisionKernel::constant(gamma).expect("valid exponent"),
        n_particles,
        t_end: 0.5,
        substep: None,
        seed: 7,
        initial_condition: InitialCondition::Maxwellian,
        record_times: vec![0.5],
        s_moments: vec![2.0],
    }
}
