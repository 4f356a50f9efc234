//! Gauss–Legendre quadrature with adaptive node doubling.
//!
//! Kernel angular parts are user-supplied with unknown smoothness, so the
//! moment integrals double the node count until two successive estimates
//! agree to a relative tolerance. Node/weight sets are cached per count.

use crate::error::{Error, Result};
use std::collections::HashMap;
use std::sync::{LazyLock, RwLock};

/// Relative agreement required between successive node-doubled estimates.
pub const DEFAULT_REL_TOL: f64 = 1e-12;

const MIN_NODES: usize = 16;
const MAX_NODES: usize = 16_384;

static RULE_CACHE: LazyLock<RwLock<HashMap<usize, (Vec<f64>, Vec<f64>)>>> =
    LazyLock::new(|| RwLock::new(HashMap::new()));

/// Nodes and weights of the n-point Gauss–Legendre rule on [−1, 1].
///
/// Computed by Newton iteration on the Legendre recurrence; cached.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2, "need at least two nodes");
    if let Some(rule) = RULE_CACHE.read().unwrap().get(&n) {
        return rule.clone();
    }
    let rule = compute_rule(n);
    RULE_CACHE.write().unwrap().insert(n, rule.clone());
    rule
}

fn compute_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi-style initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_pair(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                let (p2, d2) = legendre_pair(n, x);
                dp = d2;
                x -= p2 / d2;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Value and derivative of the Legendre polynomial P_n at x.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Fixed n-point Gauss–Legendre estimate of ∫_a^b f.
pub fn integrate_fixed<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, n: usize) -> f64 {
    let (nodes, weights) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut sum = 0.0;
    for (x, w) in nodes.iter().zip(weights.iter()) {
        sum += w * f(mid + half * x);
    }
    half * sum
}

/// Adaptive estimate of ∫_a^b f: node count doubles from 16 until two
/// successive estimates agree to `rel_tol` (relative, with a tiny absolute
/// floor for integrals that vanish).
pub fn integrate_adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    let mut n = MIN_NODES;
    let mut prev = integrate_fixed(f, a, b, n);
    loop {
        n *= 2;
        let cur = integrate_fixed(f, a, b, n);
        let delta = (cur - prev).abs();
        if delta <= rel_tol * cur.abs().max(f64::MIN_POSITIVE) || delta <= 1e-300 {
            return Ok(cur);
        }
        if n >= MAX_NODES {
            return Err(Error::QuadratureNonConvergence {
                nodes: n,
                last_change: delta / cur.abs().max(f64::MIN_POSITIVE),
            });
        }
        prev = cur;
    }
}
