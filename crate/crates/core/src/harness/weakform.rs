//! Weak-form consistency diagnostics.
//!
//! For a test function φ the dynamics satisfies
//!
//! ```text
//!     d/dt E[φ(v)] = −K E[v₂ ∂₁φ(v)] + E[(L*φ)(v)],
//! ```
//!
//! and for quadratic φ the collision adjoint is available in closed form:
//! L*(v_j v_k) = −C1 v_j v_k + C2 |v|² δ_jk + c δ_jk. The residual compares a
//! centered finite difference of the left side against the right side, both
//! evaluated per particle across three consecutive snapshots of one run, so
//! the standard error reflects the strong path-wise correlation.

use crate::error::{Error, Result};
use crate::moments::MomentOperator;
use crate::sim::Snapshot;
use crate::stats::mean_se;
use nalgebra::Vector3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestFunction {
    /// φ = 1 (mass conservation; both sides vanish identically).
    One,
    /// φ = v₁v₂.
    V1V2,
    /// φ = v₁².
    V1Sq,
    /// φ = |v|² θ_n(v) with the smooth cutoff θ_n = exp(−1/(n⁵(n²−|v|²)))
    /// inside |v| < n and 0 outside. No closed-form adjoint: used to bound
    /// the truncation gap against the plain |v|².
    SpeedSqCutoff { n: f64 },
}

impl TestFunction {
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "1" | "one" => Ok(TestFunction::One),
            "v1v2" => Ok(TestFunction::V1V2),
            "v1sq" | "v1^2" => Ok(TestFunction::V1Sq),
            _ => {
                if let Some(body) = s.strip_prefix("cutoff:") {
                    let n: f64 = body.trim().parse().map_err(|_| {
                        Error::UnknownName(format!("cutoff radius '{body}'"))
                    })?;
                    if n > 0.0 {
                        return Ok(TestFunction::SpeedSqCutoff { n });
                    }
                }
                Err(Error::UnknownName(format!(
                    "test function '{s}' (expected one, v1v2, v1sq, or cutoff:<n>)"
                )))
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            TestFunction::One => "1".into(),
            TestFunction::V1V2 => "v1*v2".into(),
            TestFunction::V1Sq => "v1^2".into(),
            TestFunction::SpeedSqCutoff { n } => format!("|v|^2*cutoff({n})"),
        }
    }

    pub fn value(&self, v: &Vector3<f64>) -> f64 {
        match self {
            TestFunction::One => 1.0,
            TestFunction::V1V2 => v.x * v.y,
            TestFunction::V1Sq => v.x * v.x,
            TestFunction::SpeedSqCutoff { n } => v.norm_squared() * cutoff(v.norm_squared(), *n),
        }
    }

    /// ∂φ/∂v₁.
    pub fn d_v1(&self, v: &Vector3<f64>) -> f64 {
        match self {
            TestFunction::One => 0.0,
            TestFunction::V1V2 => v.y,
            TestFunction::V1Sq => 2.0 * v.x,
            TestFunction::SpeedSqCutoff { n } => {
                let r2 = v.norm_squared();
                let theta = cutoff(r2, *n);
                if theta == 0.0 {
                    return 0.0;
                }
                let gap = n * n - r2;
                // dθ/d(r²) = −θ/(n⁵ gap²); d(r²)/dv₁ = 2v₁.
                2.0 * v.x * theta * (1.0 - r2 / (n.powi(5) * gap * gap))
            }
        }
    }

    /// Closed-form collision adjoint for quadratic φ; `None` otherwise.
    fn collision_adjoint(&self, v: &Vector3<f64>, c1: f64, c2: f64, c: f64) -> Option<f64> {
        match self {
            TestFunction::One => Some(0.0),
            TestFunction::V1V2 => Some(-c1 * v.x * v.y),
            TestFunction::V1Sq => Some(-c1 * v.x * v.x + c2 * v.norm_squared() + c),
            TestFunction::SpeedSqCutoff { .. } => None,
        }
    }
}

fn cutoff(r2: f64, n: f64) -> f64 {
    let gap = n * n - r2;
    if gap <= 0.0 {
        0.0
    } else {
        (-1.0 / (n.powi(5) * gap)).exp()
    }
}

/// One record of the residual series.
#[derive(Debug, Clone, Copy)]
pub struct WeakFormPoint {
    pub time: f64,
    /// Finite-difference d/dt of the sample mean of φ.
    pub lhs: f64,
    /// Sample mean of −K v₂ ∂₁φ + L*φ.
    pub rhs: f64,
    pub residual: f64,
    pub se: f64,
}

/// Residual series at the interior snapshot times. Requires at least three
/// snapshots of the same particle count from a single run.
pub fn weak_form_residual(
    snapshots: &[Snapshot],
    op: &MomentOperator,
    phi: &TestFunction,
) -> Result<Vec<WeakFormPoint>> {
    if snapshots.len() < 3 {
        return Err(Error::TrajectoryTooShort {
            len: snapshots.len(),
            needed: 3,
        });
    }
    if matches!(phi, TestFunction::SpeedSqCutoff { .. }) {
        return Err(Error::InvalidConfig(
            "the cutoff function has no closed-form collision adjoint; \
             compare its average against |v|² instead"
            .into(),
        ));
    }
    let n = snapshots[0].velocities.len();
    if snapshots.iter().any(|s| s.velocities.len() != n) {
        return Err(Error::InvalidConfig(
            "weak-form snapshots must share one particle population".into(),
        ));
    }
    let (c1, c2, c, k) = (op.c1(), op.c2(), op.source_c(), op.k());

    let mut series = Vec::with_capacity(snapshots.len() - 2);
    for i in 1..snapshots.len() - 1 {
        let (prev, here, next) = (&snapshots[i - 1], &snapshots[i], &snapshots[i + 1]);
        let h1 = here.time - prev.time;
        let h2 = next.time - here.time;
        // Second-order three-point derivative, valid for unequal spacing.
        // The middle weight is defined as minus the sum of the outer two so
        // the stencil annihilates constants exactly even when the snapshot
        // times are not exactly representable.
        let w_prev = -h2 / (h1 * (h1 + h2));
        let w_next = h1 / (h2 * (h1 + h2));
        let w_here = -(w_prev + w_next);
        let mut fd = Vec::with_capacity(n);
        let mut rhs = Vec::with_capacity(n);
        let mut residual = Vec::with_capacity(n);
        for p in 0..n {
            let d = w_prev * phi.value(&prev.velocities[p])
                + w_here * phi.value(&here.velocities[p])
                + w_next * phi.value(&next.velocities[p]);
            let v = &here.velocities[p];
            let r = -k * v.y * phi.d_v1(v)
                + phi
                    .collision_adjoint(v, c1, c2, c)
                    .expect("quadratic φ checked above");
            fd.push(d);
            rhs.push(r);
            residual.push(d - r);
        }
        let (res_mean, res_se) = mean_se(&residual);
        series.push(WeakFormPoint {
            time: here.time,
            lhs: mean_se(&fd).0,
            rhs: mean_se(&rhs).0,
            residual: res_mean,
            se: res_se,
        });
    }
    Ok(series)
}

/// Relative gap between the cutoff average E[|v|²θ_n] and the plain E[|v|²].
pub fn cutoff_truncation_gap(velocities: &[Vector3<f64>], n: f64) -> f64 {
    let phi = TestFunction::SpeedSqCutoff { n };
    let truncated: f64 = velocities.iter().map(|v| phi.value(v)).sum::<f64>();
    let plain: f64 = velocities.iter().map(|v| v.norm_squared()).sum::<f64>();
    (plain - truncated).abs() / plain
}
