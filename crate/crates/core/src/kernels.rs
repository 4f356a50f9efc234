//! Cut-off collision kernels `B(n·ω, |v−v⋆|) = b(n·ω) |v−v⋆|^γ`.
//!
//! The angular part `b ≥ 0` lives on the cosine `x = n·ω ∈ [−1, 1]` and is
//! supplied as a named preset or a tabulated function; the speed part is a
//! power `γ ∈ [0, 1)` of the relative speed (γ = 0: Maxwell molecules,
//! γ ∈ (0,1): hard potentials). This module computes the angular moments
//!
//! ```text
//!     α = ∫_{S²} b(e·ω) (e·ω)⁴ dω = 2π ∫₋₁¹ b(x) x⁴ dx,
//!     β = 2π ∫₋₁¹ b(x) x² dx,        ‖b‖ = 2π ∫₋₁¹ b(x) dx,
//! ```
//!
//! the scattering rate `ν(|v|) = ‖b‖ · E[|v − v⋆|^γ]` against the
//! unit-covariance Maxwellian background, and provides the collision-rule
//! and direction/background sampling primitives used by the particle engine.

use crate::error::{Error, Result};
use crate::quad;
use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::gamma::gamma as gamma_fn;
use std::path::Path;

/// Angular part of a collision kernel.
#[derive(Debug, Clone)]
pub enum AngularPart {
    /// b ≡ 1 (isotropic scattering).
    Constant,
    /// b(x) = x².
    Quadratic,
    /// Piecewise-linear table on strictly increasing nodes covering [−1, 1].
    Tabulated { x: Vec<f64>, b: Vec<f64> },
}

/// A validated collision kernel: angular part, homogeneity exponent, and the
/// angular supremum used as the rejection envelope.
#[derive(Debug, Clone)]
pub struct CollisionKernel {
    angular: AngularPart,
    gamma: f64,
    b_max: f64,
}

impl CollisionKernel {
    /// Kernel with b ≡ 1.
    pub fn constant(gamma: f64) -> Result<Self> {
        Self::new(AngularPart::Constant, gamma)
    }

    /// Kernel with b(x) = x².
    pub fn quadratic(gamma: f64) -> Result<Self> {
        Self::new(AngularPart::Quadratic, gamma)
    }

    /// Kernel from tabulated (x, b(x)) nodes, linearly interpolated.
    pub fn tabulated(x: Vec<f64>, b: Vec<f64>, gamma: f64) -> Result<Self> {
        Self::new(AngularPart::Tabulated { x, b }, gamma)
    }

    /// Preset selector used by CLI/config ("constant" or "quadratic").
    pub fn preset(name: &str, gamma: f64) -> Result<Self> {
        match name {
            "constant" => Self::constant(gamma),
            "quadratic" => Self::quadratic(gamma),
            other => Err(Error::UnknownName(format!("kernel preset `{other}`"))),
        }
    }

    /// Tabulated kernel from a two-column CSV of `x, b(x)` rows.
    /// Lines starting with `#` and blank lines are ignored.
    pub fn from_csv(path: &Path, gamma: f64) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut xs = Vec::new();
        let mut bs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split(',').map(str::trim);
            let parse = |s: Option<&str>| -> Result<f64> {
                s.and_then(|v| v.parse::<f64>().ok()).ok_or_else(|| {
                    Error::InvalidKernel(format!(
                        "bad table row at line {} of {}",
                        lineno + 1,
                        path.display()
                    ))
                })
            };
            xs.push(parse(parts.next())?);
            bs.push(parse(parts.next())?);
        }
        Self::tabulated(xs, bs, gamma)
    }

    fn new(angular: AngularPart, gamma: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidKernel(format!(
                "gamma must lie in [0, 1), got {gamma}"
            )));
        }
        let b_max = match &angular {
            AngularPart::Constant | AngularPart::Quadratic => 1.0,
            AngularPart::Tabulated { x, b } => {
                if x.len() < 2 || x.len() != b.len() {
                    return Err(Error::InvalidKernel(
                        "table needs at least two (x, b) rows".into(),
                    ));
                }
                if x.iter().any(|v| !v.is_finite()) || b.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidKernel("non-finite table entry".into()));
                }
                if x.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidKernel("x must be strictly increasing".into()));
                }
                if (x[0] - (-1.0)).abs() > 1e-9 || (x[x.len() - 1] - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidKernel("x must cover [-1, 1]".into()));
                }
                if b.iter().any(|&v| v < 0.0) {
                    return Err(Error::InvalidKernel("b must be nonnegative".into()));
                }
                // Piecewise-linear maximum is attained at a node.
                let m = b.iter().cloned().fold(0.0, f64::max);
                if m <= 0.0 {
                    return Err(Error::InvalidKernel("b must not vanish identically".into()));
                }
                m
            }
        };
        Ok(Self {
            angular,
            gamma,
            b_max,
        })
    }

    /// Evaluate the angular part at cosine x ∈ [−1, 1].
    pub fn b(&self, x: f64) -> f64 {
        debug_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&x), "cosine {x}");
        let val = match &self.angular {
            AngularPart::Constant => 1.0,
            AngularPart::Quadratic => x * x,
            AngularPart::Tabulated { x: xs, b: bs } => {
                let xc = x.clamp(xs[0], xs[xs.len() - 1]);
                let i = xs.partition_point(|&v| v < xc).clamp(1, xs.len() - 1);
                let t = (xc - xs[i - 1]) / (xs[i] - xs[i - 1]);
                bs[i - 1] + t * (bs[i] - bs[i - 1])
            }
        };
        debug_assert!(val <= self.b_max * (1.0 + 1e-12), "b({x}) exceeds b_max");
        val
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn b_max(&self) -> f64 {
        self.b_max
    }

    pub fn angular(&self) -> &AngularPart {
        &self.angular
    }

    /// Short human-readable label for manifests.
    pub fn angular_label(&self) -> String {
        match &self.angular {
            AngularPart::Constant => "constant".into(),
            AngularPart::Quadratic => "quadratic".into(),
            AngularPart::Tabulated { x, .. } => format!("tabulated[{}]", x.len()),
        }
    }
}

/// Angular moments of a kernel: α, β, and the total angular mass ‖b‖_{L¹(S²)}
/// (the growth threshold `l₀` of the s-moment bounds).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct KernelMoments {
    pub alpha: f64,
    pub beta: f64,
    pub b_l1: f64,
}

impl KernelMoments {
    /// C₁ = (5β − 3α)/2, the uniform decay rate of the moment system.
    pub fn c1(&self) -> f64 {
        (5.0 * self.beta - 3.0 * self.alpha) / 2.0
    }

    /// C₂ = (β − α)/2, the isotropizing coupling of the moment system.
    pub fn c2(&self) -> f64 {
        (self.beta - self.alpha) / 2.0
    }

    /// Default constant source of the moment ODE. Re-derived from the
    /// unit-covariance background (E|v⋆|² = 3): c = β. See
    /// `moments::build_operator` for the alternative β/3 convention.
    pub fn source_c(&self) -> f64 {
        self.beta
    }
}

/// Compute (α, β, ‖b‖) for a kernel.
///
/// Smooth presets use adaptive Gauss–Legendre (doubling to 1e−12 relative);
/// tabulated kernels are integrated segment-by-segment, which is exact for
/// piecewise-linear data.
pub fn kernel_moments(kernel: &CollisionKernel) -> Result<KernelMoments> {
    let two_pi = 2.0 * std::f64::consts::PI;
    let moment = |power: i32| -> Result<f64> {
        match kernel.angular() {
            AngularPart::Tabulated { x, .. } => {
                let mut total = 0.0;
                for w in x.windows(2) {
                    // Integrand is (linear)·x^power, degree ≤ 5: 8 nodes exact.
                    total += quad::integrate_fixed(
                        &|t: f64| kernel.b(t) * t.powi(power),
                        w[0],
                        w[1],
                        8,
                    );
                }
                Ok(total)
            }
            _ => quad::integrate_adaptive(
                &|t: f64| kernel.b(t) * t.powi(power),
                -1.0,
                1.0,
                quad::DEFAULT_REL_TOL,
            ),
        }
    };
    let m = KernelMoments {
        alpha: two_pi * moment(4)?,
        beta: two_pi * moment(2)?,
        b_l1: two_pi * moment(0)?,
    };
    debug_assert!(m.alpha > 0.0 && m.alpha <= m.beta && m.beta <= m.b_l1);
    Ok(m)
}

/// E[|v⋆|^γ] for a 3-D standard Gaussian: 2^{γ/2} Γ((3+γ)/2) / Γ(3/2).
pub fn maxwellian_speed_moment(gamma: f64) -> f64 {
    assert!(gamma >= 0.0);
    2f64.powf(gamma / 2.0) * gamma_fn((3.0 + gamma) / 2.0) / gamma_fn(1.5)
}

/// Density of u = |v − v⋆| for v⋆ standard normal and |v| = r
/// (noncentral chi, 3 degrees of freedom, noncentrality r).
fn relative_speed_density(u: f64, r: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    let x = u * r;
    if x <= 1.0 {
        // sqrt(2/π) u² e^{−(u²+r²)/2} sinh(ur)/(ur)
        let sinhc = if x > 1e-8 { x.sinh() / x } else { 1.0 + x * x / 6.0 };
        (2.0 / std::f64::consts::PI).sqrt() * u * u * (-(u * u + r * r) / 2.0).exp() * sinhc
    } else {
        // Difference form avoids sinh overflow; terms are well separated
        // because e^{−(u+r)²/2} / e^{−(u−r)²/2} = e^{−2ur} ≤ e^{−2} here.
        let a = (-(u - r) * (u - r) / 2.0).exp();
        let b = (-(u + r) * (u + r) / 2.0).exp();
        u / (r * std::f64::consts::TAU.sqrt()) * (a - b)
    }
}

/// E[|v − v⋆|^γ] over the unit-covariance Maxwellian background, for a
/// particle at speed r ≥ 0. Valid for any γ ≥ 0 (the kernel range [0, 1) is
/// enforced at kernel construction, not here).
pub fn relative_speed_moment(gamma: f64, r: f64) -> Result<f64> {
    assert!(gamma >= 0.0 && r >= 0.0);
    if gamma == 0.0 {
        return Ok(1.0); // density normalization, exact
    }
    // The density mass is inside |u − r| ≤ 12 to far below 1e−12.
    let lo = (r - 12.0).max(0.0);
    let hi = r + 12.0;
    quad::integrate_adaptive(
        &|u: f64| u.powf(gamma) * relative_speed_density(u, r),
        lo,
        hi,
        quad::DEFAULT_REL_TOL,
    )
}

/// Scattering rate ν(|v|) = ‖b‖ · E[|v − v⋆|^γ] at the given speed.
pub fn scattering_rate(kernel: &CollisionKernel, speed: f64) -> Result<f64> {
    let m = kernel_moments(kernel)?;
    Ok(m.b_l1 * relative_speed_moment(kernel.gamma(), speed)?)
}

/// Cached scattering-rate table on an asinh-spaced grid with local cubic
/// interpolation, recomputing exactly beyond its range.
///
/// Diagnostic-path convenience (sweeps, weak-form checks): the particle
/// engine's majorants use closed-form envelopes instead and never read this.
#[derive(Debug, Clone)]
pub struct RateTable {
    gamma: f64,
    b_l1: f64,
    r_max: f64,
    s_step: f64,
    values: Vec<f64>,
}

impl RateTable {
    /// Tabulate ν on `n_nodes` points covering speeds [0, r_max].
    pub fn build(kernel: &CollisionKernel, r_max: f64, n_nodes: usize) -> Result<Self> {
        assert!(n_nodes >= 8 && r_max > 0.0);
        let m = kernel_moments(kernel)?;
        let s_max = r_max.asinh();
        let s_step = s_max / (n_nodes - 1) as f64;
        let mut values = Vec::with_capacity(n_nodes);
        for i in 0..n_nodes {
            let r = (i as f64 * s_step).sinh();
            values.push(m.b_l1 * relative_speed_moment(kernel.gamma(), r)?);
        }
        Ok(Self {
            gamma: kernel.gamma(),
            b_l1: m.b_l1,
            r_max,
            s_step,
            values,
        })
    }

    /// Interpolated ν(r); exact quadrature when r exceeds the table range.
    pub fn eval(&self, r: f64) -> Result<f64> {
        assert!(r >= 0.0);
        if r > self.r_max {
            return Ok(self.b_l1 * relative_speed_moment(self.gamma, r)?);
        }
        let s = r.asinh();
        let n = self.values.len();
        // 4-point Lagrange stencil centred on the cell containing s.
        let cell = ((s / self.s_step) as usize).clamp(1, n - 3);
        let t = s / self.s_step - cell as f64; // in [0, 1] within the cell
        let (y0, y1, y2, y3) = (
            self.values[cell - 1],
            self.values[cell],
            self.values[cell + 1],
            self.values[cell + 2],
        );
        // Uniform-grid cubic through (−1, y0), (0, y1), (1, y2), (2, y3).
        let a = -y0 / 6.0 + y1 / 2.0 - y2 / 2.0 + y3 / 6.0;
        let b = y0 / 2.0 - y1 + y2 / 2.0;
        let c = -y0 / 3.0 - y1 / 2.0 + y2 - y3 / 6.0;
        Ok(((a * t + b) * t + c) * t + y1)
    }
}

/// Draw v⋆ from the unit-covariance Maxwellian background.
pub fn sample_background<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    Vector3::new(
        StandardNormal.sample(rng),
        StandardNormal.sample(rng),
        StandardNormal.sample(rng),
    )
}

/// Two unit vectors completing `n` (assumed unit) to an orthonormal frame.
fn orthonormal_complement(n: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    // Cross with the axis most orthogonal to n for stability.
    let axis = if n.x.abs() <= n.y.abs() && n.x.abs() <= n.z.abs() {
        Vector3::x()
    } else if n.y.abs() <= n.z.abs() {
        Vector3::y()
    } else {
        Vector3::z()
    };
    let e1 = n.cross(&axis).normalize();
    let e2 = n.cross(&e1);
    (e1, e2)
}

/// Sample a scattering direction ω on S² with density ∝ b(n·ω), where
/// n = (v − v⋆)/|v − v⋆|: the cosine x = n·ω is drawn by inverse CDF for the
/// presets (uniform area measure makes x uniform for b ≡ 1) or by rejection
/// under b_max for tables, and the azimuth about n is uniform.
pub fn sample_scatter_direction<R: Rng + ?Sized>(
    kernel: &CollisionKernel,
    v: &Vector3<f64>,
    v_star: &Vector3<f64>,
    rng: &mut R,
) -> Result<Vector3<f64>> {
    let rel = v - v_star;
    let norm = rel.norm();
    if norm == 0.0 {
        return Err(Error::DegeneratePair);
    }
    let n = rel / norm;
    let x = match kernel.angular() {
        AngularPart::Constant => 2.0 * rng.random::<f64>() - 1.0,
        // CDF (1 + x³)/2 inverts to the signed cube root.
        AngularPart::Quadratic => (2.0 * rng.random::<f64>() - 1.0).cbrt(),
        AngularPart::Tabulated { .. } => loop {
            let x = 2.0 * rng.random::<f64>() - 1.0;
            if rng.random::<f64>() * kernel.b_max() <= kernel.b(x) {
                break x;
            }
        },
    };
    let phi = std::f64::consts::TAU * rng.random::<f64>();
    let (e1, e2) = orthonormal_complement(&n);
    let sin_theta = (1.0 - x * x).max(0.0).sqrt();
    Ok(n * x + (e1 * phi.cos() + e2 * phi.sin()) * sin_theta)
}

/// Elastic collision rule: reflect the relative velocity across ω.
///
/// v′ = v − ((v − v⋆)·ω) ω and v⋆′ = v⋆ + ((v − v⋆)·ω) ω; energy and
/// momentum of the pair are conserved identically.
pub fn apply_collision(
    v: &Vector3<f64>,
    v_star: &Vector3<f64>,
    omega: &Vector3<f64>,
) -> (Vector3<f64>, Vector3<f64>) {
    debug_assert!((omega.norm() - 1.0).abs() < 1e-12, "omega must be unit");
    let transfer = (v - v_star).dot(omega);
    (v - omega * transfer, v_star + omega * transfer)
}
