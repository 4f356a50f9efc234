//! Spectral theory of the moment operator.
//!
//! The characteristic polynomial of the 6×6 generator A factors as
//!
//! ```text
//!     p_A(λ) = (λ + C₁)³ · g(λ + C₁),
//!     g(y)   = y³ − 3C₂ y² − 2C₂ K²,
//! ```
//!
//! so three eigenvalues sit at −C₁ and the rest are y − C₁ for the roots y
//! of the reduced cubic. For K > 0 the cubic has one real root ȳ > 3C₂ and
//! a complex pair with negative real part; the flow is stable exactly while
//! ȳ < C₁, which happens for K below the threshold
//!
//! ```text
//!     K₀ = C₁ √((C₁ − 3C₂)/(2C₂)) = C₁ √(β/(2C₂)).
//! ```
//!
//! Above K₀ the unique unstable direction is a symmetric matrix M^μ with
//! growth rate μ = ȳ − C₁; this module computes it, its large-K rescaled
//! limit, and the parameters of a representing measure (an anisotropic
//! Gaussian plus a point mass at v̄ = (1, 1, 0)) reproducing its entries.

use crate::error::{Error, Result};
use crate::moments::{MomentMatrix, MomentOperator};
use nalgebra::Complex;
use serde::Serialize;

/// Eigenvalue summary of the moment operator at a given shear rate.
#[derive(Debug, Clone)]
pub struct SpectralReport {
    pub c1: f64,
    pub c2: f64,
    pub k: f64,
    /// All six eigenvalues with multiplicity: −C₁ three times, then the
    /// shifted roots of the reduced cubic (real root first).
    pub eigenvalues: [Complex<f64>; 6],
    pub max_real_part: f64,
    pub k0: f64,
    /// True iff every eigenvalue has negative real part (K < K₀).
    pub stable: bool,
    /// Growth rate ȳ − C₁ of the unstable mode; present iff K > K₀.
    pub mu: Option<f64>,
}

impl SpectralReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "c1": self.c1,
            "c2": self.c2,
            "k": self.k,
            "eigenvalues": self
                .eigenvalues
                .iter()
                .map(|l| serde_json::json!({"re": l.re, "im": l.im}))
                .collect::<Vec<_>>(),
            "max_real_part": self.max_real_part,
            "k0": self.k0,
            "stable": self.stable,
            "mu": self.mu,
        })
    }
}

/// The unstable mode above threshold: rate μ and eigenvector M^μ normalized
/// to m11 = 1 (its 13 and 23 entries vanish identically).
#[derive(Debug, Clone, Serialize)]
pub struct GrowingMode {
    pub mu: f64,
    pub eigvec: MomentMatrix,
}

/// Parameters of a measure with the growing mode's second moments: an
/// anisotropic Gaussian with inverse-scale parameters A₁, A₂, A₃ plus a mass
/// `beta_mass` at the fixed point v̄ = (1, 1, 0).
#[derive(Debug, Clone, Serialize)]
pub struct ReconstructionParams {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub beta_mass: f64,
    pub vbar: [f64; 3],
}

impl ReconstructionParams {
    /// Second moments of the represented measure (the roundtrip map).
    pub fn moments(&self) -> MomentMatrix {
        let g = |p1: f64, p2: f64, p3: f64| {
            self.a1.powf(p1) * self.a2.powf(p2) * self.a3.powf(p3)
        };
        MomentMatrix::new(
            g(-1.5, -0.5, -0.5) + self.beta_mass,
            self.beta_mass,
            0.0,
            g(-0.5, -1.5, -0.5) + self.beta_mass,
            0.0,
            g(-0.5, -0.5, -1.5),
        )
    }
}

/// Roots of the reduced cubic g(y) = y³ − 3C₂y² − 2C₂K²: the unique real
/// root ȳ > 3C₂ and the complex pair a ± ib (a < 0, b ≥ 0 by convention).
///
/// The depressed form (y = z + C₂) is z³ + pz + q with p = −3C₂² and
/// q = −2(C₂³ + C₂K²); its discriminant (q/2)² + (p/3)³ = C₂²K²(2C₂² + K²)
/// is positive for all K > 0, so the real root comes out of Cardano's
/// formula as z = u + C₂²/u with u³ = −q/2 + √Δ — all terms positive, no
/// cancellation. One Newton step on a compensated evaluation of g polishes
/// the result; the complex pair follows from the Viète relations.
///
/// K = 0 is allowed and returns the exact degenerate triple (3C₂, 0 ± 0i).
pub fn reduced_cubic_roots(c2: f64, k: f64) -> (f64, Complex<f64>) {
    assert!(c2 > 0.0 && k >= 0.0, "need C2 > 0 and K >= 0");
    if k == 0.0 {
        return (3.0 * c2, Complex::new(0.0, 0.0));
    }
    let half_q_neg = c2 * c2 * c2 + c2 * k * k; // −q/2 > 0
    let sqrt_disc = c2 * k * (2.0 * c2 * c2 + k * k).sqrt();
    let u = (half_q_neg + sqrt_disc).cbrt();
    let mut ybar = u + c2 * c2 / u + c2;

    // Newton polish: g(y) = y²(y − 3C₂) − 2C₂K², g′(y) = 3y(y − 2C₂).
    for _ in 0..2 {
        let g = ybar * ybar * (ybar - 3.0 * c2) - 2.0 * c2 * k * k;
        let dg = 3.0 * ybar * (ybar - 2.0 * c2);
        if dg == 0.0 {
            break;
        }
        let step = g / dg;
        ybar -= step;
        if step.abs() <= 1e-15 * ybar.abs() {
            break;
        }
    }

    // Viète: sum of roots = 3C₂, product = 2C₂K².
    let a = (3.0 * c2 - ybar) / 2.0;
    let b = (2.0 * c2 * k * k / ybar - a * a).max(0.0).sqrt();
    (ybar, Complex::new(a, b))
}

/// All six eigenvalues of the generator: −C₁ with multiplicity three, then
/// ȳ − C₁ and the shifted complex pair.
pub fn operator_eigenvalues(c1: f64, c2: f64, k: f64) -> [Complex<f64>; 6] {
    let (ybar, pair) = reduced_cubic_roots(c2, k);
    [
        Complex::new(-c1, 0.0),
        Complex::new(-c1, 0.0),
        Complex::new(-c1, 0.0),
        Complex::new(ybar - c1, 0.0),
        Complex::new(pair.re - c1, pair.im),
        Complex::new(pair.re - c1, -pair.im),
    ]
}

/// Stability threshold K₀ = C₁√((C₁ − 3C₂)/(2C₂)), the shear rate at which
/// the real root ȳ(K) crosses C₁.
pub fn find_k0(c1: f64, c2: f64) -> f64 {
    assert!(c2 > 0.0 && c1 > 3.0 * c2, "need C1 > 3C2 > 0");
    c1 * ((c1 - 3.0 * c2) / (2.0 * c2)).sqrt()
}

/// Full spectral report at shear rate K ≥ 0.
pub fn eigenvalues(c1: f64, c2: f64, k: f64) -> SpectralReport {
    let eigs = operator_eigenvalues(c1, c2, k);
    let max_real_part = eigs.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
    let k0 = find_k0(c1, c2);
    let mu = if k > k0 { Some(eigs[3].re) } else { None };
    SpectralReport {
        c1,
        c2,
        k,
        eigenvalues: eigs,
        max_real_part,
        k0,
        stable: max_real_part < 0.0,
        mu,
    }
}

/// Growth rate and eigenvector of the unstable mode for K > K₀.
///
/// The 13 and 23 entries decouple with eigenvalue −C₁ and vanish on this
/// mode, so the eigenvector is found in the (11, 12, 22, 33) block: the
/// rank-deficient system (A − μI)m = 0 is solved by least squares with the
/// normalization row m11 = 1 appended (the stacked 5×4 system has full
/// column rank because μ is a simple eigenvalue).
pub fn growing_mode(c1: f64, c2: f64, k: f64) -> Result<GrowingMode> {
    let k0 = find_k0(c1, c2);
    if !(k > k0) {
        return Err(Error::NotSupercritical { k, k0 });
    }
    let (ybar, _) = reduced_cubic_roots(c2, k);
    let mu = ybar - c1;
    let d = c2 - c1 - mu;
    #[rustfmt::skip]
    let stacked = nalgebra::SMatrix::<f64, 5, 4>::from_row_slice(&[
        d,   -2.0 * k,  c2,  c2,
        0.0, -c1 - mu,  -k,  0.0,
        c2,  0.0,       d,   c2,
        c2,  0.0,       c2,  d,
        1.0, 0.0,       0.0, 0.0,
    ]);
    let rhs = nalgebra::SVector::<f64, 5>::from_column_slice(&[0.0, 0.0, 0.0, 0.0, 1.0]);
    let svd = stacked.svd(true, true);
    let x = svd
        .solve(&rhs, 0.0)
        .map_err(|_| Error::SingularSystem { k })?;
    Ok(GrowingMode {
        mu,
        eigvec: MomentMatrix::new(x[0], x[1], 0.0, x[2], 0.0, x[3]),
    })
}

/// Closed-form eigenvector for cross-validation: the block equations give
/// m22 = m33 = C₂/(ȳ − 2C₂) and m12 = −K C₂/(ȳ(ȳ − 2C₂)) with m11 = 1;
/// consistency of the remaining row is exactly g(ȳ) = 0.
pub fn growing_mode_closed_form(c1: f64, c2: f64, k: f64) -> Result<GrowingMode> {
    let k0 = find_k0(c1, c2);
    if !(k > k0) {
        return Err(Error::NotSupercritical { k, k0 });
    }
    let (ybar, _) = reduced_cubic_roots(c2, k);
    let m22 = c2 / (ybar - 2.0 * c2);
    let m12 = -k * m22 / ybar;
    Ok(GrowingMode {
        mu: ybar - c1,
        eigvec: MomentMatrix::new(1.0, m12, 0.0, m22, 0.0, m22),
    })
}

/// Parameters (A₁, A₂, A₃, β) of a measure whose second moments equal the
/// growing mode's: Gaussian part with inverse scales Aᵢ plus mass β at
/// v̄ = (1, 1, 0). Solving
///
/// ```text
///     m11 − β = A₁^{−3/2}A₂^{−1/2}A₃^{−1/2} =: X,   β = m12,
///     m22 − β = A₁^{−1/2}A₂^{−3/2}A₃^{−1/2} =: Y,
///     m33     = A₁^{−1/2}A₂^{−1/2}A₃^{−3/2} =: Z
/// ```
///
/// by iterated substitution gives A₁ = (YZ)^{1/5}X^{−4/5} and cyclic
/// analogues. The reference profile is the standard Gaussian density, whose
/// second-moment normalization ∫F₀(|v|²)|v|²dv = 3 fixes the scales.
pub fn reconstruct_measure(mode: &GrowingMode) -> Result<ReconstructionParams> {
    let m = &mode.eigvec;
    let beta_mass = m.m12;
    let x = m.m11 - beta_mass;
    let y = m.m22 - beta_mass;
    let z = m.m33;
    if !(x > 0.0 && y > 0.0 && z > 0.0) {
        return Err(Error::ReconstructionDomain(format!(
            "need m11 − m12 > 0, m22 − m12 > 0, m33 > 0; got {x}, {y}, {z}"
        )));
    }
    Ok(ReconstructionParams {
        a1: (y * z).powf(0.2) * x.powf(-0.8),
        a2: (x * z).powf(0.2) * y.powf(-0.8),
        a3: (x * y).powf(0.2) * z.powf(-0.8),
        beta_mass,
        vbar: [1.0, 1.0, 0.0],
    })
}

/// Convenience: spectral report for a built operator.
pub fn report_for(op: &MomentOperator) -> SpectralReport {
    eigenvalues(op.c1(), op.c2(), op.k())
}
