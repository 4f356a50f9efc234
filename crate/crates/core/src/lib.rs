//! Simulation and analysis toolkit for a tagged particle in a Maxwellian heat
//! bath under uniform shear flow.
//!
//! The model is the linear (Rayleigh) Boltzmann equation restricted to
//! homoenergetic states: in the co-deforming frame the one-particle density
//! `f(t, v)` obeys
//!
//! ```text
//!     ∂t f − K v₂ ∂v₁ f = L f,
//! ```
//!
//! where `K` is the shear rate and `L` is the linear collision operator
//! against a unit-temperature Maxwellian background with cut-off kernel
//! `B(n·ω, |v−v⋆|) = b(n·ω) |v−v⋆|^γ`, `γ ∈ [0, 1)`.
//!
//! The crate provides four cooperating views of this dynamics:
//!
//! * [`kernels`] — collision kernels, their angular moments, scattering
//!   rates, and the elementary collision/sampling primitives;
//! * [`sim`] — an event-driven Monte Carlo ensemble of independent tagged
//!   particles with exact (thinned) collision times and exact shear drift;
//! * [`moments`] — the closed linear ODE for the second-moment matrix valid
//!   for Maxwell molecules (`γ = 0`), its stationary state, and moment
//!   inequalities (Povzner) used for growth control at `γ > 0`;
//! * [`spectral`] — eigenstructure of the moment operator: the stability
//!   threshold `K₀`, the supercritical growing mode `(μ, Mᵘ)`, large-`K`
//!   asymptotics, and the reconstruction of a representing measure.
//!
//! The [`harness`] module orchestrates reproducible scenarios (CSV + JSON
//! manifests) and hosts the cross-module acceptance checks; [`stats`] holds
//! the small statistical helpers shared by the diagnostics.
//!
//! All quantities are nondimensional: the background Maxwellian has unit
//! covariance, so velocities are in thermal units and rates scale with the
//! angular mass `‖b‖_{L¹(S²)}`.

pub mod error;
pub mod harness;
pub mod kernels;
pub mod moments;
pub mod quad;
pub mod sim;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
pub use kernels::{CollisionKernel, KernelMoments};
pub use moments::{MomentMatrix, MomentOperator};
pub use sim::{Ensemble, MomentEstimate, SimConfig};
pub use spectral::{GrowingMode, ReconstructionParams, SpectralReport};
