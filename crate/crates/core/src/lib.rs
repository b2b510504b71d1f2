//! Learning optimal transport maps by discretized constrained gradient flows.
//!
//! Transport maps are parameterized as gradients of input-convex networks,
//! `T_θ = ∇φ_θ`, so every parameter vector yields a monotone map. Starting
//! from a shared initialization, the crate runs four optimizers that drive
//! `T_θ∗ρ₀` toward a strongly log-concave target `γ ∝ exp(-V)`:
//!
//! | scheme | update |
//! |--------|--------|
//! | euclidean | `θ ← θ - τ ∇_θ H(T_θ∗ρ₀ | γ)` |
//! | adam | Adam on the same gradient |
//! | explicit | least-squares fit of `T_θ - T_θk` to `-τ ∇_W H` |
//! | implicit | proximal step `H(T_θ∗ρ₀ | γ) + ‖T_θ - T_θk‖² / 2τ` |
//!
//! The Wasserstein gradient of the relative entropy needs the score of the
//! pushed cloud, which [`sinkhorn`] estimates from the self-entropic potential.
//! Final maps are scored with the energy-distance MMD in [`divergences`].
//!
//! The [`harness`] module drives seed sweeps and persists run records; the
//! `otflow` binary wraps it.

pub mod cloud;
pub mod divergences;
pub mod error;
pub mod harness;
pub mod icnn;
pub mod model;
pub mod oracles;
pub mod rng;
pub mod schemes;
pub mod selfcheck;
pub mod sinkhorn;

pub use cloud::PointCloud;
pub use divergences::{Functional, GradField, PotentialEnergy, RelativeEntropy, TargetPotential};
pub use error::{Error, Result};
pub use icnn::{Activation, Icnn, IcnnSpec, MapBatchEval, PositivityMap};
pub use model::{LinearModel, MapModel};
pub use sinkhorn::{SinkhornOptions, SinkhornPotentials};
