//! Finite-element model of a clamped Euler-Bernoulli beam with localized
//! Kelvin-Voigt damping `b(x) = κ x^α` on the right half.
//!
//! The numerical core is generic over the scalar type (`f32`/`f64` via
//! [`Real`]); closed-form rate algebra is generic over any ordered
//! [`Field`], including exact rationals. `f64` aliases are provided below.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod banded;
pub mod error;
pub mod fem;
pub mod ineq;
pub mod model;
pub mod quadrature;
pub mod ratecalc;
pub mod resolvent;
pub mod scalar;
pub mod stats;
pub mod timestep;

pub use error::{Error, Result};
pub use fem::{assemble, build_mesh, grading_for_ratio, AssembledSystem, Mesh, StateVector};
pub use model::{BeamConfig, DampingProfile, ProfileForm, Violation};
pub use resolvent::{fit_gamma, resolvent_norm, sweep, GammaFit, ResolventSample};
pub use scalar::{Field, Real};
pub use timestep::{fit_decay, simulate, DecayFit, Trajectory};

pub type Profile64 = DampingProfile<f64>;
pub type Config64 = BeamConfig<f64>;
pub type Mesh64 = Mesh<f64>;
pub type System64 = AssembledSystem<f64>;
pub type State64 = StateVector<f64>;
pub type Trajectory64 = Trajectory<f64>;
pub type Sample64 = ResolventSample<f64>;
