//! Energy-cost scheduling for a shared HVAC system serving a multi-zone
//! building.
//!
//! The bilinear optimal-control problem is relaxed with McCormick envelopes
//! ([`relax`]), solved by a decentralized augmented-Lagrangian method
//! ([`adal`]), and turned back into a dynamics-feasible schedule
//! ([`recover`]). Centralized and brute-force references live in
//! [`baseline`].
//!
//! Every numeric type is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the common `f64` instantiation.

pub mod adal;
pub mod baseline;
pub mod model;
pub mod power;
pub mod recover;
pub mod relax;
pub mod scalar;

pub use scalar::Scalar;

pub type Building = model::BuildingModel<f64>;
pub type Exogenous = model::ExogenousSeries<f64>;
pub type Dynamics = model::DiscreteDynamics<f64>;
pub type Zone = model::ZoneParams<f64>;
pub type Ahu = model::AhuParams<f64>;
pub type Problem = relax::RelaxedProblem<f64>;
pub type Building32 = model::BuildingModel<f32>;
pub type Exogenous32 = model::ExogenousSeries<f32>;
pub type Problem32 = relax::RelaxedProblem<f32>;
