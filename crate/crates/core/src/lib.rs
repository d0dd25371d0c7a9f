//! Online advance-admission scheduling modelled as online weighted bipartite
//! matching under non-stationary Poisson arrivals.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`]: instances, validation, JSON I/O and synthetic generators.
//! * [`lp`]: the offline matching LP and its fluid relaxation.
//! * [`hjb`]: per-resource reward functions and their marginal values.
//! * [`policies`]: separation, marginal-allocation, greedy and bid-price rules.
//! * [`sim`]: arrival sampling and replicated policy experiments.
//! * [`overbook`]: overbooking costs and virtual-slot expansion.
//! * [`bounds`]: the bounded Poisson process and competitive-ratio bounds.

pub mod bounds;
pub mod hjb;
pub mod lp;
pub mod model;
pub mod overbook;
pub mod policies;
pub mod poisson;
pub mod sim;

pub use hjb::{RewardFunction, SplitRates};
pub use lp::FluidSolution;
pub use model::{ArrivalSample, CustomerType, Instance, RateFunction, RatePiece, Resource};
pub use policies::{Decision, Policy, PolicyKind, PolicyState};
