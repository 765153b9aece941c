//! Model RB random constraint satisfaction: seeded instance generation,
//! exact solving and counting, the tuple-swap flip that changes an
//! instance's satisfiability, first/second moment analytics, parameter
//! feasibility checks, CSP to CNF log-encoding, and a reproducible
//! experiment harness.
//!
//! The analytic modules ([`moments`], [`feasibility`]) are generic over a
//! [`Real`] scalar; the aliases below fix them to `f64`, which is what the
//! harness and CLI use. Solution counts are exact integers and
//! [`moments::binom_ratio`] returns an exact rational alongside its float
//! asymptote.

pub mod csp;
pub mod error;
pub mod feasibility;
pub mod flip;
pub mod generate;
pub mod harness;
pub mod io;
pub mod moments;
pub mod params;
pub mod rng;
pub mod satenc;
pub mod scalar;
pub mod solver;

pub use csp::{Assignment, Constraint, Csp, Instance, Value, Variant};
pub use error::{Error, Result};
pub use flip::{Direction, FlipCertificate};
pub use generate::SymmetricRelation;
pub use params::RBParams;
pub use scalar::Real;
pub use solver::{Mode, SolveResult, SolverConfig, Status};

/// Analytic model point in double precision.
pub type ModelPoint = moments::ModelPoint<f64>;
/// Moment report in double precision.
pub type MomentReport = moments::MomentReport<f64>;
/// Feasibility report in double precision.
pub type FeasibilityReport = feasibility::FeasibilityReport<f64>;
/// Single-precision model point, mostly useful for cross-checking rounding.
pub type ModelPoint32 = moments::ModelPoint<f32>;
