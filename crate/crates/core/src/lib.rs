//! Integral core allocations for two-stage and multistage stochastic
//! assignment games.
//!
//! The solver reduces the allocation LP to a minimum cut in an auxiliary flow
//! network and reads an integral optimum off the canonical cut. All arithmetic
//! on the solve path is exact.

pub mod corpus;
pub mod flow;
pub mod graph;
pub mod instance;
pub mod numeric;
pub mod reduce;
pub mod saa;
pub mod solver;

/// Exact rational scalar used throughout the solve path.
pub type Rational = num_rational::BigRational;
/// Arbitrary-precision integer (capacities, sample counts).
pub type Integer = num_bigint::BigInt;
/// Allocation with exact rational values.
pub type RationalAllocation = graph::Allocation<Rational>;

pub use graph::{Allocation, BipartiteGraph, Side};
pub use instance::{Instance, Mode, MultistageInstance, Scenario, TwoStageInstance};
