//! Linear conic programming over nonnegative, second-order and PSD cones.
//!
//! This is the solver contract used by the scheduling and beamforming
//! subproblems. [`ConicProblem`] is plain data, so an alternative backend only
//! needs to consume it and fill in a [`ConicSolution`].

mod cones;
mod ipm;
mod model;

pub use model::{
    solve_conic, ConicError, ConicProblem, ConicSolution, ConicStatus, HermitianVar, LinExpr,
    Relation, ScalarVar, Sense, SocVar, SymmetricVar,
};

#[cfg(test)]
mod tests;
