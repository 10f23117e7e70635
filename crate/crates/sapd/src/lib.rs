//! Accelerated primal-dual (APD) solvers for saddle-point problems whose
//! objective depends on a parameter that is learned concurrently from data.
//!
//! The crate provides:
//!
//! * first-order primitives (Bregman distances, projections, proximal maps)
//!   in [`geometry`],
//! * problem descriptions and closed-form step-size recipes in [`problem`],
//! * the one-step APD learner with backtracking and an accelerated projected
//!   gradient routine in [`learner`],
//! * two outer solvers (constant-step and backtracking, the latter aware of
//!   the evolving parameter) in [`solvers`],
//! * a variant for learning problems with multiple optimal solutions,
//!   handled through a pessimistic reformulation, in [`multisol`],
//! * the Markowitz portfolio / sparse covariance selection benchmark in
//!   [`portfolio`], and
//! * reference solutions, convergence metrics and trace emission in
//!   [`metrics`].
//!
//! Dense inner loops route through [`kernels`], which uses rayon when the
//! `parallel` feature (default) is enabled and plain loops otherwise.

pub mod error;
pub mod geometry;
pub mod kernels;
pub mod learner;
pub mod metrics;
pub mod multisol;
pub mod portfolio;
pub mod problem;
pub mod solvers;

pub use error::SolverError;
pub use geometry::{BregmanGeometry, SymMat, Vector};
