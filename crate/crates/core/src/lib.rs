//! Explicit time stepping for stiff ODEs: cG(1) fixed-point steps with
//! automatic stabilization by sequences of small damping steps.

pub mod controller;
pub mod damping;
pub mod harness;
pub mod oracle;
pub mod problems;
pub mod solver;

pub use controller::{adaptive_solve, AdaptiveSolution, CostReport, DampingMode, SolverConfig};
pub use problems::BenchmarkProblem;
pub use solver::{OdeProblem, State, StepKind, Trajectory};
