//! Asynchronous block-iterative solver for Nash equilibria of games with
//! nonsmooth, coupled player objectives.
//!
//! Every numeric type is generic over [`Scalar`] (`f32` or `f64`); the `*F64`
//! aliases below fix the common case.
//!
//! ```
//! use nash_core::{problems, solve, Schedule, SolverParams};
//!
//! let (spec, _) = problems::consensus_two_boxes::<f64>();
//! let params = SolverParams::for_problem(&spec);
//! let result = solve(&spec, &params, &Schedule::random(7, 0.5, 5, 4), None).unwrap();
//! assert!((result.x()[0][0] - 2.0).abs() < 1e-6);
//! ```

// NaN-rejecting checks are written as `!(a > b)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod linops;
pub mod model;
pub mod oracle;
pub mod problems;
pub mod prox;
pub mod scalar;
pub mod scheduler;
pub mod smooth;
pub mod solver;
pub mod tuple;

pub use linops::{LinOp, LinOpError};
pub use model::{
    validate_params, validate_problem, CouplingBlock, PlayerBlock, ProblemSpec, Relaxation,
    SolverParams, StepSchedule, ValidationReport, Violation,
};
pub use oracle::{check_equilibrium, Certificate};
pub use prox::{NonsmoothTerm, ProxError};
pub use scalar::{Scalar, VecBlock};
pub use scheduler::{Activation, Schedule, ScheduleKind, ScheduleViolation, TickPlan};
pub use smooth::{CouplingGradient, SmoothTerm};
pub use solver::{solve, SolveResult, SolveStatus, Solver, SolverError, TickReport};
pub use tuple::Tuple;

pub type LinOpF64 = LinOp<f64>;
pub type NonsmoothTermF64 = NonsmoothTerm<f64>;
pub type SmoothTermF64 = SmoothTerm<f64>;
pub type ProblemSpecF64 = ProblemSpec<f64>;
pub type SolverParamsF64 = SolverParams<f64>;
pub type TupleF64 = Tuple<f64>;
pub type SolveResultF64 = SolveResult<f64>;
pub type CertificateF64 = Certificate<f64>;

pub type ProblemSpecF32 = ProblemSpec<f32>;
pub type SolverParamsF32 = SolverParams<f32>;
