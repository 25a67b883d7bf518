//! Log-radial discretisation with an implicit time stepper.

mod operator;
mod setup;
mod stepper;
mod tridiag;

pub use operator::{assemble_operator, Boundaries, RadialOperator, RightBoundary};
pub use setup::SolverSetup;
pub use stepper::{
    evolve, evolve_with, step_implicit, step_newton, EvolutionConfig, NoReaction, Reaction, ReactionScheme,
    StepDiagnostic, Trajectory,
};
pub use tridiag::solve_tridiagonal;
