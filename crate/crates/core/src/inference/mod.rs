//! Likelihood potentials, the Onsager–Machlup functional and MAP estimators.

mod conditions;
mod likelihood;
mod problem;
mod solver;

pub use conditions::{
    check_linear_condition, nonlinear_condition_constant, unbounded_phi_witness, witness_sequence,
    LinearConditionReport, WitnessReport,
};
pub use likelihood::{
    lipschitz_bound, lipschitz_info, phi_heat, psi_gaussian, psi_laplacian, ForwardOp, LipschitzInfo, NoiseKind,
    NoiseModel,
};
pub use problem::HeatProblem;
pub use solver::{MapSolution, SolveStatus, SolverOptions};
