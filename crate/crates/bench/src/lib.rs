//! Fixtures shared by the criterion benchmarks.

use fitdae::bench::builtin;
use fitdae::{DaeSystem, FitProblem, Formulation};

/// Problem and assembled system of a built-in scene.
pub fn assembled(id: &str, formulation: Option<Formulation>) -> (FitProblem, DaeSystem) {
    let scene = builtin(id).expect("built-in scene");
    let problem = scene.problem().expect("scene assembles");
    let sys = problem.assemble(formulation.unwrap_or(scene.formulation)).expect("formulation applies");
    (problem, sys)
}

/// Implicit Euler step matrix `M/Δt + K`.
pub fn step_matrix(sys: &DaeSystem, dt: f64) -> fitdae::SparseMatrix {
    sys.m.scale(1.0 / dt).add(&sys.k)
}
