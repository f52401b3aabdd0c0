//! Fixtures shared by the solver benchmarks.

use hjreach::scenario::builtin_scenario;
use hjreach::{HjbProblem, PointMass, ScalarField};

/// Scenario 1 at refinement level `m`, `(35 2^m) x (4 2^m) x 20 x 6` nodes.
pub fn scenario1(m: u32) -> HjbProblem<PointMass> {
    builtin_scenario("scenario1").and_then(|cfg| cfg.refined(m).problem()).expect("built-in scenario is valid")
}

/// Initial value field and CFL step of a problem.
pub fn initial_state(p: &HjbProblem<PointMass>) -> (ScalarField, f64) {
    let v = hjreach::hjb::initialize(p).expect("problem initializes");
    let dt = p.cfl_limit().expect("finite CFL step");
    (v, dt)
}
