//! Reachability analysis and collision-certified trajectory planning for a
//! point-mass vehicle, by grid-based Hamilton-Jacobi-Bellman level sets.
//!
//! The pipeline: describe the road, obstacles and target as level-set
//! expressions ([`levelset`]), march the value function on a uniform grid
//! ([`hjb`]), turn it into a minimal-time field and reconstruct a trajectory
//! ([`mintime`]), then certify each step against the obstacles
//! ([`collision`]). [`scenario`] wires this to configuration files.

// Negated float comparisons reject NaN inputs.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod collision;
pub mod dynamics;
pub mod error;
pub mod grid;
pub mod hjb;
pub mod levelset;
pub mod mintime;
pub mod scenario;

pub use dynamics::{Control, ControlBounds, Dynamics, PointMass, State4};
pub use error::{Error, Result};
pub use grid::{Axis, GridSpec, ScalarField};
pub use hjb::{HjbProblem, Mode, SolveOptions, ValueEvolution};
pub use levelset::{LevelSetExpr, Motion, Obstacle, Rect, Shape};
pub use mintime::{MinimalTimeField, Trajectory};
pub use scenario::{builtin_scenario, ScenarioConfig};
