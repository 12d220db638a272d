//! Tubular fibers over skeleton simplices and the deformation that makes a
//! pair of (plane field, 2-form) constant on those fibers.

mod check;
mod fiber;
mod state;
mod step;
mod tube;

pub use check::{check_civilized, CheckOptions, CivilizedReport, ConditionCheck};
pub use fiber::{
    line_fiber, tubular_fiber, FiberCoords, SimplexGeometry, TubularFiber, TRANSVERSALITY_FLOOR,
};
pub use state::{
    read_state, restore_state, write_state, FiberRecord, SkeletonState, StateCheckpoint,
    DEFAULT_OUTER_RATIO,
};
pub use step::{civilize_skeleton, civilize_step, homotopy_sample, CivilizeOptions};
pub use tube::{FiberHit, RadialRetraction, TubeAtlas, NEWTON_MAX_ITERS, NEWTON_TOL};
