//! Compactly supported diffeomorphisms and paths of them: generation by
//! flows and closed-form twists, group operations as closure composition,
//! perturbation-size norms, path concatenation and subdivision, commutator
//! and fragmentation identity checks, and suspension foliations with traced
//! holonomy.

mod cdiffeo;
mod generators;
mod norms;
mod ode;
mod paths;
mod scenario;
mod suspension;
mod tsuboi;

pub use cdiffeo::{probe_points, CDiffeo, MapFn, SupportBox, DEFAULT_FD_STEP};
pub use norms::{compose_72_check, in_v_eps, v_eps_norm, Compose72Report, ComposeTrial, VEPS_SAFETY};
pub use generators::{
    bump, bump_derivative, bump_derivative_max, disk_plateau, displacement_bump_norm,
    make_bump_flow, make_displacement_bump, make_plateau_translation, make_twist,
    smoothstep_derivative_max, validate_disk_profile, DiskProfile, TubeChart, MAX_FLOW_TIME,
};
pub use ode::{integrate, integrate_rk4, OdeOptions};
pub use paths::{
    adjust, concatenate, make_rotation_path, path_velocity, subdivide_path, subdivision_norms,
    DiffeoPath, FormFn, PairedPath, PathFn, PATH_FD_STEP,
};
pub use scenario::{CheckOutcome, CheckSpec, ConcatReport, Scenario, SuspendReport, VepsReport};
pub use suspension::{suspend, torus_boundary_tangent, SuspensionFoliation, TRACE_TOL};
pub use tsuboi::{
    fragmentation_verify, tsuboi_corollary_verify, tsuboi_factors, tsuboi_verify, BumpFieldSpec,
    FragmentationReport, TsuboiReport, FRAGMENTATION_SLOTS, TSUBOI_TOL,
};
