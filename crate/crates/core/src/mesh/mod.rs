//! Kuhn triangulations of cubical lattices, jiggling, and quantitative
//! general-position checks against a plane field.

mod genpos;
mod jiggle;
mod io;
mod lattice;

pub use genpos::{
    check_complex_region, check_lattice_conditions, face_margins, find_general_position,
    general_position_simplex, AttemptRecord, ConditionsReport, FaceMargin, GeneralPositionReport,
    GraphNormRecord, SimplexVerdict, SweepBudget, SweepOutcome, SweepSuccess,
};
pub use jiggle::{jiggle, Jiggling, JIGGLE_GUARD_FRACTION};
pub use io::{read_jiggling, read_mesh, write_jiggling, write_mesh};
pub use lattice::{kuhn_triangulation, LatticeComplex, LatticeSpec};

/// Default barycentric sampling depth for per-simplex checks.
pub const DEFAULT_SAMPLE_DEPTH: usize = 2;
/// Default margin floor for general-position verdicts.
pub const DEFAULT_MARGIN_FLOOR: f64 = 1e-9;
