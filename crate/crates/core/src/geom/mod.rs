//! Pointwise linear algebra for plane fields and ambient 2-forms.
//!
//! Everything here operates on samples at a single base point: orthonormal
//! frames for a k-plane, antisymmetric matrices for a 2-form, and the
//! quantitative margins (smallest singular values, wedge values) that the
//! lattice and tube machinery thresholds against.

mod chart;
mod field;
mod frame;
mod io;
mod ops;

pub use chart::{
    extend_by_normal_kernel, tangential_derivative, AmbientForm, ExtensionOptions,
    ExtensionReport, FoliatedChart, LeafwiseForm, VectorField,
};
pub use field::{ContinuityReport, PairSample, PairedDistribution, PlaneField, Smoothness, TwoFormField};
pub use frame::{
    grassmann_distance, intersect_subspaces, orth_complement, orthonormalize, PlaneFieldSample,
};
pub use io::{read_field_samples, write_field_samples, FieldSample};
pub(crate) use io::{join_floats, parse_floats, parse_token};
pub use ops::{
    bivector_from_pair, pair_nondegenerate, pfaffian, project_along, wedge_power_on_frame,
    BivectorSample, ProjectionDescriptor,
};

use nalgebra::DVector;

/// Ambient point; all modules work in a fixed chart of `R^n`.
pub type Point = DVector<f64>;

/// Tolerance for the Gram-identity check on stored frames.
pub const ORTHONORMAL_TOL: f64 = 1e-12;
/// Entrywise tolerance for antisymmetry of 2-form matrices.
pub const ANTISYMMETRY_TOL: f64 = 1e-14;
/// Default floor below which a wedge value counts as degenerate.
pub const NONDEGENERACY_FLOOR: f64 = 1e-12;
/// Default step for central finite differences.
pub const FD_STEP: f64 = 1e-4;
