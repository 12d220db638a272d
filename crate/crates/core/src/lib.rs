//! Numerical laboratory for 2-plane fields carrying a fiberwise nondegenerate
//! 2-form.
//!
//! The crate is organized around five pillars:
//!
//! * [`geom`] — pointwise linear algebra: orthonormal plane frames, ambient
//!   2-forms, nondegeneracy margins, tangential derivatives along a foliation,
//!   and the bivector correspondence.
//! * [`mesh`] — Kuhn triangulations of cubical lattices, random jiggling,
//!   general-position predicates with quantitative margins, and the
//!   refine-and-jiggle search loop.
//! * [`civilize`] — tubular fibers over simplices of a triangulation and the
//!   step that makes a pair of fields constant on inner fibers via a radial
//!   retraction, plus the straight-line homotopy to the deformed pair.
//! * [`torus`] — an explicit solid-torus foliation built from cutoff
//!   functions, with closed-form integrability and boundary checks, and its
//!   disk-parametrized family.
//! * [`diffeo`] — compactly supported diffeomorphisms as composable closures:
//!   bump flows, twist maps, rotation paths, commutator identities,
//!   fragmentation witnesses, suspensions with traced holonomy, and norm
//!   estimates for perturbation neighborhoods.
//!
//! [`pipeline`] chains the pillars into an end-to-end run driven by a flat
//! key=value [`config`], emitting versioned JSON [`report`]s.

pub mod civilize;
pub mod config;
pub mod diffeo;
pub mod error;
pub mod geom;
pub mod mesh;
pub mod pipeline;
pub mod plots;
pub mod report;
pub mod torus;

pub use error::{Error, Result};

/// Version stamp embedded in every emitted report.
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");
