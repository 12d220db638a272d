//! A closed-form foliation of the solid torus built from radial cutoffs,
//! together with a companion 2-form that is nondegenerate along leaves, the
//! boundary identities tying the 2-form to the boundary 1-form, and a
//! disk-parameterized family interpolating the construction with a product
//! foliation. Everything is verified numerically on grids.

mod cutoffs;
mod family;
mod model;
mod verify;

pub use cutoffs::{smoothstep, smoothstep_derivative, CutoffTriple, PlateauCutoff};
pub use family::{DiskTerm, FamilyModel};
pub use model::{BandSign, BetaSample, SolidTorusModel};
pub use verify::{verify_example, verify_family, FamilyReport, TorusReport};
