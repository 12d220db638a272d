//! Sampled verification of the structural conditions a deformed state must
//! satisfy: shrinking radii; well-formed transverse fibers whose crossings
//! by codimension-two simplices exit through the complement boundary;
//! constancy of the pair on every inner fiber; nesting of overlapping
//! tubes into the tube of the shared face (with the slice alignment that
//! nesting requires); and clearance between tubes and the not yet deformed
//! higher skeleta.
//!
//! Every failure becomes a report entry; errors are reserved for states too
//! malformed to sample at all.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geom::{grassmann_distance, intersect_subspaces, Point};
use crate::mesh::LatticeComplex;

use super::fiber::{SimplexGeometry, TubularFiber};
use super::state::SkeletonState;
use super::tube::{RadialRetraction, TubeAtlas};

/// Sampling effort and tolerances for [`check_civilized`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckOptions {
    /// Subdivision depth when sampling base points on each simplex.
    pub base_depth: usize,
    /// Random fiber points per base for the constancy and nesting checks.
    pub fiber_samples: usize,
    /// Directions per crossing simplex for the boundary-exit check, and
    /// per fiber for the embedding check.
    pub boundary_directions: usize,
    /// Directions along the plane-disk boundary for the slice check.
    pub slice_directions: usize,
    /// Maximum deviation for the pair to count as constant on a fiber.
    pub constancy_tol: f64,
    /// Tolerance on geometric identities (shared bases, matching slice
    /// heights) that hold exactly in exact arithmetic.
    pub geometry_tol: f64,
    /// Angle allowance for the clearance condition: a tube may touch a
    /// higher simplex it shares a face with only within this multiple of
    /// the tube's reach from that face. Covers simplex wedge angles down
    /// to asin(1/factor).
    pub wedge_factor: f64,
    pub seed: u64,
    /// Cap on stored violation messages per condition.
    pub max_violations: usize,
    /// When positive, at most this many simplices are examined per level
    /// (and per dimension in the clearance sweep), taken at a uniform
    /// stride through the sorted face list so the sample is deterministic
    /// and spread across the complex. Zero means examine everything.
    pub max_simplices_per_level: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            base_depth: 2,
            fiber_samples: 6,
            boundary_directions: 4,
            slice_directions: 4,
            constancy_tol: 1e-9,
            geometry_tol: 1e-7,
            wedge_factor: 4.0,
            seed: 7,
            max_violations: 6,
            max_simplices_per_level: 0,
        }
    }
}

/// Indices `0..count` thinned to at most `cap` entries at a uniform
/// stride; all of them when `cap` is zero or not exceeded.
fn stride_indices(count: usize, cap: usize) -> Vec<usize> {
    if cap == 0 || count <= cap {
        return (0..count).collect();
    }
    let step = count.div_ceil(cap);
    (0..count).step_by(step).collect()
}

/// Outcome of one condition: sampled count, worst margin or deviation, and
/// capped violation messages. `worst` is `None` when nothing applicable was
/// sampled.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ConditionCheck {
    pub name: String,
    pub pass: bool,
    pub worst: Option<f64>,
    pub checked: usize,
    pub failures: usize,
    pub violations: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CivilizedReport {
    pub skeleton: i32,
    pub conditions: Vec<ConditionCheck>,
    pub pass: bool,
}

impl CivilizedReport {
    pub fn condition(&self, name: &str) -> Option<&ConditionCheck> {
        self.conditions.iter().find(|c| c.name == name)
    }
}

/// Accumulates one condition's observations. Margin-style conditions keep
/// the minimum (positive is healthy); deviation-style keep the maximum
/// (small is healthy).
struct Tally {
    name: &'static str,
    keep_max: bool,
    worst: Option<f64>,
    checked: usize,
    failures: usize,
    violations: Vec<String>,
    cap: usize,
}

impl Tally {
    fn margin(name: &'static str, cap: usize) -> Self {
        Self { name, keep_max: false, worst: None, checked: 0, failures: 0, violations: Vec::new(), cap }
    }

    fn deviation(name: &'static str, cap: usize) -> Self {
        Self { keep_max: true, ..Self::margin(name, cap) }
    }

    fn observe(&mut self, value: f64, ok: bool, msg: impl FnOnce() -> String) {
        self.checked += 1;
        self.worst = Some(match self.worst {
            None => value,
            Some(w) if self.keep_max => w.max(value),
            Some(w) => w.min(value),
        });
        if !ok {
            self.failures += 1;
            if self.violations.len() < self.cap {
                self.violations.push(msg());
            }
        }
    }

    /// A failure with no meaningful numeric observation.
    fn fail(&mut self, msg: impl FnOnce() -> String) {
        self.checked += 1;
        self.failures += 1;
        if self.violations.len() < self.cap {
            self.violations.push(msg());
        }
    }

    fn into_check(self) -> ConditionCheck {
        ConditionCheck {
            name: self.name.to_string(),
            pass: self.failures == 0,
            worst: self.worst,
            checked: self.checked,
            failures: self.failures,
            violations: self.violations,
        }
    }
}

/// Runs every structural condition against the state's tubes, built from
/// its current pair with its recorded radii.
pub fn check_civilized(state: &SkeletonState, options: &CheckOptions) -> Result<CivilizedReport> {
    let n = state.complex.dim;
    let levels = state.level_count();
    let mut conditions = vec![radii_condition(state, options)];

    if levels > 0 {
        let retraction = RadialRetraction::standard(state.outer_ratio)?;
        let mut atlases = Vec::with_capacity(levels);
        for p in 0..levels {
            atlases.push(TubeAtlas::new(
                &state.pair,
                &state.complex,
                &state.complex.faces_of_dim(p),
                state.deltas[p],
                state.etas[p],
                retraction,
                p + 1 == n,
            )?);
        }
        // Tube lookup by vertex set, per level, for locating shared faces.
        let tube_index: Vec<BTreeMap<Vec<u32>, usize>> = atlases
            .iter()
            .map(|a| {
                (0..a.tube_count()).map(|t| (a.simplex_vertices(t).to_vec(), t)).collect()
            })
            .collect();
        // Codimension-two simplices cross the product fibers; their
        // geometry drives the boundary-exit condition. Only vertex lists
        // are kept here; geometry is built per relevant crossing, since at
        // fine lattices the full list runs to millions of entries.
        let crossings: Vec<Vec<u32>> =
            if n >= 2 { state.complex.faces_of_dim(n - 2) } else { Vec::new() };

        let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
        let mut transv = Tally::margin("fiber-transversality", options.max_violations);
        let mut embed = Tally::deviation("tube-embedding", options.max_violations);
        let mut exit = Tally::margin("boundary-exit", options.max_violations);
        let mut constancy = Tally::deviation("fiber-constancy", options.max_violations);
        let mut nesting = Tally::margin("tube-nesting", options.max_violations);
        let mut clearance = Tally::margin("skeleton-clearance", options.max_violations);

        for (p, atlas) in atlases.iter().enumerate() {
            match atlas.verify_embedding(options.base_depth, options.boundary_directions) {
                Ok(worst) => embed.observe(worst, true, String::new),
                Err(e) => embed.fail(|| format!("level {p}: {e}")),
            }
            for t in stride_indices(atlas.tube_count(), options.max_simplices_per_level) {
                let sigma = atlas.simplex(t);
                let verts = atlas.simplex_vertices(t).to_vec();
                for (bi, x) in sigma.sample_points(options.base_depth).into_iter().enumerate()
                {
                    let fib = match atlas.fiber_at(sigma, &x) {
                        Ok(f) => f,
                        Err(e) => {
                            transv.fail(|| {
                                format!("level {p} simplex {verts:?} base {bi}: {e}")
                            });
                            continue;
                        }
                    };
                    transv.observe(fib.transversality, fib.transversality > 0.0, || {
                        format!(
                            "level {p} simplex {verts:?} base {bi}: transversality {:.3e}",
                            fib.transversality
                        )
                    });
                    if !atlas.line_mode {
                        boundary_exit_sweep(
                            &mut exit, &mut rng, &state.complex, &fib, &verts, &crossings,
                            &x, atlas.delta, atlas.eta, p, options,
                        );
                    }
                    let base_sample = match state.pair.sample(&x) {
                        Ok(s) => s,
                        Err(e) => {
                            constancy.fail(|| {
                                format!("level {p} simplex {verts:?} base {bi}: {e}")
                            });
                            continue;
                        }
                    };
                    for k in 0..options.fiber_samples {
                        let (bv, ev) =
                            draw_fiber_coords(&mut rng, &fib, atlas.delta, atlas.eta);
                        let y = fib.point_at(&bv, &ev);
                        match state.pair.sample(&y) {
                            Ok(s) => {
                                let dev = grassmann_distance(
                                    &s.tau.frame,
                                    &base_sample.tau.frame,
                                )
                                .max((&s.omega - &base_sample.omega).amax());
                                constancy.observe(dev, dev <= options.constancy_tol, || {
                                    format!(
                                        "level {p} simplex {verts:?} base {bi} draw {k}: \
                                         deviation {dev:.3e}"
                                    )
                                });
                            }
                            Err(e) => constancy.fail(|| {
                                format!(
                                    "level {p} simplex {verts:?} base {bi} draw {k}: {e}"
                                )
                            }),
                        }
                        nesting_checks(
                            &mut nesting,
                            &atlases,
                            &tube_index,
                            (p, t),
                            &verts,
                            &fib,
                            &ev,
                            &y,
                            options,
                        );
                    }
                }
            }
        }

        clearance_sweep(&mut clearance, state, &atlases, levels, options);

        conditions.extend(
            [transv, embed, exit, constancy, nesting, clearance].map(Tally::into_check),
        );
    }

    let pass = conditions.iter().all(|c| c.pass);
    Ok(CivilizedReport { skeleton: state.skeleton, conditions, pass })
}

/// Radii must be positive and strictly decreasing level over level. A
/// violation here is reported, never fatal.
fn radii_condition(state: &SkeletonState, options: &CheckOptions) -> ConditionCheck {
    let mut tally = Tally::margin("radii-shrink", options.max_violations);
    for p in 0..state.level_count() {
        let (d, e) = (state.deltas[p], state.etas[p]);
        if p == 0 {
            tally.observe(d.min(e), d > 0.0 && e > 0.0, || {
                format!("level 0 radii ({d}, {e}) not positive")
            });
        } else {
            let gap = (state.deltas[p - 1] - d).min(state.etas[p - 1] - e);
            tally.observe(gap, gap > 0.0 && d > 0.0 && e > 0.0, || {
                format!(
                    "level {p} radii ({d}, {e}) do not shrink below ({}, {})",
                    state.deltas[p - 1],
                    state.etas[p - 1]
                )
            });
        }
    }
    tally.into_check()
}

/// For each codimension-two simplex strictly containing the fiber's base
/// simplex, rays inside the crossing's tangent space must leave the product
/// disk through the complement boundary: the complement gauge has to reach
/// 1 before the plane gauge does.
#[allow(clippy::too_many_arguments)]
fn boundary_exit_sweep(
    tally: &mut Tally,
    rng: &mut ChaCha8Rng,
    complex: &LatticeComplex,
    fib: &TubularFiber,
    verts: &[u32],
    crossings: &[Vec<u32>],
    x: &Point,
    delta: f64,
    eta: f64,
    level: usize,
    options: &CheckOptions,
) {
    let be = stack_frames(&fib.b_frame, &fib.e_frame);
    for cverts in crossings {
        if cverts.len() <= verts.len() || !is_subset(verts, cverts) {
            continue;
        }
        let Ok(cgeom) = SimplexGeometry::from_complex(complex, cverts) else {
            tally.fail(|| format!("level {level}: crossing {cverts:?} is degenerate"));
            continue;
        };
        let w = intersect_subspaces(cgeom.tangent(), &be, 1e-9);
        if w.ncols() == 0 {
            continue;
        }
        let mut dirs: Vec<DVector<f64>> = Vec::new();
        for c in 0..w.ncols() {
            dirs.push(w.column(c).into_owned());
            dirs.push(-w.column(c).into_owned());
        }
        for _ in 0..options.boundary_directions.saturating_sub(dirs.len()) {
            let coeff = DVector::from_fn(w.ncols(), |_, _| rng.random_range(-1.0..1.0));
            let v = &w * coeff;
            if v.norm() > 1e-9 {
                let n = v.norm();
                dirs.push(v / n);
            }
        }
        for dir in dirs {
            let bpart = (fib.b_frame.transpose() * &dir).norm();
            let epart = (fib.e_frame.transpose() * &dir).norm();
            let gauge_rate = (bpart / delta).max(epart / eta);
            if gauge_rate <= 0.0 {
                continue;
            }
            let exit_at = 1.0 / gauge_rate;
            let z = x + &dir * exit_at;
            let u = cgeom.affine_coords(&z);
            if !cgeom.inside(&u, 1e-9) {
                // The crossing simplex ends before the disk boundary;
                // nothing to constrain in this direction.
                continue;
            }
            let margin = (epart / eta - bpart / delta) / gauge_rate;
            tally.observe(margin, margin > 0.0, || {
                format!(
                    "level {level} simplex {verts:?}: crossing {cverts:?} exits through \
                     the plane boundary (margin {margin:.3e})"
                )
            });
        }
    }
}

/// Tests one sampled fiber point against every other tube: overlaps must
/// nest into the shared face's tube, and when the other simplex is a face
/// of this one, the whole plane slice through the point must land inside a
/// single interior slice of the face's fiber.
#[allow(clippy::too_many_arguments)]
fn nesting_checks(
    tally: &mut Tally,
    atlases: &[TubeAtlas],
    tube_index: &[BTreeMap<Vec<u32>, usize>],
    home: (usize, usize),
    home_verts: &[u32],
    fib: &TubularFiber,
    e_draw: &DVector<f64>,
    y: &Point,
    options: &CheckOptions,
) {
    for (q, other) in atlases.iter().enumerate() {
        for t2 in 0..other.tube_count() {
            if (q, t2) == home || !other.might_contain(t2, y) {
                continue;
            }
            let Ok(Some(hit)) = other.project_to_tube(t2, y, 1.0 + 1e-9) else {
                continue;
            };
            let other_verts = other.simplex_vertices(t2);
            let common: Vec<u32> = home_verts
                .iter()
                .copied()
                .filter(|v| other_verts.contains(v))
                .collect();
            if common.is_empty() {
                tally.fail(|| {
                    format!(
                        "tubes of disjoint simplices {home_verts:?} and {other_verts:?} \
                         overlap near {:?}",
                        y.as_slice()
                    )
                });
                continue;
            }
            let r = common.len() - 1;
            let Some(&tr) = tube_index[r].get(&common) else {
                tally.fail(|| {
                    format!("shared face {common:?} has no tube to absorb the overlap")
                });
                continue;
            };
            match atlases[r].project_to_tube(tr, y, 1.0 + 1e-9) {
                Ok(Some(shared)) => {
                    let margin = 1.0 - shared.scaled;
                    tally.observe(margin, margin >= -1e-12, || {
                        format!(
                            "overlap of {home_verts:?} and {other_verts:?} escapes the \
                             shared face {common:?} (gauge {:.6})",
                            shared.scaled
                        )
                    });
                }
                _ => tally.fail(|| {
                    format!(
                        "overlap of {home_verts:?} and {other_verts:?} lies outside the \
                         shared face tube {common:?}"
                    )
                }),
            }
            // Slice alignment against a proper face's tube.
            if common.len() == other_verts.len() && other_verts.len() < home_verts.len() {
                slice_check(
                    tally, other, t2, &hit, fib, e_draw, home_verts, other_verts, options,
                );
            }
        }
    }
}

/// The plane-disk slice through a point of the overlap must sit inside one
/// strictly interior slice of the face's fiber: same base, same complement
/// height, plane gauge below 1.
#[allow(clippy::too_many_arguments)]
fn slice_check(
    tally: &mut Tally,
    face_atlas: &TubeAtlas,
    face_tube: usize,
    reference: &super::tube::FiberHit,
    fib: &TubularFiber,
    e_draw: &DVector<f64>,
    home_verts: &[u32],
    face_verts: &[u32],
    options: &CheckOptions,
) {
    let nb = fib.b_frame.ncols();
    for d in 0..options.slice_directions.max(1) {
        let angle = d as f64 * std::f64::consts::PI / options.slice_directions.max(1) as f64;
        let mut bdir = DVector::zeros(nb);
        if nb == 1 {
            bdir[0] = if d % 2 == 0 { 1.0 } else { -1.0 };
        } else {
            bdir[0] = angle.cos();
            bdir[1] = angle.sin();
        }
        let z = fib.point_at(&(bdir * fib.delta), e_draw);
        match face_atlas.project_to_tube(face_tube, &z, 2.0) {
            Ok(Some(hz)) => {
                let b_gauge = hz.b.norm() / face_atlas.delta;
                let base_drift = (&hz.base - &reference.base).norm();
                let height_drift = (&hz.e - &reference.e).norm();
                let aligned = base_drift <= options.geometry_tol
                    && height_drift <= options.geometry_tol;
                tally.observe(1.0 - b_gauge, b_gauge < 1.0 && aligned, || {
                    format!(
                        "slice of {home_verts:?} through the fiber of {face_verts:?} is \
                         not interior to one slice (plane gauge {b_gauge:.6}, base drift \
                         {base_drift:.3e}, height drift {height_drift:.3e})"
                    )
                });
            }
            _ => tally.fail(|| {
                format!(
                    "slice of {home_verts:?} escapes the fiber of {face_verts:?} entirely"
                )
            }),
        }
    }
}

/// Tubes must stay clear of the higher-dimensional simplices that have not
/// been deformed over yet: a tube whose simplex shares a face with a higher
/// simplex may touch it only within the angle allowance of the tube's reach
/// around that shared face, and a tube must miss simplices disjoint from
/// its own entirely.
fn clearance_sweep(
    tally: &mut Tally,
    state: &SkeletonState,
    atlases: &[TubeAtlas],
    levels: usize,
    options: &CheckOptions,
) {
    let n = state.complex.dim;
    for q in levels..=n {
        let uppers = state.complex.faces_of_dim(q);
        for ui in stride_indices(uppers.len(), options.max_simplices_per_level) {
            let upper = uppers[ui].clone();
            let Ok(geom) = SimplexGeometry::from_complex(&state.complex, &upper) else {
                continue;
            };
            for z in geom.sample_points(options.base_depth) {
                for atlas in atlases {
                    let reach = atlas.retraction.outer
                        * (atlas.delta * atlas.delta + atlas.eta * atlas.eta).sqrt();
                    for t in 0..atlas.tube_count() {
                        let verts = atlas.simplex_vertices(t);
                        if is_subset(verts, &upper) || !atlas.might_contain(t, &z) {
                            continue;
                        }
                        let Ok(Some(hit)) =
                            atlas.project_to_tube(t, &z, 2.0 * atlas.retraction.outer)
                        else {
                            continue;
                        };
                        if hit.scaled > 1.0 {
                            tally.observe(hit.scaled - 1.0, true, String::new);
                            continue;
                        }
                        let common: Vec<u32> = verts
                            .iter()
                            .copied()
                            .filter(|v| upper.contains(v))
                            .collect();
                        if common.is_empty() {
                            tally.observe(hit.scaled - 1.0, false, || {
                                format!(
                                    "tube of {verts:?} reaches the disjoint {q}-simplex \
                                     {upper:?} (gauge {:.6})",
                                    hit.scaled
                                )
                            });
                            continue;
                        }
                        let dist = simplex_distance(&state.complex, &common, &z);
                        let allowance = options.wedge_factor * reach;
                        tally.observe(1.0 - dist / allowance, dist <= allowance, || {
                            format!(
                                "tube of {verts:?} reaches the {q}-simplex {upper:?} at \
                                 distance {dist:.3e} from their shared face {common:?} \
                                 (allowance {allowance:.3e})"
                            )
                        });
                    }
                }
            }
        }
    }
}

/// Euclidean distance from a point to a (closed) simplex of the complex,
/// by projecting onto every sub-face's affine hull and keeping the closest
/// projection that lands inside its face.
fn simplex_distance(complex: &crate::mesh::LatticeComplex, verts: &[u32], z: &Point) -> f64 {
    let mut best = f64::INFINITY;
    let count = verts.len();
    for mask in 1u32..(1 << count) {
        let subset: Vec<u32> = (0..count)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| verts[i])
            .collect();
        let Ok(geom) = SimplexGeometry::from_complex(complex, &subset) else {
            continue;
        };
        let u = geom.affine_coords(z);
        if geom.inside(&u, 1e-12) {
            best = best.min((z - geom.point(&u)).norm());
        }
    }
    best
}

fn draw_fiber_coords(
    rng: &mut ChaCha8Rng,
    fib: &TubularFiber,
    delta: f64,
    eta: f64,
) -> (DVector<f64>, DVector<f64>) {
    let nb = fib.b_frame.ncols();
    let ne = fib.e_frame.ncols();
    let mut b = DVector::from_fn(nb, |_, _| rng.random_range(-1.0..1.0));
    if b.norm() > 1.0 {
        b /= b.norm();
    }
    let mut e = DVector::from_fn(ne, |_, _| rng.random_range(-1.0..1.0));
    if e.norm() > 1.0 {
        e /= e.norm();
    }
    let t = rng.random_range(0.2..1.0);
    (b * (delta * t), e * (eta * t))
}

fn stack_frames(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), (a.nrows(), a.ncols())).copy_from(a);
    out.view_mut((0, a.ncols()), (b.nrows(), b.ncols())).copy_from(b);
    out
}

fn is_subset(small: &[u32], big: &[u32]) -> bool {
    small.iter().all(|v| big.contains(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::civilize::{civilize_skeleton, CivilizeOptions};
    use crate::geom::{PairedDistribution, PlaneField, Smoothness, TwoFormField};
    use crate::mesh::{kuhn_triangulation, LatticeSpec};
    use nalgebra::dmatrix;

    fn demo_pair(rate: f64) -> PairedDistribution {
        let tau = PlaneField::new(3, 2, Smoothness::Analytic, move |x: &Point| {
            dmatrix![
                1.0, 0.0;
                0.0, 1.0;
                0.25 + rate * x[2], -0.2 + rate * x[0];
            ]
        });
        let omega = TwoFormField::new(3, |_x| {
            let mut m = DMatrix::zeros(3, 3);
            m[(0, 1)] = 1.0;
            m[(1, 0)] = -1.0;
            m
        });
        PairedDistribution::new(tau, omega).unwrap()
    }

    fn civilized_state(rate: f64, levels: usize) -> SkeletonState {
        let spec = LatticeSpec::new(3, 1, vec![0.0; 3], vec![1.0; 3]).unwrap();
        let complex = kuhn_triangulation(&spec).unwrap();
        let mut state = SkeletonState::start(complex, demo_pair(rate)).unwrap();
        let opts = CivilizeOptions { embed_depth: 1, embed_directions: 2, ..Default::default() };
        for p in 0..levels {
            state = civilize_skeleton(&state, p, &opts).unwrap();
        }
        state
    }

    fn slim_options() -> CheckOptions {
        CheckOptions {
            base_depth: 1,
            fiber_samples: 3,
            boundary_directions: 2,
            slice_directions: 2,
            ..Default::default()
        }
    }

    #[test]
    fn civilized_levels_pass_every_condition() {
        let state = civilized_state(0.15, 2);
        let report = check_civilized(&state, &slim_options()).unwrap();
        for c in &report.conditions {
            assert!(c.pass, "{} failed: {:?} (worst {:?})", c.name, c.violations, c.worst);
        }
        assert!(report.pass);
        assert_eq!(report.skeleton, 1);
        let constancy = report.condition("fiber-constancy").unwrap();
        assert!(constancy.checked > 0);
        assert!(constancy.worst.unwrap() < 1e-9);
        let transv = report.condition("fiber-transversality").unwrap();
        assert!(transv.worst.unwrap() > 1e-3);
    }

    #[test]
    fn codimension_one_level_passes_with_line_fibers() {
        let state = civilized_state(0.1, 3);
        let report = check_civilized(&state, &slim_options()).unwrap();
        for c in &report.conditions {
            assert!(c.pass, "{} failed: {:?} (worst {:?})", c.name, c.violations, c.worst);
        }
        assert_eq!(report.skeleton, 2);
    }

    #[test]
    fn undeformed_pair_fails_constancy_only_as_a_report() {
        let deformed = civilized_state(0.15, 1);
        // Same radii bookkeeping, but the pair was never deformed.
        let mut state = deformed.clone();
        state.pair = demo_pair(0.15);
        let report = check_civilized(&state, &slim_options()).unwrap();
        assert!(!report.pass);
        let constancy = report.condition("fiber-constancy").unwrap();
        assert!(!constancy.pass);
        assert!(constancy.worst.unwrap() > 1e-6);
        assert!(!constancy.violations.is_empty());
    }

    #[test]
    fn growing_radii_are_reported_not_fatal() {
        let mut state = civilized_state(0.15, 2);
        state.deltas[1] = state.deltas[0] * 2.0;
        let report = check_civilized(&state, &slim_options()).unwrap();
        assert!(!report.pass);
        let radii = report.condition("radii-shrink").unwrap();
        assert!(!radii.pass);
        assert!(radii.worst.unwrap() < 0.0);
    }

    #[test]
    fn oversized_tubes_break_nesting_and_clearance() {
        let spec = LatticeSpec::new(3, 1, vec![0.0; 3], vec![1.0; 3]).unwrap();
        let complex = kuhn_triangulation(&spec).unwrap();
        let mut state = SkeletonState::start(complex, demo_pair(0.05)).unwrap();
        // Vertex tubes wide enough to swallow neighboring vertices' tubes
        // and pieces of far edges.
        state.skeleton = 0;
        state.deltas = vec![1.5];
        state.etas = vec![0.8];
        let report = check_civilized(&state, &slim_options()).unwrap();
        assert!(!report.pass);
        let nesting = report.condition("tube-nesting").unwrap();
        let clearance = report.condition("skeleton-clearance").unwrap();
        assert!(
            !nesting.pass || !clearance.pass,
            "expected overlap or clearance failures, got {report:?}"
        );
    }
}
