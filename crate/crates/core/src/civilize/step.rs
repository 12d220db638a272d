//! The civilization deformation: level by level over the skeleta of a
//! triangulation, the pair of fields is pulled back through tube
//! retractions until it is constant on every inner fiber.
//!
//! All fibers of one level are built from that level's input pair, and the
//! level's point map is the composition of the per-tube retractions, so
//! deforming a whole level costs one retraction pass per sample instead of
//! one nested pair evaluation per tube.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{intersect_subspaces, PairedDistribution};
use crate::mesh::LatticeComplex;

use super::fiber::{tubular_fiber, SimplexGeometry};
use super::state::SkeletonState;
use super::tube::{RadialRetraction, TubeAtlas};

/// Knobs for the level-by-level schedule. The defaults implement the
/// radii cascade delta_0 = spacing/8, delta_p = delta_{p-1}/4 and
/// eta_p = min(eta_{p-1}/4, delta_p/8), with up to eight halvings when an
/// embedding check rejects a level's radii. On top of the cascade, eta is
/// capped so that every codimension-two simplex crossing a tube leaves the
/// product fiber through the complement boundary, never the plane boundary;
/// the cap is the worst crossing's complement-to-plane component ratio
/// scaled by `crossing_safety`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CivilizeOptions {
    /// delta_0 = spacing / this.
    pub first_delta_fraction: f64,
    /// Per-level shrink factor for both radii.
    pub delta_shrink: f64,
    /// Ceiling eta_p <= delta_p / this.
    pub eta_ratio: f64,
    /// Fraction of the worst crossing ratio that eta may use.
    pub crossing_safety: f64,
    /// Halve-and-retry attempts when the embedding check fails.
    pub max_retries: u32,
    /// Base-point sampling depth for the embedding check.
    pub embed_depth: usize,
    /// Fiber directions per base for the embedding check.
    pub embed_directions: usize,
}

impl Default for CivilizeOptions {
    fn default() -> Self {
        Self {
            first_delta_fraction: 8.0,
            delta_shrink: 4.0,
            eta_ratio: 8.0,
            crossing_safety: 0.5,
            max_retries: 8,
            embed_depth: 2,
            embed_directions: 4,
        }
    }
}

/// Embedding-check sampling used by the single-simplex step.
const STEP_EMBED_DEPTH: usize = 2;
const STEP_EMBED_DIRECTIONS: usize = 4;
/// Base-point sampling depth when measuring crossing ratios.
const CROSSING_SAMPLE_DEPTH: usize = 2;

/// Deforms the state's pair over one simplex's tube: constant (equal to the
/// base value) on inner fibers, input composed with the radial retraction
/// on the annulus, untouched outside the outer tube.
///
/// `sigma` lists vertex indices into the state's complex; the radii must
/// shrink strictly below the previous level's. The tube is verified to be
/// embedded on samples first, so oversized radii are rejected instead of
/// silently folding fibers onto each other.
pub fn civilize_step(
    state: &SkeletonState,
    sigma: &[u32],
    delta: f64,
    eta: f64,
    retraction: RadialRetraction,
) -> Result<PairedDistribution> {
    check_radii(state, delta, eta)?;
    let n = state.complex.dim;
    if sigma.is_empty() || sigma.len() > n {
        return Err(Error::Dimension(format!(
            "a tube needs a simplex of dimension 0..{} in R^{n}, got {} vertices",
            n - 1,
            sigma.len()
        )));
    }
    let line_mode = sigma.len() == n;
    let atlas = TubeAtlas::new(
        &state.pair,
        &state.complex,
        &[sigma.to_vec()],
        delta,
        eta,
        retraction,
        line_mode,
    )?;
    atlas.verify_embedding(STEP_EMBED_DEPTH, STEP_EMBED_DIRECTIONS)?;
    Ok(Arc::new(atlas).deformed_pair(1.0))
}

/// Civilizes the next skeleton level: every simplex of dimension `p` gets a
/// tube, the radii follow the schedule in `options` (halving on embedding
/// failures), and the returned state carries the deformed pair with the
/// radii history extended.
pub fn civilize_skeleton(
    state: &SkeletonState,
    p: usize,
    options: &CivilizeOptions,
) -> Result<SkeletonState> {
    expect_next_level(state, p)?;
    if !(options.crossing_safety > 0.0 && options.crossing_safety <= 1.0) {
        return Err(Error::Precondition(format!(
            "crossing safety must lie in (0, 1], got {}",
            options.crossing_safety
        )));
    }
    let mut delta = if p == 0 {
        state.complex.spacing / options.first_delta_fraction
    } else {
        state.last_delta() / options.delta_shrink
    };
    let mut eta = (state.last_eta() / options.delta_shrink).min(delta / options.eta_ratio);
    let simplices = state.complex.faces_of_dim(p);
    let mut last_err = None;
    for _ in 0..=options.max_retries {
        let mut eta_try = eta;
        if let Some(ratio) =
            crossing_ratio_cap(&state.pair, &state.complex, &simplices, delta)?
        {
            eta_try = eta_try.min(options.crossing_safety * ratio * delta);
        }
        match civilize_level_with_radii(
            state,
            p,
            delta,
            eta_try,
            options.embed_depth,
            options.embed_directions,
        ) {
            Ok(next) => return Ok(next),
            Err(Error::Degenerate(msg)) => {
                last_err = Some(Error::Degenerate(msg));
                delta /= 2.0;
                eta /= 2.0;
            }
            Err(other) => return Err(other),
        }
    }
    Err(last_err.expect("retry loop ran at least once"))
}

/// The largest complement-to-plane radius ratio the level can carry. Along
/// every codimension-two simplex strictly containing a tube's simplex, the
/// complement gauge has to reach 1 before the plane gauge, so eta/delta
/// must stay below the crossing direction's complement-to-plane component
/// ratio. Only directions whose plane-boundary exit point still lies inside
/// the crossing simplex constrain the ratio; shrinking eta never adds such
/// directions, so the bound needs no iteration. Returns None when nothing
/// constrains the level.
fn crossing_ratio_cap(
    pair: &PairedDistribution,
    complex: &LatticeComplex,
    simplices: &[Vec<u32>],
    delta: f64,
) -> Result<Option<f64>> {
    let n = complex.dim;
    let Some(first) = simplices.first() else {
        return Ok(None);
    };
    let low = first.len();
    // Strict containment in a codimension-two simplex needs level
    // dimension at most n - 3.
    if n < 2 || low >= n - 1 {
        return Ok(None);
    }
    // Walk the crossings once. Every size-`low` subset of a crossing's
    // vertex set is a level simplex of the same cell, and every (simplex,
    // crossing) pair with strict containment arises this way, so this
    // covers exactly the pairs that constrain the ratio. Crossings are
    // independent; collect per-crossing minima in index order.
    let crossings = complex.faces_of_dim(n - 2);
    let per_crossing: Vec<Result<Option<f64>>> = crossings
        .par_iter()
        .map(|cverts| crossing_min_ratio(pair, complex, cverts, low, delta))
        .collect();
    let mut cap: Option<f64> = None;
    for r in per_crossing {
        if let Some(ratio) = r? {
            cap = Some(cap.map_or(ratio, |c: f64| c.min(ratio)));
        }
    }
    Ok(cap)
}

/// Worst (smallest) boundary-exit ratio contributed by one crossing over
/// all its strict sub-simplices with `low` vertices.
fn crossing_min_ratio(
    pair: &PairedDistribution,
    complex: &LatticeComplex,
    cverts: &[u32],
    low: usize,
    delta: f64,
) -> Result<Option<f64>> {
    let n = complex.dim;
    let cgeom = SimplexGeometry::from_complex(complex, cverts)?;
    let mut cap: Option<f64> = None;
    for pick in subsets_of_size(cverts, low) {
        let sigma = SimplexGeometry::from_complex(complex, &pick)?;
        for x in sigma.sample_points(CROSSING_SAMPLE_DEPTH) {
            let fib = tubular_fiber(&x, &sigma, pair, delta, delta)?;
            let mut be =
                nalgebra::DMatrix::zeros(n, fib.b_frame.ncols() + fib.e_frame.ncols());
            be.view_mut((0, 0), (n, fib.b_frame.ncols())).copy_from(&fib.b_frame);
            be.view_mut((0, fib.b_frame.ncols()), (n, fib.e_frame.ncols()))
                .copy_from(&fib.e_frame);
            let w = intersect_subspaces(cgeom.tangent(), &be, 1e-9);
            if w.ncols() == 0 {
                continue;
            }
            // Candidate worst directions: the extremes of the plane
            // component over the crossing's directions (right singular
            // vectors of B^T W) plus the frame columns themselves.
            let btw = fib.b_frame.transpose() * &w;
            let mut coeffs: Vec<nalgebra::DVector<f64>> = (0..w.ncols())
                .map(|c| {
                    let mut v = nalgebra::DVector::zeros(w.ncols());
                    v[c] = 1.0;
                    v
                })
                .collect();
            if let Some(vt) = btw.svd(false, true).v_t {
                for r in 0..vt.nrows() {
                    coeffs.push(vt.row(r).transpose());
                }
            }
            for c in coeffs {
                for sign in [1.0, -1.0] {
                    let dir = &w * &c * sign;
                    let norm = dir.norm();
                    if norm < 1e-12 {
                        continue;
                    }
                    let dir = dir / norm;
                    let bpart = (fib.b_frame.transpose() * &dir).norm();
                    let epart = (fib.e_frame.transpose() * &dir).norm();
                    if bpart < 1e-12 {
                        continue;
                    }
                    let exit = &x + &dir * (delta / bpart);
                    if !cgeom.inside(&cgeom.affine_coords(&exit), 1e-9) {
                        continue;
                    }
                    let ratio = epart / bpart;
                    cap = Some(cap.map_or(ratio, |c: f64| c.min(ratio)));
                }
            }
        }
    }
    Ok(cap)
}

/// All strictly smaller subsets of `verts` with exactly `size` elements,
/// in lexicographic order.
fn subsets_of_size(verts: &[u32], size: usize) -> Vec<Vec<u32>> {
    let n = verts.len();
    let mut out = Vec::new();
    if size == 0 || size >= n {
        return out;
    }
    let mut idx: Vec<usize> = (0..size).collect();
    loop {
        out.push(idx.iter().map(|&i| verts[i]).collect());
        // Rightmost counter with room to advance; reset those after it.
        let mut i = size;
        while i > 0 && idx[i - 1] == i - 1 + n - size {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        idx[i - 1] += 1;
        for j in i..size {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// One level at explicit radii, no retries. Checkpoint replay uses this to
/// reproduce a run from its recorded radii.
pub(crate) fn civilize_level_with_radii(
    state: &SkeletonState,
    p: usize,
    delta: f64,
    eta: f64,
    embed_depth: usize,
    embed_directions: usize,
) -> Result<SkeletonState> {
    expect_next_level(state, p)?;
    check_radii(state, delta, eta)?;
    let n = state.complex.dim;
    let simplices = state.complex.faces_of_dim(p);
    let retraction = RadialRetraction::standard(state.outer_ratio)?;
    let atlas = TubeAtlas::new(
        &state.pair,
        &state.complex,
        &simplices,
        delta,
        eta,
        retraction,
        p + 1 == n,
    )?;
    atlas.verify_embedding(embed_depth, embed_directions)?;
    let pair = Arc::new(atlas).deformed_pair(1.0);
    let mut deltas = state.deltas.clone();
    deltas.push(delta);
    let mut etas = state.etas.clone();
    etas.push(eta);
    Ok(SkeletonState {
        complex: state.complex.clone(),
        skeleton: p as i32,
        deltas,
        etas,
        pair,
        outer_ratio: state.outer_ratio,
    })
}

/// The straight-line deformation between two consecutive states: at t = 0
/// the earlier pair (bitwise), at t = 1 the later one, in between the pair
/// pulled back through the partially applied retractions. Values along the
/// way are always input values on the same fiber ray, so nondegeneracy
/// margins never drop below the ray's worst input margin.
pub fn homotopy_sample(
    from: &SkeletonState,
    to: &SkeletonState,
    t: f64,
) -> Result<PairedDistribution> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Precondition(format!("homotopy time must lie in [0, 1], got {t}")));
    }
    if to.skeleton != from.skeleton + 1 {
        return Err(Error::Precondition(format!(
            "states must be consecutive levels, got {} then {}",
            from.skeleton, to.skeleton
        )));
    }
    if from.outer_ratio != to.outer_ratio {
        return Err(Error::Precondition("states disagree on the outer tube ratio".into()));
    }
    if from.complex != to.complex {
        return Err(Error::Precondition("states live over different complexes".into()));
    }
    let p = to.skeleton as usize;
    if to.deltas.len() != p + 1
        || to.etas.len() != p + 1
        || to.deltas[..p] != from.deltas[..]
        || to.etas[..p] != from.etas[..]
    {
        return Err(Error::Precondition("radii histories of the two states disagree".into()));
    }
    let n = from.complex.dim;
    let simplices = from.complex.faces_of_dim(p);
    let retraction = RadialRetraction::standard(to.outer_ratio)?;
    let atlas = TubeAtlas::new(
        &from.pair,
        &from.complex,
        &simplices,
        to.deltas[p],
        to.etas[p],
        retraction,
        p + 1 == n,
    )?;
    Ok(Arc::new(atlas).deformed_pair(t))
}

fn check_radii(state: &SkeletonState, delta: f64, eta: f64) -> Result<()> {
    if !(delta > 0.0 && eta > 0.0) {
        return Err(Error::Precondition(format!(
            "tube radii must be positive, got {delta}, {eta}"
        )));
    }
    if !(delta < state.last_delta() && eta < state.last_eta()) {
        return Err(Error::Precondition(format!(
            "tube radii must shrink strictly below the previous level's ({}, {}), got ({delta}, {eta})",
            state.last_delta(),
            state.last_eta()
        )));
    }
    Ok(())
}

fn expect_next_level(state: &SkeletonState, p: usize) -> Result<()> {
    if p as i32 != state.skeleton + 1 {
        return Err(Error::Precondition(format!(
            "levels must be civilized in order: next is {}, requested {p}",
            state.skeleton + 1
        )));
    }
    let n = state.complex.dim;
    if p + 1 > n {
        return Err(Error::Dimension(format!(
            "skeleton dimension {p} leaves no fiber directions in R^{n}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::civilize::{tubular_fiber, SimplexGeometry};
    use crate::geom::{
        grassmann_distance, pair_nondegenerate, PlaneField, Point, Smoothness, TwoFormField,
    };
    use crate::mesh::{kuhn_triangulation, LatticeSpec};
    use nalgebra::{dmatrix, DMatrix, DVector};

    fn tilted_pair(rate: f64) -> PairedDistribution {
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

    fn cube_state(rate: f64) -> SkeletonState {
        let spec = LatticeSpec::new(3, 1, vec![0.0; 3], vec![1.0; 3]).unwrap();
        let complex = kuhn_triangulation(&spec).unwrap();
        SkeletonState::start(complex, tilted_pair(rate)).unwrap()
    }

    fn assert_same_values(a: &PairedDistribution, b: &PairedDistribution, probes: &[Point]) {
        for y in probes {
            let sa = a.sample(y).unwrap();
            let sb = b.sample(y).unwrap();
            assert_eq!(sa.tau.frame, sb.tau.frame, "frames differ at {y:?}");
            assert_eq!(sa.omega, sb.omega, "forms differ at {y:?}");
        }
    }

    #[test]
    fn vertex_level_pins_values_to_the_vertex() {
        let state0 = cube_state(0.15);
        let s1 = civilize_skeleton(&state0, 0, &CivilizeOptions::default()).unwrap();
        assert_eq!(s1.skeleton, 0);
        assert_eq!(s1.deltas, vec![0.125]);
        // The complement radius obeys the schedule ceiling and the
        // crossing cap, and this complex does constrain it below the
        // ceiling (some edges run close to the plane field).
        let eta = s1.etas[0];
        assert!(eta > 0.0 && eta < 0.125 / 8.0, "eta = {eta}");

        let v = DVector::from_vec(vec![1.0, 0.0, 1.0]);
        let sigma = SimplexGeometry::new(vec![v.clone()]).unwrap();
        let fib = tubular_fiber(&v, &sigma, &state0.pair, 0.125, eta).unwrap();
        let at_v = state0.pair.sample(&v).unwrap();
        for (b0, b1, e0) in [(0.06, -0.04, 0.5), (-0.1, 0.02, -0.9), (0.0, 0.11, 0.0)] {
            let y = fib.point_at(
                &DVector::from_vec(vec![b0, b1]),
                &DVector::from_vec(vec![e0 * eta]),
            );
            let s = s1.pair.sample(&y).unwrap();
            assert_eq!(s.tau.frame, at_v.tau.frame);
            assert_eq!(s.omega, at_v.omega);
        }

        // Far from every vertex tube the deformation is the identity.
        let far = DVector::from_vec(vec![0.5, 0.45, 0.55]);
        assert_same_values(&s1.pair, &state0.pair, &[far]);
    }

    #[test]
    fn edge_level_is_constant_on_edge_fibers_and_deterministic() {
        let state0 = cube_state(0.15);
        let s1 = civilize_skeleton(&state0, 0, &CivilizeOptions::default()).unwrap();
        let s2 = civilize_skeleton(&s1, 1, &CivilizeOptions::default()).unwrap();
        assert_eq!(s2.deltas, vec![0.125, 0.125 / 4.0]);
        assert!(s2.etas[1] < s2.etas[0] && s2.etas[1] <= 0.125 / 32.0);

        // Constancy across an interior fiber of an edge tube, measured
        // against the value at the fiber's base.
        let edges = s1.complex.faces_of_dim(1);
        let edge = edges
            .iter()
            .find(|e| {
                let d = &s1.complex.positions[e[1] as usize]
                    - &s1.complex.positions[e[0] as usize];
                d.norm() > 1.6
            })
            .expect("a long diagonal edge exists");
        let sigma = SimplexGeometry::from_complex(&s1.complex, edge).unwrap();
        let x = sigma.point(&DVector::from_vec(vec![0.37]));
        let fib = tubular_fiber(&x, &sigma, &s1.pair, s2.deltas[1], s2.etas[1]).unwrap();
        let base = s2.pair.sample(&x).unwrap();
        let mut worst = 0.0f64;
        for (b0, b1) in [(0.6, -0.3), (-0.8, 0.1), (0.2, 0.9)] {
            let y = fib.point_at(
                &DVector::from_vec(vec![b0 * s2.deltas[1], b1 * s2.deltas[1]]),
                &DVector::zeros(0),
            );
            let s = s2.pair.sample(&y).unwrap();
            worst = worst
                .max(grassmann_distance(&s.tau.frame, &base.tau.frame))
                .max((&s.omega - &base.omega).amax());
        }
        assert!(worst < 1e-9, "fiber constancy deviation {worst:.3e}");

        // Rerunning the level from the same input reproduces every value
        // bit for bit.
        let s2b = civilize_skeleton(&s1, 1, &CivilizeOptions::default()).unwrap();
        let probes: Vec<Point> = (0..12)
            .map(|i| {
                let t = i as f64 / 11.0;
                DVector::from_vec(vec![t, (1.0 - t) * 0.8, 0.3 + 0.4 * t])
            })
            .collect();
        assert_same_values(&s2.pair, &s2b.pair, &probes);

        // Outside the edge tubes the level leaves its input untouched. The
        // probe keeps 0.29 clear of every edge, including the long
        // diagonals (tube reach is under 0.07).
        let far = DVector::from_vec(vec![0.2, 0.8, 0.5]);
        assert_same_values(&s2.pair, &s1.pair, &[far]);
    }

    #[test]
    fn level_order_and_radii_are_enforced() {
        let state0 = cube_state(0.1);
        // Levels cannot be skipped.
        assert!(matches!(
            civilize_skeleton(&state0, 1, &CivilizeOptions::default()),
            Err(Error::Precondition(_))
        ));
        let s1 = civilize_skeleton(&state0, 0, &CivilizeOptions::default()).unwrap();
        // A single-simplex step must shrink both radii.
        let edge = s1.complex.faces_of_dim(1)[0].clone();
        let retraction = RadialRetraction::standard(2.0).unwrap();
        assert!(matches!(
            civilize_step(&s1, &edge, 0.2, s1.etas[0] / 4.0, retraction),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            civilize_step(&s1, &edge, 1e-3, s1.etas[0] * 2.0, retraction),
            Err(Error::Precondition(_))
        ));
        // And it accepts a proper shrink.
        let (d1, e1) = (0.125 / 4.0, s1.etas[0] / 4.0);
        let stepped = civilize_step(&s1, &edge, d1, e1, retraction).unwrap();
        let sigma = SimplexGeometry::from_complex(&s1.complex, &edge).unwrap();
        let x = sigma.point(&DVector::from_vec(vec![0.5]));
        let fib = tubular_fiber(&x, &sigma, &s1.pair, d1, e1).unwrap();
        let y = fib.point_at(&DVector::from_vec(vec![0.02, -0.01]), &DVector::zeros(0));
        let sy = stepped.sample(&y).unwrap();
        let sx = s1.pair.sample(&x).unwrap();
        assert!(grassmann_distance(&sy.tau.frame, &sx.tau.frame) < 1e-9);
    }

    #[test]
    fn line_fiber_level_civilizes_the_codimension_one_skeleton() {
        let state0 = cube_state(0.1);
        let opts = CivilizeOptions { embed_depth: 1, embed_directions: 2, ..Default::default() };
        let s1 = civilize_skeleton(&state0, 0, &opts).unwrap();
        let s2 = civilize_skeleton(&s1, 1, &opts).unwrap();
        let s3 = civilize_skeleton(&s2, 2, &opts).unwrap();
        assert_eq!(s3.skeleton, 2);

        // Constancy along a segment fiber over a triangle interior.
        let tris = s2.complex.faces_of_dim(2);
        let sigma = SimplexGeometry::from_complex(&s2.complex, &tris[0]).unwrap();
        let x = sigma.point(&DVector::from_vec(vec![0.3, 0.4]));
        let fib =
            crate::civilize::line_fiber(&x, &sigma, &s2.pair, s3.deltas[2]).unwrap();
        let base = s3.pair.sample(&x).unwrap();
        let mut worst = 0.0f64;
        for b in [-0.8, 0.5, 0.9] {
            let y = fib.point_at(
                &DVector::from_vec(vec![b * s3.deltas[2]]),
                &DVector::zeros(0),
            );
            let s = s3.pair.sample(&y).unwrap();
            worst = worst
                .max(grassmann_distance(&s.tau.frame, &base.tau.frame))
                .max((&s.omega - &base.omega).amax());
        }
        assert!(worst < 1e-9, "segment fiber deviation {worst:.3e}");

        // The top dimension has no fiber directions left.
        assert!(matches!(
            civilize_skeleton(&s3, 3, &opts),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn homotopy_connects_consecutive_states() {
        let state0 = cube_state(0.15);
        let s1 = civilize_skeleton(&state0, 0, &CivilizeOptions::default()).unwrap();
        let s2 = civilize_skeleton(&s1, 1, &CivilizeOptions::default()).unwrap();

        let probes: Vec<Point> = (0..10)
            .map(|i| {
                let t = i as f64 / 9.0;
                DVector::from_vec(vec![0.1 + 0.8 * t, 0.9 - 0.7 * t, 0.2 + 0.6 * t])
            })
            .collect();
        let h0 = homotopy_sample(&s1, &s2, 0.0).unwrap();
        assert_same_values(&h0, &s1.pair, &probes);
        let h1 = homotopy_sample(&s1, &s2, 1.0).unwrap();
        assert_same_values(&h1, &s2.pair, &probes);

        // Mid-homotopy margins stay above the worst input margin on the
        // fiber ray the point travels along.
        let edges = s1.complex.faces_of_dim(1);
        let sigma = SimplexGeometry::from_complex(&s1.complex, &edges[0]).unwrap();
        let x = sigma.point(&DVector::from_vec(vec![0.5]));
        let fib = tubular_fiber(&x, &sigma, &s1.pair, s2.deltas[1], s2.etas[1]).unwrap();
        let y = fib.point_at(
            &DVector::from_vec(vec![1.4 * s2.deltas[1], 0.0]),
            &DVector::zeros(0),
        );
        let mid = homotopy_sample(&s1, &s2, 0.5).unwrap();
        let (_ok, mid_margin) = pair_nondegenerate(&mid, &y, 1, 1e-12).unwrap();
        let mut ray_min = f64::INFINITY;
        for i in 0..=20 {
            let u = i as f64 / 20.0;
            let z = fib.point_at(
                &DVector::from_vec(vec![u * 1.4 * s2.deltas[1], 0.0]),
                &DVector::zeros(0),
            );
            let (_, m) = pair_nondegenerate(&s1.pair, &z, 1, 1e-12).unwrap();
            ray_min = ray_min.min(m);
        }
        assert!(
            mid_margin >= ray_min - 1e-12,
            "mid margin {mid_margin} under ray minimum {ray_min}"
        );

        // Guards: order, time range.
        assert!(homotopy_sample(&s2, &s1, 0.5).is_err());
        assert!(homotopy_sample(&s1, &s2, 1.5).is_err());
    }
}
