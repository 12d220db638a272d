//! Tube atlases: locating a query point inside the tubular neighborhood of
//! a skeleton's simplices and retracting it along fiber rays.
//!
//! The tube over a simplex is the union of fibers over its points. Locating
//! a query point means solving for the base whose fiber contains it; since
//! the fiber frames vary with the plane field along the simplex, that is a
//! small Newton solve in the simplex's affine coordinates.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{PairedDistribution, Point};
use crate::mesh::LatticeComplex;

use super::fiber::{line_fiber, tubular_fiber, SimplexGeometry, TubularFiber};

/// Convergence threshold on the tangent-direction residual of the base
/// solve, in ambient length units.
pub const NEWTON_TOL: f64 = 1e-12;
/// Iteration cap for the base solve.
pub const NEWTON_MAX_ITERS: usize = 20;
/// Finite-difference step in affine coordinates for the base-solve Jacobian.
const NEWTON_FD_STEP: f64 = 1e-6;
/// Slack on barycentric weights when deciding whether the converged base
/// lies on the closed simplex.
const BARYCENTRIC_TOL: f64 = 1e-9;

/// Piecewise-linear radial profile in the product-disk gauge: zero up to
/// the inner radius, linear from (inner, 0) to (outer, outer), identity
/// beyond. The gauge is scaled so the constancy region is the sublevel set
/// of the fiber's product norm at `inner`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialRetraction {
    pub inner: f64,
    pub outer: f64,
}

impl RadialRetraction {
    pub fn new(inner: f64, outer: f64) -> Result<Self> {
        if !(0.0 < inner && inner < outer) {
            return Err(Error::Precondition(format!(
                "retraction radii must satisfy 0 < inner < outer, got {inner}, {outer}"
            )));
        }
        Ok(Self { inner, outer })
    }

    /// Standard gauge: constancy region at scaled radius 1, tube ends at
    /// `ratio`.
    pub fn standard(ratio: f64) -> Result<Self> {
        Self::new(1.0, ratio)
    }

    /// Profile value: 0 on [0, inner], linear through (outer, outer),
    /// identity beyond the outer radius.
    pub fn value(&self, s: f64) -> f64 {
        if s <= self.inner {
            0.0
        } else if s >= self.outer {
            s
        } else {
            self.outer * (s - self.inner) / (self.outer - self.inner)
        }
    }

    /// Linear homotopy between the identity profile and `value`: at t = 0
    /// the identity, at t = 1 the full retraction.
    pub fn value_at(&self, t: f64, s: f64) -> f64 {
        (1.0 - t) * s + t * self.value(s)
    }
}

/// A located query point: which tube, the base on the simplex, and the
/// fiber decomposition there.
#[derive(Debug, Clone)]
pub struct FiberHit {
    pub tube: usize,
    pub base: Point,
    pub affine: DVector<f64>,
    /// Coordinates along the fiber's plane frame.
    pub b: DVector<f64>,
    /// Coordinates along the fiber's complement frame.
    pub e: DVector<f64>,
    /// Exact in-fiber displacement `B b + E e`; `base + fiber_vec` differs
    /// from the query only by the converged tangent residual.
    pub fiber_vec: Point,
    /// Product-gauge radius at the atlas radii.
    pub scaled: f64,
}

struct Tube {
    sigma: SimplexGeometry,
    vertices: Vec<u32>,
    bbox_lo: Point,
    bbox_hi: Point,
}

/// All tubes of one skeleton level, sharing radii and a retraction profile.
/// Fiber frames are evaluated through the level's input pair, which the
/// atlas owns. Overlaps are resolved by lowest tube index.
pub struct TubeAtlas {
    pair: PairedDistribution,
    tubes: Vec<Tube>,
    pub delta: f64,
    pub eta: f64,
    pub retraction: RadialRetraction,
    /// Segment fibers (codimension-one mode) instead of product fibers.
    pub line_mode: bool,
}

impl TubeAtlas {
    /// Builds the atlas for the given simplices (vertex-index lists over the
    /// complex). `line_mode` selects segment fibers; it requires the
    /// simplices to have codimension one.
    pub fn new(
        pair: &PairedDistribution,
        complex: &LatticeComplex,
        simplices: &[Vec<u32>],
        delta: f64,
        eta: f64,
        retraction: RadialRetraction,
        line_mode: bool,
    ) -> Result<Self> {
        if delta <= 0.0 || eta <= 0.0 {
            return Err(Error::Precondition(format!(
                "tube radii must be positive, got {delta}, {eta}"
            )));
        }
        let n = complex.dim;
        // Euclidean reach of an outer fiber from its base.
        let reach = retraction.outer * (delta * delta + eta * eta).sqrt();
        let mut tubes = Vec::with_capacity(simplices.len());
        for verts in simplices {
            let sigma = SimplexGeometry::from_complex(complex, verts)?;
            if line_mode && sigma.dim() + 1 != n {
                return Err(Error::Dimension(format!(
                    "segment-fiber atlas needs codimension-one simplices, got dimension {}",
                    sigma.dim()
                )));
            }
            let mut lo = sigma.vertices()[0].clone();
            let mut hi = lo.clone();
            for v in sigma.vertices() {
                for r in 0..n {
                    lo[r] = lo[r].min(v[r]);
                    hi[r] = hi[r].max(v[r]);
                }
            }
            lo.add_scalar_mut(-reach);
            hi.add_scalar_mut(reach);
            tubes.push(Tube { sigma, vertices: verts.clone(), bbox_lo: lo, bbox_hi: hi });
        }
        Ok(Self { pair: pair.clone(), tubes, delta, eta, retraction, line_mode })
    }

    pub fn tube_count(&self) -> usize {
        self.tubes.len()
    }

    pub fn simplex(&self, tube: usize) -> &SimplexGeometry {
        &self.tubes[tube].sigma
    }

    pub fn simplex_vertices(&self, tube: usize) -> &[u32] {
        &self.tubes[tube].vertices
    }

    pub fn pair(&self) -> &PairedDistribution {
        &self.pair
    }

    /// Cheap bounding-box test: false guarantees the point is outside the
    /// tube's outer reach, so a projection attempt can be skipped.
    pub fn might_contain(&self, tube: usize, y: &Point) -> bool {
        let t = &self.tubes[tube];
        bbox_contains(&t.bbox_lo, &t.bbox_hi, y)
    }

    /// Builds the fiber at a base point through the atlas's input pair.
    pub fn fiber_at(&self, sigma: &SimplexGeometry, x: &Point) -> Result<TubularFiber> {
        if self.line_mode {
            line_fiber(x, sigma, &self.pair, self.delta)
        } else {
            tubular_fiber(x, sigma, &self.pair, self.delta, self.eta)
        }
    }

    /// Solves for the base point on one simplex whose fiber contains `y`.
    ///
    /// Returns None when the solve diverges, the fiber construction fails
    /// along the way, the converged base falls off the closed simplex, or
    /// the fiber coordinates exceed `radius_cap` in the product gauge. A
    /// divergent solve is treated as "outside the tube"; the condition
    /// checks sample densely enough to surface any misclassification as a
    /// constancy violation.
    pub fn project_to_tube(
        &self,
        tube: usize,
        y: &Point,
        radius_cap: f64,
    ) -> Result<Option<FiberHit>> {
        let sigma = &self.tubes[tube].sigma;
        let i = sigma.dim();
        let mut u = sigma.affine_coords(y);
        let mut converged: Option<TubularFiber> = None;
        'newton: for _ in 0..=NEWTON_MAX_ITERS {
            let Ok(fib) = self.fiber_at(sigma, &sigma.point(&u)) else { break };
            let coords = fib.coords(y, sigma.tangent())?;
            if coords.off <= NEWTON_TOL {
                converged = Some(fib);
                break;
            }
            if i == 0 {
                break;
            }
            let mut jac = DMatrix::zeros(i, i);
            for c in 0..i {
                let mut u2 = u.clone();
                u2[c] += NEWTON_FD_STEP;
                let Ok(fib2) = self.fiber_at(sigma, &sigma.point(&u2)) else { break 'newton };
                let d2 = fib2.coords(y, sigma.tangent())?.d;
                jac.set_column(c, &((d2 - &coords.d) / NEWTON_FD_STEP));
            }
            let Some(step) = jac.lu().solve(&coords.d) else { break };
            u -= step;
        }
        let Some(fib) = converged else { return Ok(None) };
        if !sigma.inside(&u, BARYCENTRIC_TOL) {
            return Ok(None);
        }
        let coords = fib.coords(y, sigma.tangent())?;
        let scaled = fib.scaled_radius(&coords);
        if scaled > radius_cap {
            return Ok(None);
        }
        let fiber_vec = fib.point_at(&coords.b, &coords.e) - &fib.base;
        Ok(Some(FiberHit {
            tube,
            base: fib.base,
            affine: u,
            b: coords.b,
            e: coords.e,
            fiber_vec,
            scaled,
        }))
    }

    /// Finds the lowest-index tube whose outer fiber contains `y`.
    pub fn locate(&self, y: &Point) -> Result<Option<FiberHit>> {
        let cap = self.retraction.outer + 1e-12;
        for (t, tube) in self.tubes.iter().enumerate() {
            if !bbox_contains(&tube.bbox_lo, &tube.bbox_hi, y) {
                continue;
            }
            if let Some(hit) = self.project_to_tube(t, y, cap)? {
                return Ok(Some(hit));
            }
        }
        Ok(None)
    }

    /// The deformation's point map at homotopy time `t`: the per-tube
    /// retractions composed in reverse index order, matching tube-by-tube
    /// deformation in index order (retracting tube 0 first pulls values
    /// back last). Points outside every tube are returned unchanged,
    /// bitwise; a point inside a tube moves along its fiber ray by the
    /// retraction profile. At t = 1 each inner fiber collapses to its base
    /// and the annulus stretches over the whole tube.
    pub fn retract_point(&self, y: &Point, t: f64) -> Point {
        if t == 0.0 {
            return y.clone();
        }
        let cap = self.retraction.outer + 1e-12;
        let mut z = y.clone();
        for idx in (0..self.tubes.len()).rev() {
            let tube = &self.tubes[idx];
            if !bbox_contains(&tube.bbox_lo, &tube.bbox_hi, &z) {
                continue;
            }
            match self.project_to_tube(idx, &z, cap) {
                Ok(Some(hit)) => {
                    let s = hit.scaled;
                    z = if s == 0.0 {
                        hit.base
                    } else {
                        let factor = self.retraction.value_at(t, s) / s;
                        if factor == 0.0 {
                            hit.base
                        } else {
                            hit.base + hit.fiber_vec * factor
                        }
                    };
                }
                // Evaluation failures inside the map degrade to this tube
                // acting as the identity; the sampled condition checks
                // surface any such region.
                Ok(None) | Err(_) => {}
            }
        }
        z
    }

    /// The civilized pair at homotopy time `t`: the input pair pulled back
    /// through the retraction map. At t = 0 this is the input itself.
    pub fn deformed_pair(self: &std::sync::Arc<Self>, t: f64) -> PairedDistribution {
        if t == 0.0 {
            return self.pair.clone();
        }
        let atlas = std::sync::Arc::clone(self);
        self.pair.pulled_back(move |y| atlas.retract_point(y, t))
    }

    /// Sampled embedding check: fiber points constructed over known bases
    /// must project back to those bases. Returns the worst base recovery
    /// error, or an error describing the first failure witness.
    pub fn verify_embedding(&self, base_depth: usize, directions: usize) -> Result<f64> {
        // Tubes are independent; collect in index order so the first error
        // reported is the same on every run regardless of scheduling.
        let per_tube: Vec<Result<f64>> = (0..self.tubes.len())
            .into_par_iter()
            .map(|t| self.tube_embedding_worst(t, base_depth, directions))
            .collect();
        let mut worst = 0.0f64;
        for r in per_tube {
            worst = worst.max(r?);
        }
        Ok(worst)
    }

    fn tube_embedding_worst(&self, t: usize, base_depth: usize, directions: usize) -> Result<f64> {
        let mut worst = 0.0f64;
        let sigma = &self.tubes[t].sigma;
        for x in sigma.sample_points(base_depth) {
            let fib = self.fiber_at(sigma, &x)?;
            let nb = fib.b_frame.ncols();
            let ne = fib.e_frame.ncols();
            for d in 0..directions {
                // Deterministic direction sweep mixing B and E axes.
                let angle = (d as f64 + 0.5) * std::f64::consts::FRAC_PI_2 / directions as f64;
                let (bs, es) = (angle.cos(), angle.sin());
                let b = DVector::from_fn(nb, |r, _| {
                    let sign = if (d + r) % 2 == 0 { 1.0 } else { -1.0 };
                    sign * bs * self.delta * self.retraction.outer / (nb as f64).sqrt()
                });
                let e = DVector::from_fn(ne, |r, _| {
                    let sign = if (d + r) % 2 == 0 { -1.0 } else { 1.0 };
                    sign * es * self.eta * self.retraction.outer / (ne.max(1) as f64).sqrt()
                });
                let y = fib.point_at(&b, &e);
                let hit = self.project_to_tube(t, &y, self.retraction.outer + 1e-9)?;
                let Some(hit) = hit else {
                    return Err(Error::Degenerate(format!(
                        "tube {t}: fiber point at direction step {d} failed to project back; \
                         radii too large for an embedded tube"
                    )));
                };
                let err = (&hit.base - &x).norm();
                worst = worst.max(err);
                // Segment fibers carry no E radius; only δ bounds them.
                let scale = if ne == 0 { self.delta } else { self.delta.min(self.eta) };
                if err > 0.25 * scale {
                    return Err(Error::Degenerate(format!(
                        "tube {t}: fiber point projects to a base {err:.3e} away from its \
                         construction base; radii too large for an embedded tube"
                    )));
                }
            }
        }
        Ok(worst)
    }
}

fn bbox_contains(lo: &Point, hi: &Point, y: &Point) -> bool {
    y.iter().enumerate().all(|(r, v)| *v >= lo[r] && *v <= hi[r])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{PlaneField, Smoothness, TwoFormField};
    use crate::mesh::{kuhn_triangulation, LatticeSpec};
    use nalgebra::dmatrix;
    use std::sync::Arc;

    fn split_form(n: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(n, n);
        for p in 0..n / 2 {
            m[(2 * p, 2 * p + 1)] = 1.0;
            m[(2 * p + 1, 2 * p)] = -1.0;
        }
        m
    }

    fn rotating_pair() -> PairedDistribution {
        // Plane tilting slowly with position: exercises the varying-frame
        // Newton path while staying transverse to every lattice direction.
        let tau = PlaneField::new(4, 2, Smoothness::Analytic, |x: &Point| {
            let a = 0.3 + 0.2 * x[2];
            let b = 0.1 - 0.15 * x[3];
            dmatrix![
                1.0, 0.0;
                0.0, 1.0;
                a, -0.2;
                b, 0.15;
            ]
        });
        let omega = TwoFormField::new(4, |_x| split_form(4));
        PairedDistribution::new(tau, omega).unwrap()
    }

    fn unit_cube_complex() -> crate::mesh::LatticeComplex {
        let spec = LatticeSpec::new(4, 1, vec![0.0; 4], vec![1.0; 4]).unwrap();
        kuhn_triangulation(&spec).unwrap()
    }

    fn diagonal_edge(complex: &crate::mesh::LatticeComplex) -> Vec<u32> {
        // An edge whose direction has nonzero components outside the plane
        // of the field, so the fiber construction is well-conditioned.
        for cell in 0..complex.cell_count() {
            for face in complex.faces_of_cell(cell, 1) {
                let d = &complex.positions[face[1] as usize] - &complex.positions[face[0] as usize];
                if d[2].abs() > 0.5 && d[3].abs() > 0.5 {
                    return face;
                }
            }
        }
        panic!("no diagonal edge found");
    }

    #[test]
    fn retraction_profile_endpoints() {
        let f = RadialRetraction::standard(2.0).unwrap();
        assert_eq!(f.value(1.0), 0.0);
        assert_eq!(f.value(0.5), 0.0);
        assert_eq!(f.value(2.0), 2.0);
        assert_eq!(f.value(3.0), 3.0);
        assert!((f.value(1.5) - 1.0).abs() < 1e-15);
        // Homotopy endpoints: identity at 0, profile at 1.
        assert_eq!(f.value_at(0.0, 1.3), 1.3);
        assert_eq!(f.value_at(1.0, 1.3), f.value(1.3));
        assert!(RadialRetraction::new(2.0, 1.0).is_err());
    }

    #[test]
    fn vertex_tube_locates_and_retracts() {
        let pair = rotating_pair();
        let complex = unit_cube_complex();
        let atlas = Arc::new(
            TubeAtlas::new(
                &pair,
                &complex,
                &[vec![0u32]],
                0.05,
                0.02,
                RadialRetraction::standard(2.0).unwrap(),
                false,
            )
            .unwrap(),
        );
        let sigma = atlas.simplex(0);
        let x = sigma.vertices()[0].clone();
        let fib = atlas.fiber_at(sigma, &x).unwrap();
        // A point in the inner fiber.
        let b = DVector::from_vec(vec![0.02, -0.01]);
        let e = DVector::from_vec(vec![0.007, 0.005]);
        let y = fib.point_at(&b, &e);
        let hit = atlas.locate(&y).unwrap().expect("inner point located");
        assert_eq!(hit.tube, 0);
        assert!((hit.base - &x).norm() < 1e-12);
        assert!(hit.scaled <= 1.0);
        // Inner points collapse to the base at t = 1.
        let r = atlas.retract_point(&y, 1.0);
        assert!((r - &x).norm() < 1e-12);
        // Far points are untouched, bitwise.
        let far = DVector::from_vec(vec![0.5, 0.5, 0.5, 0.5]);
        assert_eq!(atlas.retract_point(&far, 1.0), far);
    }

    #[test]
    fn edge_tube_newton_recovers_interior_bases() {
        let pair = rotating_pair();
        let complex = unit_cube_complex();
        let edge = diagonal_edge(&complex);
        let atlas = TubeAtlas::new(
            &pair,
            &complex,
            &[edge],
            0.04,
            0.02,
            RadialRetraction::standard(2.0).unwrap(),
            false,
        )
        .unwrap();
        let sigma = atlas.simplex(0);
        for frac in [0.15, 0.5, 0.85] {
            let x = sigma.point(&DVector::from_vec(vec![frac]));
            let fib = atlas.fiber_at(sigma, &x).unwrap();
            let b = DVector::from_vec(vec![-0.015, 0.02]);
            let e = DVector::from_vec(vec![0.012]);
            let y = fib.point_at(&b, &e);
            let hit = atlas.project_to_tube(0, &y, 2.0 + 1e-12).unwrap().expect("located");
            assert!(
                (&hit.base - &x).norm() < 1e-9,
                "base recovery off by {:.3e} at frac {frac}",
                (&hit.base - &x).norm()
            );
            // The fiber displacement reproduces the query up to Newton tol.
            assert!((&hit.base + &hit.fiber_vec - &y).norm() < 1e-9);
        }
        // A point beyond the edge's end slice projects outside the simplex.
        let end = sigma.point(&DVector::from_vec(vec![1.0]));
        let fib_end = atlas.fiber_at(sigma, &end).unwrap();
        let beyond = fib_end.point_at(&DVector::from_vec(vec![0.01, 0.0]), &DVector::from_vec(vec![0.0]))
            + sigma.tangent() * DVector::from_vec(vec![0.02]);
        assert!(atlas.project_to_tube(0, &beyond, 2.0).unwrap().is_none());
    }

    #[test]
    fn annulus_points_move_along_their_ray() {
        let pair = rotating_pair();
        let complex = unit_cube_complex();
        let atlas = Arc::new(
            TubeAtlas::new(
                &pair,
                &complex,
                &[vec![0u32]],
                0.05,
                0.02,
                RadialRetraction::standard(2.0).unwrap(),
                false,
            )
            .unwrap(),
        );
        let sigma = atlas.simplex(0);
        let x = sigma.vertices()[0].clone();
        let fib = atlas.fiber_at(sigma, &x).unwrap();
        // Gauge radius 1.5: retraction value is 1.0.
        let b = DVector::from_vec(vec![0.075, 0.0]);
        let e = DVector::from_vec(vec![0.0, 0.0]);
        let y = fib.point_at(&b, &e);
        let r = atlas.retract_point(&y, 1.0);
        // Expected: scaled radius 1.0 along the same ray, so b shrinks by 2/3.
        let expected = fib.point_at(&DVector::from_vec(vec![0.05, 0.0]), &e);
        assert!((&r - &expected).norm() < 1e-9, "off by {:.3e}", (&r - &expected).norm());
        // Homotopy midpoint sits between the ends.
        let mid = atlas.retract_point(&y, 0.5);
        let straight = (&y + &expected) / 2.0;
        assert!((&mid - &straight).norm() < 1e-9);
    }

    #[test]
    fn deformed_pair_is_constant_on_inner_fibers() {
        let pair = rotating_pair();
        let complex = unit_cube_complex();
        let edge = diagonal_edge(&complex);
        let atlas = Arc::new(
            TubeAtlas::new(
                &pair,
                &complex,
                &[vec![0u32], edge],
                0.05,
                0.02,
                RadialRetraction::standard(2.0).unwrap(),
                false,
            )
            .unwrap(),
        );
        let out = atlas.deformed_pair(1.0);
        let sigma = atlas.simplex(1);
        let x = sigma.point(&DVector::from_vec(vec![0.4]));
        let fib = atlas.fiber_at(sigma, &x).unwrap();
        let base_sample = out.sample(&x).unwrap();
        let mut worst = 0.0f64;
        for (bb, ee) in [(0.03, 0.01), (-0.04, 0.015), (0.01, -0.019), (-0.02, -0.005)] {
            let y = fib.point_at(
                &DVector::from_vec(vec![bb, -bb / 2.0]),
                &DVector::from_vec(vec![ee]),
            );
            let s = out.sample(&y).unwrap();
            let frame_dev = crate::geom::grassmann_distance(&s.tau.frame, &base_sample.tau.frame);
            let form_dev = (&s.omega - &base_sample.omega).amax();
            worst = worst.max(frame_dev).max(form_dev);
        }
        assert!(worst < 1e-9, "constancy deviation {worst:.3e}");
        // Identity at t = 0 returns input values exactly.
        let id = atlas.deformed_pair(0.0);
        let probe = DVector::from_vec(vec![0.3, 0.7, 0.2, 0.9]);
        let a = id.sample(&probe).unwrap();
        let b = pair.sample(&probe).unwrap();
        assert_eq!(a.tau.frame, b.tau.frame);
        assert_eq!(a.omega, b.omega);
    }

    #[test]
    fn embedding_check_flags_oversized_radii() {
        let pair = rotating_pair();
        let complex = unit_cube_complex();
        let edge = diagonal_edge(&complex);
        let small = TubeAtlas::new(
            &pair,
            &complex,
            &[edge.clone()],
            0.04,
            0.02,
            RadialRetraction::standard(2.0).unwrap(),
            false,
        )
        .unwrap();
        let worst = small.verify_embedding(3, 6).unwrap();
        assert!(worst < 1e-9, "embedded tube recovery error {worst:.3e}");
        // Radii large enough that fibers over distinct bases overlap (the
        // frames rotate ~0.1 per unit arclength, so extents past ~10 break
        // injectivity) must be rejected.
        let big = TubeAtlas::new(
            &pair,
            &complex,
            &[edge],
            8.0,
            4.0,
            RadialRetraction::standard(2.0).unwrap(),
            false,
        )
        .unwrap();
        assert!(big.verify_embedding(3, 6).is_err());
    }
}
