//! Tubular-neighborhood fibers over simplices.
//!
//! Over an i-simplex the fiber at a base point x is the product of a disk of
//! radius delta in the plane x + tau(x) (the B part) and a disk of radius
//! eta in x + E_x, where E_x is the orthogonal complement of tau(x) + T(sigma)
//! (the E part). Over top-codimension simplices the fiber degenerates to a
//! segment in the line complement of tau(x) ∩ T(sigma) inside tau(x).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geom::{
    intersect_subspaces, orth_complement, orthonormalize, PairedDistribution, Point,
};
use crate::mesh::LatticeComplex;

/// Floor on the smallest singular value of the combined (plane, simplex)
/// direction matrix below which the fiber construction refuses to proceed.
pub const TRANSVERSALITY_FLOOR: f64 = 1e-9;

/// Tolerance used when intersecting the plane with the simplex tangent for
/// segment fibers: principal cosines above 1 - this count as shared.
const INTERSECTION_TOL: f64 = 1e-9;

/// Geometric realization of one simplex: its vertex positions.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexGeometry {
    vertices: Vec<Point>,
    directions: DMatrix<f64>,
    tangent: DMatrix<f64>,
}

impl SimplexGeometry {
    /// Builds the realization, rejecting affinely dependent vertices.
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        let first = vertices
            .first()
            .ok_or_else(|| Error::Precondition("simplex needs at least one vertex".into()))?;
        let n = first.len();
        if vertices.iter().any(|v| v.len() != n) {
            return Err(Error::Dimension("simplex vertices of mixed dimension".into()));
        }
        if vertices.len() > n + 1 {
            return Err(Error::Dimension(format!(
                "{} vertices cannot be affinely independent in dimension {n}",
                vertices.len()
            )));
        }
        let i = vertices.len() - 1;
        let mut directions = DMatrix::zeros(n, i);
        for (c, v) in vertices[1..].iter().enumerate() {
            directions.set_column(c, &(v - &vertices[0]));
        }
        let tangent = if i == 0 { DMatrix::zeros(n, 0) } else { orthonormalize(&directions)? };
        if i > 0 {
            let shadow = directions.clone().svd(false, false).singular_values;
            let smallest = shadow.iter().cloned().fold(f64::INFINITY, f64::min);
            if smallest <= 1e-12 {
                return Err(Error::Degenerate(format!(
                    "simplex is affinely degenerate (smallest direction singular value {smallest:.3e})"
                )));
            }
        }
        Ok(Self { vertices, directions, tangent })
    }

    /// Realizes a face of a complex given by vertex indices.
    pub fn from_complex(complex: &LatticeComplex, verts: &[u32]) -> Result<Self> {
        let vertices: Vec<Point> = verts
            .iter()
            .map(|&v| {
                complex
                    .positions
                    .get(v as usize)
                    .cloned()
                    .ok_or_else(|| Error::Precondition(format!("vertex index {v} out of range")))
            })
            .collect::<Result<_>>()?;
        Self::new(vertices)
    }

    pub fn dim(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn ambient_dim(&self) -> usize {
        self.vertices[0].len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    /// Raw direction matrix `[v1-v0 .. vi-v0]`, n by i.
    pub fn directions(&self) -> &DMatrix<f64> {
        &self.directions
    }

    /// Orthonormal basis of the tangent space, n by i.
    pub fn tangent(&self) -> &DMatrix<f64> {
        &self.tangent
    }

    /// Point at affine coordinates u: `v0 + directions * u`.
    pub fn point(&self, u: &DVector<f64>) -> Point {
        &self.vertices[0] + &self.directions * u
    }

    /// Least-squares affine coordinates of x relative to the simplex plane.
    pub fn affine_coords(&self, x: &Point) -> DVector<f64> {
        let i = self.dim();
        if i == 0 {
            return DVector::zeros(0);
        }
        let w = x - &self.vertices[0];
        let gram = self.directions.transpose() * &self.directions;
        let rhs = self.directions.transpose() * w;
        gram.lu().solve(&rhs).unwrap_or_else(|| DVector::zeros(i))
    }

    /// True when the affine coordinates describe a point of the closed
    /// simplex, within `tol` on every barycentric weight.
    pub fn inside(&self, u: &DVector<f64>, tol: f64) -> bool {
        let mut rest = 1.0;
        for c in u.iter() {
            if *c < -tol {
                return false;
            }
            rest -= *c;
        }
        rest >= -tol
    }

    /// Barycentric sample grid of the closed simplex at the given depth:
    /// all weight vectors with denominator `depth`. Depth 0 yields the
    /// barycenter alone.
    pub fn sample_points(&self, depth: usize) -> Vec<Point> {
        let i = self.dim();
        if depth == 0 || i == 0 {
            let mut center = DVector::zeros(i);
            if i > 0 {
                center.fill(1.0 / (i as f64 + 1.0));
            }
            return vec![self.point(&center)];
        }
        let mut out = Vec::new();
        let mut counts = vec![0usize; i + 1];
        fill_compositions(&mut counts, 0, depth, &mut |c| {
            let u = DVector::from_fn(i, |r, _| c[r + 1] as f64 / depth as f64);
            out.push(self.point(&u));
        });
        out
    }

    /// True when `verts` are a subset of this simplex's vertex index list
    /// `own`; both must be index lists over the same complex.
    pub fn indices_contain(own: &[u32], other: &[u32]) -> bool {
        other.iter().all(|v| own.contains(v))
    }
}

fn fill_compositions(counts: &mut Vec<usize>, slot: usize, rest: usize, emit: &mut impl FnMut(&[usize])) {
    if slot + 1 == counts.len() {
        counts[slot] = rest;
        emit(counts);
        return;
    }
    for take in 0..=rest {
        counts[slot] = take;
        fill_compositions(counts, slot + 1, rest - take, emit);
    }
}

/// Coordinates of a point relative to a fiber: components along the B and E
/// frames and along the simplex tangent.
#[derive(Debug, Clone)]
pub struct FiberCoords {
    pub b: DVector<f64>,
    pub e: DVector<f64>,
    /// Component along the simplex tangent directions.
    pub d: DVector<f64>,
    /// Magnitude of `d`; zero means the point lies in the fiber's plane.
    pub off: f64,
}

/// One fiber of a tubular neighborhood: orthonormal B and E frames at a base
/// point with their radii.
#[derive(Debug, Clone)]
pub struct TubularFiber {
    pub base: Point,
    pub simplex_dim: usize,
    /// n by b orthonormal columns spanning the plane-field part.
    pub b_frame: DMatrix<f64>,
    /// n by e orthonormal columns spanning the complement part.
    pub e_frame: DMatrix<f64>,
    pub delta: f64,
    pub eta: f64,
    /// Smallest singular value of the combined (plane, tangent) directions:
    /// the margin by which the construction was transverse.
    pub transversality: f64,
}

impl TubularFiber {
    /// Total fiber dimension; equals n - i for a transverse construction.
    pub fn fiber_dim(&self) -> usize {
        self.b_frame.ncols() + self.e_frame.ncols()
    }

    /// Decomposes `y - base` in the frame `[B | E | tangent]`.
    pub fn coords(&self, y: &Point, tangent: &DMatrix<f64>) -> Result<FiberCoords> {
        let n = self.base.len();
        let nb = self.b_frame.ncols();
        let ne = self.e_frame.ncols();
        let nt = tangent.ncols();
        if nb + ne + nt != n {
            return Err(Error::Dimension(format!(
                "fiber frame columns {nb}+{ne}+{nt} do not fill dimension {n}"
            )));
        }
        let mut m = DMatrix::zeros(n, n);
        for c in 0..nb {
            m.set_column(c, &self.b_frame.column(c));
        }
        for c in 0..ne {
            m.set_column(nb + c, &self.e_frame.column(c));
        }
        for c in 0..nt {
            m.set_column(nb + ne + c, &tangent.column(c));
        }
        let w = y - &self.base;
        let c = m
            .lu()
            .solve(&w)
            .ok_or_else(|| Error::Degenerate("fiber frame is numerically singular".into()))?;
        let b = c.rows(0, nb).into_owned();
        let e = c.rows(nb, ne).into_owned();
        let d = c.rows(nb + ne, nt).into_owned();
        let off = d.norm();
        Ok(FiberCoords { b, e, d, off })
    }

    /// Point of the fiber at the given coordinates.
    pub fn point_at(&self, b: &DVector<f64>, e: &DVector<f64>) -> Point {
        &self.base + &self.b_frame * b + &self.e_frame * e
    }

    /// Product-disk gauge: the max of |b|/delta and |e|/eta. The closed
    /// fiber is exactly the sublevel set at 1.
    pub fn scaled_radius(&self, coords: &FiberCoords) -> f64 {
        let sb = coords.b.norm() / self.delta;
        if self.e_frame.ncols() == 0 {
            return sb;
        }
        sb.max(coords.e.norm() / self.eta)
    }

    /// Closed-fiber membership: in the fiber plane within `off_tol` and
    /// inside both radius budgets.
    pub fn contains(&self, y: &Point, tangent: &DMatrix<f64>, off_tol: f64) -> Result<bool> {
        let c = self.coords(y, tangent)?;
        Ok(c.off <= off_tol && self.scaled_radius(&c) <= 1.0 + 1e-12)
    }
}

/// Builds the product fiber B x E at a base point of a simplex.
///
/// Errors when the plane at x and the simplex tangent fail to be transverse
/// (their union drops rank), since then the complement has the wrong
/// dimension and no tubular neighborhood exists.
pub fn tubular_fiber(
    x: &Point,
    sigma: &SimplexGeometry,
    pair: &PairedDistribution,
    delta: f64,
    eta: f64,
) -> Result<TubularFiber> {
    if delta <= 0.0 || eta <= 0.0 {
        return Err(Error::Precondition(format!("fiber radii must be positive, got {delta}, {eta}")));
    }
    let n = sigma.ambient_dim();
    let i = sigma.dim();
    let sample = pair.tau.sample(x)?;
    let k = sample.frame.ncols();
    if k + i > n {
        return Err(Error::Dimension(format!(
            "plane rank {k} plus simplex dimension {i} exceeds ambient dimension {n}"
        )));
    }
    let mut combined = DMatrix::zeros(n, k + i);
    for c in 0..k {
        combined.set_column(c, &sample.frame.column(c));
    }
    for c in 0..i {
        combined.set_column(k + c, &sigma.tangent().column(c));
    }
    let transversality =
        combined.clone().svd(false, false).singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
    if transversality <= TRANSVERSALITY_FLOOR {
        return Err(Error::Degenerate(format!(
            "plane and simplex tangent are not transverse (margin {transversality:.3e})"
        )));
    }
    let span = orthonormalize(&combined)?;
    let e_frame = orth_complement(&span);
    debug_assert_eq!(k + e_frame.ncols(), n - i);
    Ok(TubularFiber {
        base: x.clone(),
        simplex_dim: i,
        b_frame: sample.frame,
        e_frame,
        delta,
        eta,
        transversality,
    })
}

/// Builds the segment fiber used over simplices of codimension one: the
/// closed delta-neighborhood of x in the line x + F_x, where F_x is the
/// complement of tau(x) ∩ T(sigma) inside tau(x).
///
/// Errors when the intersection does not have the expected dimension
/// (rank of the plane minus one), e.g. when the plane contains the whole
/// simplex tangent direction it meets.
pub fn line_fiber(
    x: &Point,
    sigma: &SimplexGeometry,
    pair: &PairedDistribution,
    delta: f64,
) -> Result<TubularFiber> {
    if delta <= 0.0 {
        return Err(Error::Precondition(format!("fiber radius must be positive, got {delta}")));
    }
    let n = sigma.ambient_dim();
    let i = sigma.dim();
    if i + 1 != n {
        return Err(Error::Dimension(format!(
            "segment fibers are for codimension-one simplices, got dimension {i} in {n}"
        )));
    }
    let sample = pair.tau.sample(x)?;
    let k = sample.frame.ncols();
    let inter = intersect_subspaces(&sample.frame, sigma.tangent(), INTERSECTION_TOL);
    if inter.ncols() != k - 1 {
        return Err(Error::Degenerate(format!(
            "plane meets the simplex tangent in dimension {}, expected {}",
            inter.ncols(),
            k - 1
        )));
    }
    // Complement of the intersection inside the plane, computed in plane
    // coordinates so the result stays exactly within the plane's span.
    let in_plane = sample.frame.transpose() * &inter;
    let f_coords = orth_complement(&in_plane);
    let b_frame = orthonormalize(&(&sample.frame * &f_coords))?;
    if b_frame.ncols() != 1 {
        return Err(Error::Degenerate("segment fiber direction is not a line".into()));
    }
    // The segment must leave the simplex tangent: measure transversality as
    // the component of the direction off the tangent plane.
    let dir = b_frame.column(0).into_owned();
    let in_tangent = sigma.tangent() * (sigma.tangent().transpose() * &dir);
    let transversality = (&dir - in_tangent).norm();
    if transversality <= TRANSVERSALITY_FLOOR {
        return Err(Error::Degenerate(format!(
            "segment fiber is tangent to the simplex (margin {transversality:.3e})"
        )));
    }
    Ok(TubularFiber {
        base: x.clone(),
        simplex_dim: i,
        b_frame,
        e_frame: DMatrix::zeros(n, 0),
        delta,
        eta: 0.0,
        transversality,
    })
}
