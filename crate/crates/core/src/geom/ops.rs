use nalgebra::DMatrix;

use super::field::PairedDistribution;
use super::frame::{orth_complement, orthonormalize, PlaneFieldSample};
use super::Point;
use crate::error::{Error, Result};

/// Relative floor for extracting the image of a bivector from its SVD.
const IMAGE_REL_TOL: f64 = 1e-10;

/// The orthogonal projection of a subspace onto the complement of a plane.
///
/// `matrix` expresses the projection in orthonormal bases of the subspace
/// (domain) and of the plane's complement (codomain); `margin` is its
/// smallest singular value, i.e. the quantitative injectivity of projecting
/// along the plane.
#[derive(Debug, Clone)]
pub struct ProjectionDescriptor {
    pub matrix: DMatrix<f64>,
    pub margin: f64,
}

/// Projects `subspace` (columns) along the plane of `tau` onto the plane's
/// orthogonal complement.
///
/// An empty subspace projects injectively by convention (`margin` infinite).
/// Errors if the subspace columns are dependent or dimensions disagree.
pub fn project_along(tau: &PlaneFieldSample, subspace: &DMatrix<f64>) -> Result<ProjectionDescriptor> {
    let n = tau.dim();
    if subspace.nrows() != n {
        return Err(Error::Dimension(format!(
            "subspace rows {} vs ambient dim {}",
            subspace.nrows(),
            n
        )));
    }
    let d = subspace.ncols();
    if d == 0 {
        return Ok(ProjectionDescriptor { matrix: DMatrix::zeros(n - tau.rank(), 0), margin: f64::INFINITY });
    }
    let domain = orthonormalize(subspace)?;
    let codomain = orth_complement(&tau.frame);
    let matrix = codomain.transpose() * &domain;
    let margin = if matrix.ncols() > matrix.nrows() {
        0.0
    } else {
        matrix.clone().svd(false, false).singular_values.min()
    };
    Ok(ProjectionDescriptor { matrix, margin })
}

/// Pfaffian of an antisymmetric matrix by cofactor expansion.
///
/// Exact (up to rounding) and intended for the small frame-restricted
/// matrices that arise here; odd sizes return 0.
pub fn pfaffian(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "pfaffian needs a square matrix");
    if n == 0 {
        return 1.0;
    }
    if n % 2 == 1 {
        return 0.0;
    }
    if n == 2 {
        return a[(0, 1)];
    }
    let mut sum = 0.0;
    for j in 1..n {
        let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
        let entry = a[(0, j)];
        if entry == 0.0 {
            continue;
        }
        sum += sign * entry * pfaffian(&strike(a, 0, j));
    }
    sum
}

fn strike(a: &DMatrix<f64>, r: usize, c: usize) -> DMatrix<f64> {
    let n = a.nrows();
    let keep: Vec<usize> = (0..n).filter(|&i| i != r && i != c).collect();
    let mut out = DMatrix::zeros(keep.len(), keep.len());
    for (oi, &i) in keep.iter().enumerate() {
        for (oj, &j) in keep.iter().enumerate() {
            out[(oi, oj)] = a[(i, j)];
        }
    }
    out
}

/// Value of the m-fold wedge of `omega` on the `2m` frame columns.
pub fn wedge_power_on_frame(omega: &DMatrix<f64>, frame: &DMatrix<f64>, m: usize) -> f64 {
    let restricted = frame.transpose() * omega * frame;
    let mut factorial = 1.0;
    for i in 2..=m {
        factorial *= i as f64;
    }
    factorial * pfaffian(&restricted)
}

/// Tests fiberwise nondegeneracy of the pair at `x`.
///
/// Evaluates the m-fold wedge of the 2-form on the orthonormal frame of the
/// plane and compares its absolute value against `floor`. Errors if the
/// plane's rank is not `2m`.
pub fn pair_nondegenerate(
    pair: &PairedDistribution,
    x: &Point,
    m: usize,
    floor: f64,
) -> Result<(bool, f64)> {
    let k = pair.rank();
    if k != 2 * m {
        return Err(Error::Degenerate(format!(
            "plane rank {k} is not twice the wedge exponent {m}"
        )));
    }
    let s = pair.sample(x)?;
    let value = wedge_power_on_frame(&s.omega, &s.tau.frame, m).abs();
    Ok((value > floor, value))
}

/// A pointwise bivector with its image plane.
#[derive(Debug, Clone)]
pub struct BivectorSample {
    /// Antisymmetric contravariant matrix in ambient coordinates.
    pub matrix: DMatrix<f64>,
    /// Orthonormal basis of the image of the induced sharp map.
    pub image: DMatrix<f64>,
}

/// Inverts the 2-form on the plane and extends by zero on its complement.
///
/// Within the plane, contracting the result with the 2-form is the identity;
/// the image plane of the bivector reproduces the input plane. Errors if the
/// restricted form is singular past `floor`.
pub fn bivector_from_pair(pair: &PairedDistribution, x: &Point, floor: f64) -> Result<BivectorSample> {
    let s = pair.sample(x)?;
    let k = s.tau.rank();
    let restricted = s.tau.frame.transpose() * &s.omega * &s.tau.frame;
    let pf = pfaffian(&restricted);
    if pf.abs() <= floor {
        return Err(Error::Degenerate(format!(
            "2-form restricted to the plane is singular (pfaffian {pf:.3e})"
        )));
    }
    let inv = restricted
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("restricted 2-form not invertible".into()))?;
    let matrix = &s.tau.frame * inv * s.tau.frame.transpose();
    let svd = matrix.clone().svd(true, false);
    let u = svd.u.as_ref().expect("svd with u requested");
    let sigma_max = svd.singular_values.max();
    let mut cols = Vec::new();
    for (i, sigma) in svd.singular_values.iter().enumerate() {
        if *sigma > IMAGE_REL_TOL * sigma_max {
            cols.push(u.column(i).into_owned());
        }
    }
    debug_assert_eq!(cols.len(), k);
    let image = DMatrix::from_columns(&cols);
    Ok(BivectorSample { matrix, image })
}
