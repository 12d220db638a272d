use nalgebra::{DMatrix, DVector};

use super::{Point, ORTHONORMAL_TOL};
use crate::error::{Error, Result};

/// Relative floor under which a QR diagonal entry signals dependent columns.
const RANK_REL_TOL: f64 = 1e-10;

/// A k-plane at a base point, stored as an orthonormal frame.
///
/// Columns of `frame` span the plane and satisfy the Gram identity to
/// [`ORTHONORMAL_TOL`]; constructors orthonormalize eagerly so downstream
/// code never re-checks.
#[derive(Debug, Clone)]
pub struct PlaneFieldSample {
    pub base: Point,
    pub frame: DMatrix<f64>,
}

impl PlaneFieldSample {
    /// Builds a sample from spanning vectors (columns), orthonormalizing them.
    ///
    /// Errors if the columns do not span a plane of their own count.
    pub fn new(base: Point, spanning: DMatrix<f64>) -> Result<Self> {
        if spanning.nrows() != base.len() {
            return Err(Error::Dimension(format!(
                "frame rows {} vs point dim {}",
                spanning.nrows(),
                base.len()
            )));
        }
        let frame = if gram_defect(&spanning) <= ORTHONORMAL_TOL {
            spanning
        } else {
            orthonormalize(&spanning)?
        };
        Ok(Self { base, frame })
    }

    pub fn dim(&self) -> usize {
        self.frame.nrows()
    }

    pub fn rank(&self) -> usize {
        self.frame.ncols()
    }

    /// Max-entry deviation of `frame^T frame` from the identity.
    pub fn gram_defect(&self) -> f64 {
        gram_defect(&self.frame)
    }

    /// Orthogonal projector onto the plane.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.frame * self.frame.transpose()
    }

    /// Orthonormal basis of the orthogonal complement of the plane.
    pub fn complement(&self) -> DMatrix<f64> {
        orth_complement(&self.frame)
    }
}

fn gram_defect(frame: &DMatrix<f64>) -> f64 {
    let gram = frame.transpose() * frame;
    let k = gram.nrows();
    let mut worst = 0.0f64;
    for i in 0..k {
        for j in 0..k {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - target).abs());
        }
    }
    worst
}

/// Orthonormalizes the columns of `mat` via QR, erroring on rank deficiency.
pub fn orthonormalize(mat: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let k = mat.ncols();
    if k == 0 {
        return Ok(mat.clone());
    }
    let scale = mat.amax().max(f64::MIN_POSITIVE);
    let qr = mat.clone().qr();
    let r = qr.r();
    for i in 0..k {
        if r[(i, i)].abs() <= RANK_REL_TOL * scale {
            return Err(Error::Degenerate(format!(
                "spanning vectors are rank-deficient (column {i})"
            )));
        }
    }
    Ok(qr.q())
}

/// Orthonormal basis of the orthogonal complement of the span of `frame`.
///
/// Computed from the full QR factorization of `[frame | I]`; for an empty
/// frame this is just the identity basis.
pub fn orth_complement(frame: &DMatrix<f64>) -> DMatrix<f64> {
    let n = frame.nrows();
    let k = frame.ncols();
    if k == 0 {
        return DMatrix::identity(n, n);
    }
    let mut padded = DMatrix::zeros(n, k + n);
    padded.view_mut((0, 0), (n, k)).copy_from(frame);
    padded.view_mut((0, k), (n, n)).copy_from(&DMatrix::identity(n, n));
    let q = padded.qr().q();
    q.columns(k, n - k).into_owned()
}

/// Operator-norm distance between the orthogonal projectors of two planes.
///
/// Zero iff the planes coincide; 1 iff some direction of one is orthogonal
/// to all of the other.
pub fn grassmann_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let pa = a * a.transpose();
    let pb = b * b.transpose();
    let diff = pa - pb;
    diff.svd(false, false).singular_values.max()
}

/// Orthonormal basis of the (numerical) intersection of two planes.
///
/// Directions whose principal angle has cosine above `1 - tol` are kept.
pub fn intersect_subspaces(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let n = a.nrows();
    let cross = a.transpose() * b;
    let svd = cross.svd(true, false);
    let u = svd.u.expect("svd with u requested");
    let mut kept: Vec<DVector<f64>> = Vec::new();
    for (i, sigma) in svd.singular_values.iter().enumerate() {
        if *sigma > 1.0 - tol {
            kept.push(a * u.column(i).into_owned());
        }
    }
    if kept.is_empty() {
        return DMatrix::zeros(n, 0);
    }
    let raw = DMatrix::from_columns(&kept);
    orthonormalize(&raw).unwrap_or_else(|_| DMatrix::zeros(n, 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    fn e(n: usize, i: usize) -> DVector<f64> {
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        v
    }

    #[test]
    fn keeps_exactly_orthonormal_input() {
        let frame = DMatrix::from_columns(&[e(4, 0), e(4, 1)]);
        let s = PlaneFieldSample::new(DVector::zeros(4), frame.clone()).unwrap();
        assert_eq!(s.frame, frame);
        assert!(s.gram_defect() <= ORTHONORMAL_TOL);
    }

    #[test]
    fn orthonormalizes_skewed_spanning_set() {
        let cols = DMatrix::from_columns(&[
            dvector![1.0, 0.0, 0.0, 0.0],
            dvector![1.0, 1.0, 0.0, 0.0],
        ]);
        let s = PlaneFieldSample::new(DVector::zeros(4), cols).unwrap();
        assert!(s.gram_defect() <= 1e-12);
        let target = DMatrix::from_columns(&[e(4, 0), e(4, 1)]);
        assert!(grassmann_distance(&s.frame, &target) <= 1e-12);
    }

    #[test]
    fn rejects_dependent_spanning_set() {
        let cols = DMatrix::from_columns(&[
            dvector![1.0, 2.0, 0.0],
            dvector![2.0, 4.0, 0.0],
        ]);
        assert!(PlaneFieldSample::new(DVector::zeros(3), cols).is_err());
    }

    #[test]
    fn complement_completes_the_basis() {
        let frame = DMatrix::from_columns(&[
            dvector![1.0, 0.0, 1.0, 0.0].normalize(),
            e(4, 1),
        ]);
        let comp = orth_complement(&frame);
        assert_eq!(comp.ncols(), 2);
        let cross = frame.transpose() * &comp;
        assert!(cross.amax() <= 1e-12);
        let gram = comp.transpose() * &comp;
        assert!((gram - DMatrix::identity(2, 2)).amax() <= 1e-12);
    }

    #[test]
    fn grassmann_distance_detects_tilt() {
        let a = DMatrix::from_columns(&[e(3, 0), e(3, 1)]);
        let b = DMatrix::from_columns(&[e(3, 0), dvector![0.0, 0.8, 0.6]]);
        let d = grassmann_distance(&a, &b);
        // sin of the principal angle between the planes
        assert!((d - 0.6).abs() <= 1e-12);
    }

    #[test]
    fn intersection_of_coordinate_planes() {
        let a = DMatrix::from_columns(&[e(4, 0), e(4, 1)]);
        let b = DMatrix::from_columns(&[e(4, 1), e(4, 2)]);
        let cap = intersect_subspaces(&a, &b, 1e-9);
        assert_eq!(cap.ncols(), 1);
        assert!((cap.column(0).dot(&e(4, 1))).abs() > 1.0 - 1e-12);
    }
}
