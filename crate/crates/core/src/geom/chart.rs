use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::frame::orth_complement;
use super::{Point, FD_STEP};
use crate::error::{Error, Result};

/// Tolerance for the leaf-tangency precondition on input vector fields.
const TANGENCY_TOL: f64 = 1e-8;
/// Leafwise-closedness residual above which an extension input is flagged.
const CLOSEDNESS_TOL: f64 = 1e-6;

type NormalsFn = dyn Fn(&Point) -> DMatrix<f64> + Send + Sync;
type VectorFn = dyn Fn(&Point) -> DVector<f64> + Send + Sync;
type FormFn = dyn Fn(&Point, &[DVector<f64>]) -> f64 + Send + Sync;

/// A chart of `R^n` foliated by the level sets of a submersion, described by
/// an orthonormal frame of the normal bundle at each point.
#[derive(Clone)]
pub struct FoliatedChart {
    pub dim: usize,
    pub leaf_dim: usize,
    pub label: String,
    normals: Arc<NormalsFn>,
}

impl FoliatedChart {
    pub fn new<F>(dim: usize, leaf_dim: usize, label: &str, normals: F) -> Self
    where
        F: Fn(&Point) -> DMatrix<f64> + Send + Sync + 'static,
    {
        Self { dim, leaf_dim, label: label.into(), normals: Arc::new(normals) }
    }

    /// Leaves are level sets of the last `n - leaf_dim` coordinates.
    pub fn axis_aligned(dim: usize, leaf_dim: usize) -> Self {
        Self::new(dim, leaf_dim, "axis-aligned", move |_x| {
            let mut m = DMatrix::zeros(dim, dim - leaf_dim);
            for j in 0..(dim - leaf_dim) {
                m[(leaf_dim + j, j)] = 1.0;
            }
            m
        })
    }

    /// Leaves `{z = x + c}` in `R^3`.
    pub fn tilted() -> Self {
        Self::new(3, 2, "tilted", |_x| {
            let nu = DVector::from_column_slice(&[-1.0, 0.0, 1.0]).normalize();
            DMatrix::from_columns(&[nu])
        })
    }

    /// Leaves `{z = x^2/2 + c}` in `R^3`; the normal direction varies with x.
    pub fn parabolic() -> Self {
        Self::new(3, 2, "parabolic", |x| {
            let nu = DVector::from_column_slice(&[-x[0], 0.0, 1.0]).normalize();
            DMatrix::from_columns(&[nu])
        })
    }

    /// Orthonormal frame of the normal bundle at `x`.
    pub fn normal_frame(&self, x: &Point) -> DMatrix<f64> {
        (self.normals)(x)
    }

    /// Orthonormal frame of the leaf tangent space at `x`.
    pub fn leaf_frame(&self, x: &Point) -> DMatrix<f64> {
        orth_complement(&self.normal_frame(x))
    }

    /// Orthogonal projector onto the leaf tangent space at `x`.
    pub fn leaf_projector(&self, x: &Point) -> DMatrix<f64> {
        let nu = self.normal_frame(x);
        DMatrix::identity(self.dim, self.dim) - &nu * nu.transpose()
    }

    /// Norm of the normal component of `v` at `x`; zero for leaf-tangent vectors.
    pub fn tangency_defect(&self, x: &Point, v: &DVector<f64>) -> f64 {
        let nu = self.normal_frame(x);
        (nu.transpose() * v).norm()
    }
}

/// A vector field given by a closure.
#[derive(Clone)]
pub struct VectorField {
    pub dim: usize,
    eval: Arc<VectorFn>,
}

impl VectorField {
    pub fn new<F>(dim: usize, eval: F) -> Self
    where
        F: Fn(&Point) -> DVector<f64> + Send + Sync + 'static,
    {
        Self { dim, eval: Arc::new(eval) }
    }

    /// Constant coordinate field `e_i`.
    pub fn coordinate(dim: usize, axis: usize) -> Self {
        Self::new(dim, move |_x| {
            let mut v = DVector::zeros(dim);
            v[axis] = 1.0;
            v
        })
    }

    /// Coordinate field projected onto the leaves of a chart; always tangent.
    pub fn projected_coordinate(chart: &FoliatedChart, axis: usize) -> Self {
        let chart = chart.clone();
        Self::new(chart.dim, move |x| {
            let mut v = DVector::zeros(chart.dim);
            v[axis] = 1.0;
            chart.leaf_projector(x) * v
        })
    }

    pub fn at(&self, x: &Point) -> DVector<f64> {
        (self.eval)(x)
    }

    /// Jacobian by central differences with step `h`.
    pub fn jacobian(&self, x: &Point, h: f64) -> DMatrix<f64> {
        let n = self.dim;
        let mut j = DMatrix::zeros(n, n);
        for c in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[c] += h;
            xm[c] -= h;
            let col = (self.at(&xp) - self.at(&xm)) / (2.0 * h);
            j.set_column(c, &col);
        }
        j
    }
}

/// A p-form defined on leaf-tangent arguments.
#[derive(Clone)]
pub struct LeafwiseForm {
    pub dim: usize,
    pub degree: usize,
    eval: Arc<FormFn>,
}

impl LeafwiseForm {
    pub fn new<F>(dim: usize, degree: usize, eval: F) -> Self
    where
        F: Fn(&Point, &[DVector<f64>]) -> f64 + Send + Sync + 'static,
    {
        Self { dim, degree, eval: Arc::new(eval) }
    }

    /// The constant coordinate 1-form `dx_axis` restricted to leaves.
    pub fn coordinate(dim: usize, axis: usize) -> Self {
        Self::new(dim, 1, move |_x, vs| vs[0][axis])
    }

    /// `x_scale * dx_axis`-style 1-form with coefficient `x[coeff_axis]`.
    pub fn scaled_coordinate(dim: usize, coeff_axis: usize, axis: usize) -> Self {
        Self::new(dim, 1, move |x, vs| x[coeff_axis] * vs[0][axis])
    }

    pub fn value(&self, x: &Point, args: &[DVector<f64>]) -> f64 {
        debug_assert_eq!(args.len(), self.degree);
        (self.eval)(x, args)
    }
}

/// Exterior derivative along the leaves, evaluated on leaf-tangent fields.
///
/// Uses the alternating-sum formula: directional derivatives of the
/// contracted form plus bracket corrections, all by central differences with
/// step `h` (defaulting to [`FD_STEP`] when `h` is `None`). The fields must
/// be tangent to the leaves at `x`.
pub fn tangential_derivative(
    eta: &LeafwiseForm,
    chart: &FoliatedChart,
    x: &Point,
    fields: &[VectorField],
    h: Option<f64>,
) -> Result<f64> {
    let p = eta.degree;
    if fields.len() != p + 1 {
        return Err(Error::Dimension(format!(
            "need {} fields for the derivative of a {}-form, got {}",
            p + 1,
            p,
            fields.len()
        )));
    }
    let h = h.unwrap_or(FD_STEP);
    for (i, f) in fields.iter().enumerate() {
        let defect = chart.tangency_defect(x, &f.at(x));
        if defect > TANGENCY_TOL {
            return Err(Error::Precondition(format!(
                "field {i} is not leaf-tangent at the probe point (defect {defect:.3e})"
            )));
        }
    }

    let mut total = 0.0;
    // directional-derivative terms
    for i in 0..=p {
        let others: Vec<&VectorField> = fields.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, f)| f).collect();
        let gi = |y: &Point| {
            let args: Vec<DVector<f64>> = others.iter().map(|f| f.at(y)).collect();
            eta.value(y, &args)
        };
        let dir = fields[i].at(x);
        let xp = x + &dir * h;
        let xm = x - &dir * h;
        let term = (gi(&xp) - gi(&xm)) / (2.0 * h);
        total += if i % 2 == 0 { term } else { -term };
    }
    // bracket terms
    if p >= 1 {
        for i in 0..=p {
            for j in (i + 1)..=p {
                let ji = fields[i].jacobian(x, h);
                let jj = fields[j].jacobian(x, h);
                let bracket = &jj * fields[i].at(x) - &ji * fields[j].at(x);
                let mut args = vec![bracket];
                for (q, f) in fields.iter().enumerate() {
                    if q != i && q != j {
                        args.push(f.at(x));
                    }
                }
                let term = eta.value(x, &args);
                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                total += sign * term;
            }
        }
    }
    Ok(total)
}

/// A form defined on arbitrary ambient arguments.
#[derive(Clone)]
pub struct AmbientForm {
    pub dim: usize,
    pub degree: usize,
    eval: Arc<FormFn>,
}

impl AmbientForm {
    pub fn value(&self, x: &Point, args: &[DVector<f64>]) -> f64 {
        debug_assert_eq!(args.len(), self.degree);
        (self.eval)(x, args)
    }
}

#[derive(Debug, Clone)]
pub struct ExtensionOptions {
    /// Box over which closedness of the extension is probed.
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Grid points per axis for the probe.
    pub per_axis: usize,
    /// Central-difference step.
    pub h: f64,
}

impl ExtensionOptions {
    pub fn cube(dim: usize) -> Self {
        Self { lo: vec![-1.0; dim], hi: vec![1.0; dim], per_axis: 4, h: FD_STEP }
    }
}

#[derive(Debug, Clone)]
pub struct ExtensionReport {
    /// Max of the leafwise derivative of the input over the probe grid.
    pub leafwise_residual: f64,
    /// Input was not leafwise closed, so the extension cannot be closed.
    pub flagged_not_closed: bool,
    /// Max absolute value of the ambient exterior derivative of the
    /// extension over the probe grid, by central differences.
    pub max_abs_d: f64,
}

/// Extends a leafwise form to the ambient space with the normal bundle in
/// its kernel, and reports how closed the extension is.
///
/// The extension feeds leaf-projected arguments to the input form, so it
/// agrees with the input on leaf-tangent vectors and annihilates normals. A
/// leafwise-closed input on a flat-enough chart yields a closed extension;
/// inputs that fail leafwise closedness are flagged and the (necessarily
/// nonzero) derivative is still measured.
pub fn extend_by_normal_kernel(
    eta: &LeafwiseForm,
    chart: &FoliatedChart,
    opts: &ExtensionOptions,
) -> Result<(AmbientForm, ExtensionReport)> {
    let n = chart.dim;
    if eta.dim != n {
        return Err(Error::Dimension(format!("form dim {} vs chart dim {}", eta.dim, n)));
    }
    let p = eta.degree;

    let eta_ext = eta.clone();
    let chart_ext = chart.clone();
    let extension = AmbientForm {
        dim: n,
        degree: p,
        eval: Arc::new(move |x: &Point, args: &[DVector<f64>]| {
            let proj = chart_ext.leaf_projector(x);
            let projected: Vec<DVector<f64>> = args.iter().map(|v| &proj * v).collect();
            eta_ext.value(x, &projected)
        }),
    };

    let grid = grid_points(&opts.lo, &opts.hi, opts.per_axis);

    // leafwise closedness of the input, probed with projected coordinate fields
    let mut leafwise_residual = 0.0f64;
    let tuples = index_tuples(n, p + 1);
    for x in &grid {
        for tuple in &tuples {
            let fields: Vec<VectorField> = tuple
                .iter()
                .map(|&a| VectorField::projected_coordinate(chart, a))
                .collect();
            // projected coordinate fields can vanish (axis normal to leaves);
            // they are tangent wherever nonzero, so the precondition holds
            let val = tangential_derivative(eta, chart, x, &fields, Some(opts.h))?;
            leafwise_residual = leafwise_residual.max(val.abs());
        }
    }
    let flagged_not_closed = leafwise_residual > CLOSEDNESS_TOL;

    // ambient exterior derivative of the extension on coordinate tuples;
    // constant coordinate fields commute, so no bracket terms appear
    let mut max_abs_d = 0.0f64;
    for x in &grid {
        for tuple in &tuples {
            let mut val = 0.0;
            for (q, &axis) in tuple.iter().enumerate() {
                let rest: Vec<DVector<f64>> = tuple
                    .iter()
                    .enumerate()
                    .filter(|(r, _)| *r != q)
                    .map(|(_, &a)| basis(n, a))
                    .collect();
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[axis] += opts.h;
                xm[axis] -= opts.h;
                let deriv = (extension.value(&xp, &rest) - extension.value(&xm, &rest)) / (2.0 * opts.h);
                val += if q % 2 == 0 { deriv } else { -deriv };
            }
            max_abs_d = max_abs_d.max(val.abs());
        }
    }

    Ok((extension, ExtensionReport { leafwise_residual, flagged_not_closed, max_abs_d }))
}

fn basis(n: usize, i: usize) -> DVector<f64> {
    let mut v = DVector::zeros(n);
    v[i] = 1.0;
    v
}

fn grid_points(lo: &[f64], hi: &[f64], per_axis: usize) -> Vec<Point> {
    let n = lo.len();
    let mut points = vec![DVector::zeros(n)];
    for axis in 0..n {
        let mut next = Vec::with_capacity(points.len() * per_axis);
        for base in &points {
            for s in 0..per_axis {
                let t = if per_axis == 1 { 0.5 } else { s as f64 / (per_axis - 1) as f64 };
                let mut p = base.clone();
                p[axis] = lo[axis] + t * (hi[axis] - lo[axis]);
                next.push(p);
            }
        }
        points = next;
    }
    points
}

fn index_tuples(n: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut tuple = vec![0usize; len];
    fn rec(n: usize, len: usize, start: usize, depth: usize, tuple: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if depth == len {
            out.push(tuple.clone());
            return;
        }
        for i in start..n {
            tuple[depth] = i;
            rec(n, len, i + 1, depth + 1, tuple, out);
        }
    }
    rec(n, len, 0, 0, &mut tuple, &mut out);
    out
}
