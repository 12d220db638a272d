//! Whole-model audit sweeps: grid scans of the integrability defect and the
//! leafwise nondegeneracy margin, boundary-identity probes, seam agreement,
//! and polar-versus-chart consistency, collected into serializable reports.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Point;

use super::family::FamilyModel;
use super::model::SolidTorusModel;

/// Verdict threshold for quantities that must vanish to rounding.
const EXACT_TOL: f64 = 1e-12;
/// Verdict threshold for the polar-versus-chart cross-check, which divides
/// by small radii and is allowed more slack than the exact identities.
const CHART_TOL: f64 = 1e-6;
/// Radii probed by the polar-versus-chart cross-check: near the core axis,
/// inside each piece's plateau, and on both sides of the seam.
const CHART_RADII: [f64; 6] = [1e-3, 0.3, 0.45, 0.55, 0.7, 0.999];
/// Angular resolution (per axis) of the chart cross-check.
const CHART_ANGLES: usize = 8;

/// Summary of a full-model audit of a solid-torus foliation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusReport {
    /// Boundary slope of the model that was audited.
    pub a: f64,
    /// Grid resolution per axis (radius and both angles).
    pub grid: usize,
    /// Number of boundary probe points actually used.
    pub boundary_probes: usize,
    /// Threshold the minimum margin is judged against.
    pub margin_floor: f64,
    /// Largest integrability defect seen on the grid.
    pub defect_max: f64,
    /// Smallest leafwise nondegeneracy margin seen on the grid.
    pub margin_min: f64,
    /// Radius of the grid point attaining the minimum margin.
    pub margin_min_radius: f64,
    /// Grid points where the 1-form vanished and no margin exists.
    pub degenerate_points: usize,
    /// Largest deviation of the boundary contraction of the 2-form by the
    /// outward radial direction from its closed-form components.
    pub boundary_form_dev: f64,
    /// Largest deviation of that contraction paired with the tangent
    /// direction annihilated by the 1-form from one plus the slope squared.
    pub boundary_pairing_dev: f64,
    /// The measured pairing at the reference boundary point (zero angles).
    pub alpha_on_kernel: f64,
    /// Largest entry-wise disagreement of the two piece formulas on the
    /// seam band.
    pub seam_gap_max: f64,
    /// Largest deviation of the chart-assembled forms from their polar
    /// coefficient formulas over the cross-check radii.
    pub core_chart_gap: f64,
    /// Conjunction of all the verdicts above at their thresholds.
    pub pass: bool,
}

/// Summary of an audit of a higher-dimensional family built over the
/// solid-torus model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyReport {
    /// Ambient dimension of the family.
    pub ambient_dim: usize,
    /// Grid resolution per axis (radius, both angles, parameter).
    pub grid: usize,
    /// Threshold the minimum margin is judged against.
    pub margin_floor: f64,
    /// Smallest leafwise nondegeneracy margin seen on the grid.
    pub margin_min: f64,
    /// Grid points where the slice 1-form vanished.
    pub degenerate_points: usize,
    /// Largest deviation of the family forms from the single-model forms
    /// over the region where the blend weight is one.
    pub reduction_gap_max: f64,
    /// Largest deviation of the margin from one over the region where the
    /// blend weight is zero (the product region).
    pub product_margin_dev: f64,
    /// Conjunction of all the verdicts above at their thresholds.
    pub pass: bool,
}

fn cart_point(r: f64, phi: f64, theta: f64) -> Point {
    DVector::from_vec(vec![r * phi.cos(), r * phi.sin(), theta])
}

/// Audit a solid-torus model on a `grid`^3 lattice of (radius, angle, angle)
/// samples plus boundary, seam, and chart probes. Failures of the audited
/// identities are recorded in the report, not raised as errors; only
/// malformed models (seam mismatch, points outside the torus) error out.
pub fn verify_example(
    model: &SolidTorusModel,
    grid: usize,
    boundary_probes: usize,
    margin_floor: f64,
) -> Result<TorusReport> {
    if grid < 2 {
        return Err(Error::Precondition(format!("grid {grid} is too coarse, need at least 2")));
    }
    if boundary_probes == 0 {
        return Err(Error::Precondition("need at least one boundary probe".into()));
    }

    // Interior sweep: defect and margin at every grid point.
    let total = grid * grid * grid;
    let rows: Vec<(f64, f64, bool)> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let i = idx / (grid * grid);
            let j = (idx / grid) % grid;
            let k = idx % grid;
            let r = i as f64 / (grid - 1) as f64;
            let phi = TAU * j as f64 / grid as f64;
            let theta = TAU * k as f64 / grid as f64;
            let p = cart_point(r, phi, theta);
            let defect = model.integrability_defect_at(&p)?;
            match model.leafwise_margin(&p) {
                Ok(m) => Ok((defect, m, false)),
                Err(Error::Degenerate(_)) => Ok((defect, 0.0, true)),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut defect_max = 0.0f64;
    let mut margin_min = f64::INFINITY;
    let mut margin_min_radius = 0.0f64;
    let mut degenerate_points = 0usize;
    for (idx, &(defect, margin, degenerate)) in rows.iter().enumerate() {
        if defect > defect_max {
            defect_max = defect;
        }
        if degenerate {
            degenerate_points += 1;
        }
        if margin < margin_min {
            margin_min = margin;
            margin_min_radius = (idx / (grid * grid)) as f64 / (grid - 1) as f64;
        }
    }

    // Boundary probes: the contraction of the 2-form by the outward radial
    // direction must equal its closed-form components, and pairing it with
    // the annihilated tangent direction must give one plus slope squared.
    let side = (boundary_probes as f64).sqrt().ceil() as usize;
    let a = model.a;
    let expected_pairing = 1.0 + a * a;
    let boundary: Vec<(f64, f64)> = (0..side * side)
        .into_par_iter()
        .map(|idx| {
            let phi = TAU * (idx / side) as f64 / side as f64;
            let theta = TAU * (idx % side) as f64 / side as f64;
            let p = cart_point(1.0, phi, theta);
            let omega = model.omega_form(&p)?;
            let radial = DVector::from_vec(vec![p[0], p[1], 0.0]);
            let contraction = omega.transpose() * &radial;
            let expected = DVector::from_vec(vec![-p[1], p[0], a]);
            let form_dev = (&contraction - &expected).amax();
            let pairing_dev = (contraction.dot(&expected) - expected_pairing).abs();
            Ok((form_dev, pairing_dev))
        })
        .collect::<Result<Vec<_>>>()?;
    let boundary_form_dev = boundary.iter().fold(0.0f64, |m, r| m.max(r.0));
    let boundary_pairing_dev = boundary.iter().fold(0.0f64, |m, r| m.max(r.1));

    // Reference pairing at the zero-angle boundary point.
    let p0 = cart_point(1.0, 0.0, 0.0);
    let omega0 = model.omega_form(&p0)?;
    let radial0 = DVector::from_vec(vec![p0[0], p0[1], 0.0]);
    let kernel_dir = DVector::from_vec(vec![-p0[1], p0[0], a]);
    let alpha_on_kernel = (omega0.transpose() * radial0).dot(&kernel_dir);

    // Seam band: both piece formulas must agree where they are stitched.
    let mut seam_gap_max = 0.0f64;
    for i in 0..=20 {
        let r = 0.45 + 0.005 * i as f64;
        for j in 0..CHART_ANGLES {
            let phi = TAU * j as f64 / CHART_ANGLES as f64;
            for k in 0..CHART_ANGLES {
                let theta = TAU * k as f64 / CHART_ANGLES as f64;
                seam_gap_max = seam_gap_max.max(model.seam_gap(&cart_point(r, phi, theta))?);
            }
        }
    }

    let core_chart_gap = chart_consistency_gap(model)?;

    let pass = defect_max <= EXACT_TOL
        && degenerate_points == 0
        && margin_min >= margin_floor
        && boundary_form_dev <= EXACT_TOL
        && boundary_pairing_dev <= EXACT_TOL
        && (alpha_on_kernel - expected_pairing).abs() <= EXACT_TOL
        && seam_gap_max <= EXACT_TOL
        && core_chart_gap <= CHART_TOL;

    Ok(TorusReport {
        a,
        grid,
        boundary_probes: side * side,
        margin_floor,
        defect_max,
        margin_min,
        margin_min_radius,
        degenerate_points,
        boundary_form_dev,
        boundary_pairing_dev,
        alpha_on_kernel,
        seam_gap_max,
        core_chart_gap,
        pass,
    })
}

/// Compare the chart-assembled 1-form and 2-form against their polar
/// coefficient formulas on the cross-check radii: the 1-form must read
/// (band cutoff, minus slope times boundary cutoff, sum of plateau cutoffs)
/// against the radial, angular, and circle directions, and the 2-form must
/// reproduce the active piece's polar coefficients.
fn chart_consistency_gap(model: &SolidTorusModel) -> Result<f64> {
    let a = model.a;
    let band = model.band_sign.factor();
    let mut gap = 0.0f64;
    for &r in CHART_RADII.iter() {
        let l0 = model.cutoffs.lambda0.value(r);
        let lh = model.cutoffs.lambda_half.value(r);
        let l1 = model.cutoffs.lambda1.value(r);
        // The stitched 2-form uses the core piece up to the seam; its area
        // coefficient is l0 * r inside and l1 outside, and only the outer
        // piece carries the radial-circle term.
        let (area_coeff, radial_circle) = if r <= 0.5 { (l0 * r, 0.0) } else { (l1, a * l1) };
        for j in 0..CHART_ANGLES {
            let phi = TAU * j as f64 / CHART_ANGLES as f64;
            for k in 0..CHART_ANGLES {
                let theta = TAU * k as f64 / CHART_ANGLES as f64;
                let p = cart_point(r, phi, theta);
                let radial = DVector::from_vec(vec![phi.cos(), phi.sin(), 0.0]);
                let angular = DVector::from_vec(vec![-p[1], p[0], 0.0]);
                let circle = DVector::from_vec(vec![0.0, 0.0, 1.0]);
                let beta = model.beta_components(&p)?;
                gap = gap.max((beta.dot(&radial) - lh).abs());
                gap = gap.max((beta.dot(&angular) + a * l1).abs());
                gap = gap.max((beta.dot(&circle) - (l0 + l1)).abs());
                let omega = model.omega_form(&p)?;
                let pair = |u: &DVector<f64>, v: &DVector<f64>| (u.transpose() * &omega * v)[(0, 0)];
                gap = gap.max((pair(&radial, &angular) - area_coeff).abs());
                gap = gap.max((pair(&radial, &circle) - radial_circle).abs());
                gap = gap.max((pair(&angular, &circle) - band * lh).abs());
            }
        }
    }
    Ok(gap)
}

/// Audit a family model on a `grid`^4 lattice per parameter ray (each
/// parameter axis, plus the diagonal ray when there are several), checking
/// the margin everywhere, exact reduction to the single model where the
/// blend weight is one, and exact product behavior where it is zero.
pub fn verify_family(family: &FamilyModel, grid: usize, margin_floor: f64) -> Result<FamilyReport> {
    if grid < 2 {
        return Err(Error::Precondition(format!("grid {grid} is too coarse, need at least 2")));
    }
    let params = family.dim - 3;
    let mut rays: Vec<DVector<f64>> = (0..params)
        .map(|axis| {
            let mut w = DVector::zeros(params);
            w[axis] = 1.0;
            w
        })
        .collect();
    if params > 1 {
        rays.push(DVector::from_element(params, 1.0 / (params as f64).sqrt()));
    }

    let per_ray = grid * grid * grid * grid;
    let total = rays.len() * per_ray;
    let rows: Vec<(f64, bool, f64, f64)> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let ray = &rays[idx / per_ray];
            let rest = idx % per_ray;
            let i = rest / (grid * grid * grid);
            let j = (rest / (grid * grid)) % grid;
            let k = (rest / grid) % grid;
            let m = rest % grid;
            let r = i as f64 / (grid - 1) as f64;
            let phi = TAU * j as f64 / grid as f64;
            let theta = TAU * k as f64 / grid as f64;
            let t = m as f64 / (grid - 1) as f64;
            let mut p = DVector::zeros(family.dim);
            p[0] = r * phi.cos();
            p[1] = r * phi.sin();
            p[2] = theta;
            for s in 0..params {
                p[3 + s] = t * ray[s];
            }
            let (margin, degenerate) = match family.leafwise_margin(&p) {
                Ok(m) => (m, false),
                Err(Error::Degenerate(_)) => (0.0, true),
                Err(e) => return Err(e),
            };
            // The family recovers the parameter radius from the embedded
            // point as a norm, which can differ from t by an ulp; the
            // reference slice must use the recovered value.
            let t_used = p.rows(3, params).norm().min(1.0);
            let weight = family.g_profile.value(t_used);
            let mut reduction_gap = 0.0f64;
            if weight == 1.0 {
                let (c, m_full) = family.family_forms(&p)?;
                let q = DVector::from_vec(vec![p[0], p[1], p[2]]);
                let slice = family.slice_model(t_used);
                let beta = slice.beta_components(&q)?;
                let omega = slice.omega_form(&q)?;
                let mut c_ref = DVector::zeros(family.dim);
                let mut m_ref = DMatrix::zeros(family.dim, family.dim);
                for x in 0..3 {
                    c_ref[x] = beta[x];
                    for y in 0..3 {
                        m_ref[(x, y)] = omega[(x, y)];
                    }
                }
                reduction_gap = (&c - &c_ref).amax().max((&m_full - &m_ref).amax());
            }
            let product_dev = if weight == 0.0 { (margin - 1.0).abs() } else { 0.0 };
            Ok((margin, degenerate, reduction_gap, product_dev))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut margin_min = f64::INFINITY;
    let mut degenerate_points = 0usize;
    let mut reduction_gap_max = 0.0f64;
    let mut product_margin_dev = 0.0f64;
    for &(margin, degenerate, reduction_gap, product_dev) in rows.iter() {
        if degenerate {
            degenerate_points += 1;
        }
        if margin < margin_min {
            margin_min = margin;
        }
        if reduction_gap > reduction_gap_max {
            reduction_gap_max = reduction_gap;
        }
        if product_dev > product_margin_dev {
            product_margin_dev = product_dev;
        }
    }

    let pass = degenerate_points == 0
        && margin_min >= margin_floor
        && reduction_gap_max <= EXACT_TOL
        && product_margin_dev <= EXACT_TOL;

    Ok(FamilyReport {
        ambient_dim: family.dim,
        grid,
        margin_floor,
        margin_min,
        degenerate_points,
        reduction_gap_max,
        product_margin_dev,
        pass,
    })
}
