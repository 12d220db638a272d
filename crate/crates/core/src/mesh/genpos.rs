use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{orthonormalize, PlaneField, Point};

use super::jiggle::{jiggle, Jiggling, JIGGLE_GUARD_FRACTION};
use super::lattice::{kuhn_triangulation, LatticeComplex, LatticeSpec};

/// Below this smallest singular value of the frame overlap, one plane is not
/// a graph over the other.
const GRAPH_TRANSVERSALITY_FLOOR: f64 = 1e-12;

/// Tolerance for the "complex covers the padded box" precondition.
const COVER_TOL: f64 = 1e-9;

/// One face of a cell together with the worst projection margin seen over
/// the sample points.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceMargin {
    /// Global vertex indices of the face.
    pub face: Vec<u32>,
    /// Smallest singular value of the projection of the face plane to the
    /// orthogonal complement of tau, minimized over samples.
    pub margin: f64,
    /// Sample point achieving the minimum.
    pub worst_sample: Point,
}

/// Per-cell transversality verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexVerdict {
    pub cell: u32,
    pub ok: bool,
    /// Minimum margin over all checked faces; infinite when none apply.
    pub margin: f64,
    pub faces_checked: usize,
    /// Faces whose margin did not clear the floor.
    pub failing: Vec<FaceMargin>,
}

/// Transversality summary for all cells meeting a query box.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralPositionReport {
    pub floor: f64,
    pub depth: usize,
    pub cells_checked: usize,
    pub faces_checked: usize,
    pub all_pass: bool,
    /// Minimum margin over all checked cells; infinite when nothing applied.
    pub min_margin: f64,
    pub worst_cell: Option<u32>,
    /// Failing cells with witnesses, ascending by cell index.
    pub failing: Vec<SimplexVerdict>,
}

/// Vertex-star containment and frame-graph-norm report over a query box.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionsReport {
    /// Every vertex star meeting the box fits in the box scaled by 1.5.
    pub star_ok: bool,
    /// Vertices violating the star containment.
    pub star_violations: Vec<u32>,
    pub stars_checked: usize,
    /// Between every sampled pair in a cell near the box, one plane is a
    /// graph over the other with operator norm below one.
    pub graph_ok: bool,
    /// Largest graph norm seen (infinite when a graph was undefined).
    pub max_graph_norm: f64,
    pub graph_violations: Vec<GraphNormRecord>,
    pub cells_checked: usize,
}

/// Worst graph norm within one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphNormRecord {
    pub cell: u32,
    /// Operator norm of the linear map whose graph carries one plane onto
    /// the other; infinite when the planes fail to be transverse enough.
    pub norm: f64,
}

/// Refinement sweep budget: largest lattice refinement and jiggle attempts
/// per refinement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepBudget {
    pub max_l: u32,
    pub attempts_per_l: u32,
}

/// One jiggle attempt within the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct AttemptRecord {
    pub l: u32,
    pub attempt: u32,
    pub seed: u64,
    pub eps: f64,
    pub min_margin: f64,
    pub cells_checked: usize,
    pub pass: bool,
}

/// A sweep hit: the refinement, the displacement, the displaced complex, and
/// the margins that cleared the floor.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSuccess {
    pub l: u32,
    pub jiggling: Jiggling,
    pub complex: LatticeComplex,
    pub report: GeneralPositionReport,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepOutcome {
    Success { success: Box<SweepSuccess>, attempts: Vec<AttemptRecord> },
    Failure { best_margin: f64, attempts: Vec<AttemptRecord> },
}

impl SweepOutcome {
    pub fn is_success(&self) -> bool {
        matches!(self, SweepOutcome::Success { .. })
    }

    pub fn attempts(&self) -> &[AttemptRecord] {
        match self {
            SweepOutcome::Success { attempts, .. } => attempts,
            SweepOutcome::Failure { attempts, .. } => attempts,
        }
    }
}

/// Smallest singular value; closed Gram form for up to two columns.
fn sigma_min(m: &DMatrix<f64>) -> f64 {
    match m.ncols() {
        0 => f64::INFINITY,
        1 => m.column(0).norm(),
        2 => {
            let a = m.column(0).dot(&m.column(0));
            let b = m.column(0).dot(&m.column(1));
            let c = m.column(1).dot(&m.column(1));
            let disc = ((a - c).powi(2) + 4.0 * b * b).sqrt();
            (0.5 * (a + c - disc)).max(0.0).sqrt()
        }
        _ => m.clone().svd(false, false).singular_values.min(),
    }
}

/// Largest singular value; closed Gram form for up to two columns.
fn sigma_max(m: &DMatrix<f64>) -> f64 {
    match m.ncols() {
        0 => 0.0,
        1 => m.column(0).norm(),
        2 => {
            let a = m.column(0).dot(&m.column(0));
            let b = m.column(0).dot(&m.column(1));
            let c = m.column(1).dot(&m.column(1));
            let disc = ((a - c).powi(2) + 4.0 * b * b).sqrt();
            (0.5 * (a + c + disc)).max(0.0).sqrt()
        }
        _ => m.clone().svd(false, false).singular_values.max(),
    }
}

/// Barycentric weight tuples for sampling a simplex: all grids of denominator
/// up to `depth`, plus the barycenter, deduplicated. Depth 2 on a simplex
/// gives vertices, edge midpoints, and the barycenter.
fn barycentric_weights(depth: usize, nverts: usize) -> Vec<Vec<f64>> {
    use std::collections::BTreeSet;
    fn gcd(a: u64, b: u64) -> u64 {
        if b == 0 { a } else { gcd(b, a % b) }
    }
    let mut seen: BTreeSet<Vec<(u64, u64)>> = BTreeSet::new();
    let mut out: Vec<Vec<f64>> = Vec::new();
    let mut push = |numers: &[u64], den: u64, out: &mut Vec<Vec<f64>>| {
        let g = numers.iter().fold(den, |acc, &v| gcd(acc, v));
        let key: Vec<(u64, u64)> = numers.iter().map(|&v| (v / g, den / g)).collect();
        if seen.insert(key) {
            out.push(numers.iter().map(|&v| v as f64 / den as f64).collect());
        }
    };
    let mut tuple = vec![0u64; nverts];
    for den in 1..=depth.max(1) as u64 {
        fn rec(
            tuple: &mut Vec<u64>,
            pos: usize,
            remaining: u64,
            den: u64,
            push: &mut impl FnMut(&[u64], u64, &mut Vec<Vec<f64>>),
            out: &mut Vec<Vec<f64>>,
        ) {
            if pos + 1 == tuple.len() {
                tuple[pos] = remaining;
                push(tuple, den, out);
                return;
            }
            for v in 0..=remaining {
                tuple[pos] = v;
                rec(tuple, pos + 1, remaining - v, den, push, out);
            }
        }
        rec(&mut tuple, 0, den, den, &mut push, &mut out);
    }
    let bary = vec![1u64; nverts];
    push(&bary, nverts as u64, &mut out);
    out
}

fn weighted_point(weights: &[f64], verts: &[&Point]) -> Point {
    let mut p = DVector::zeros(verts[0].nrows());
    for (w, v) in weights.iter().zip(verts) {
        p += *v * *w;
    }
    p
}

/// Margins of every face of complementary dimension in one cell.
///
/// For each such face and each barycentric sample x of the cell, the face
/// plane is projected to the orthogonal complement of the plane field at x;
/// the margin is the smallest singular value of that projection, minimized
/// over samples. Rank-n fields have no complementary-dimension faces of
/// positive dimension to check and yield an empty list.
pub fn face_margins(
    complex: &LatticeComplex,
    cell: usize,
    tau: &PlaneField,
    depth: usize,
) -> Result<Vec<FaceMargin>> {
    let n = complex.dim;
    if tau.dim != n {
        return Err(Error::Dimension(format!(
            "plane field lives in dimension {}, complex in {n}",
            tau.dim
        )));
    }
    let k = tau.rank;
    if k > n {
        return Err(Error::Dimension(format!("plane field rank {k} exceeds dimension {n}")));
    }
    let face_dim = n - k;
    if face_dim == 0 {
        return Ok(Vec::new());
    }
    if complex.signed_volume(cell) == 0.0 {
        return Err(Error::Degenerate(format!("cell {cell} has zero volume")));
    }

    let cell_verts: Vec<&Point> =
        complex.cell(cell).iter().map(|&v| &complex.positions[v as usize]).collect();
    let samples: Vec<Point> = barycentric_weights(depth, cell_verts.len())
        .iter()
        .map(|w| weighted_point(w, &cell_verts))
        .collect();
    let complements: Vec<DMatrix<f64>> = samples
        .iter()
        .map(|x| tau.sample(x).map(|s| s.complement()))
        .collect::<Result<_>>()?;

    let mut out = Vec::new();
    for face in complex.faces_of_cell(cell, face_dim) {
        let v0 = &complex.positions[face[0] as usize];
        let mut dirs = DMatrix::zeros(n, face_dim);
        for (c, &vi) in face[1..].iter().enumerate() {
            dirs.set_column(c, &(&complex.positions[vi as usize] - v0));
        }
        let u = orthonormalize(&dirs)?;
        let mut margin = f64::INFINITY;
        let mut worst = samples[0].clone();
        for (x, w) in samples.iter().zip(&complements) {
            let s = sigma_min(&(w.transpose() * &u));
            if s < margin {
                margin = s;
                worst = x.clone();
            }
        }
        out.push(FaceMargin { face, margin, worst_sample: worst });
    }
    Ok(out)
}

/// Transversality verdict for one cell: every complementary-dimension face
/// must project injectively, with margin above the floor, at every sample.
pub fn general_position_simplex(
    complex: &LatticeComplex,
    cell: usize,
    tau: &PlaneField,
    depth: usize,
    floor: f64,
) -> Result<SimplexVerdict> {
    let margins = face_margins(complex, cell, tau, depth)?;
    let faces_checked = margins.len();
    let mut margin = f64::INFINITY;
    let mut failing = Vec::new();
    for fm in margins {
        margin = margin.min(fm.margin);
        if fm.margin <= floor {
            failing.push(fm);
        }
    }
    Ok(SimplexVerdict { cell: cell as u32, ok: failing.is_empty(), margin, faces_checked, failing })
}

/// Runs the per-cell transversality check over every cell whose bounding box
/// meets `[k_lo, k_hi]` (a conservative superset of the cells that truly meet
/// the box). Cells are processed in parallel; the report is ordered by cell
/// index and independent of thread count.
pub fn check_complex_region(
    complex: &LatticeComplex,
    tau: &PlaneField,
    k_lo: &[f64],
    k_hi: &[f64],
    depth: usize,
    floor: f64,
) -> Result<GeneralPositionReport> {
    let candidates: Vec<u32> = (0..complex.cell_count() as u32)
        .into_par_iter()
        .filter(|&c| complex.cell_meets_box(c as usize, k_lo, k_hi))
        .collect();
    let verdicts: Vec<(f64, usize, Option<SimplexVerdict>)> = candidates
        .par_iter()
        .map(|&c| {
            let v = general_position_simplex(complex, c as usize, tau, depth, floor)?;
            Ok((v.margin, v.faces_checked, if v.ok { None } else { Some(v) }))
        })
        .collect::<Result<_>>()?;

    let mut min_margin = f64::INFINITY;
    let mut worst_cell = None;
    let mut faces_checked = 0;
    let mut failing = Vec::new();
    for (c, (margin, faces, bad)) in candidates.iter().zip(verdicts) {
        faces_checked += faces;
        if margin < min_margin {
            min_margin = margin;
            worst_cell = Some(*c);
        }
        if let Some(v) = bad {
            failing.push(v);
        }
    }
    Ok(GeneralPositionReport {
        floor,
        depth,
        cells_checked: candidates.len(),
        faces_checked,
        all_pass: failing.is_empty(),
        min_margin,
        worst_cell,
        failing,
    })
}

fn scaled_box(lo: &[f64], hi: &[f64], s: f64) -> (Vec<f64>, Vec<f64>) {
    let mut slo = Vec::with_capacity(lo.len());
    let mut shi = Vec::with_capacity(lo.len());
    for i in 0..lo.len() {
        let c = 0.5 * (lo[i] + hi[i]);
        let w = 0.5 * (hi[i] - lo[i]);
        slo.push(c - s * w);
        shi.push(c + s * w);
    }
    (slo, shi)
}

/// Checks the two lattice regularity conditions near the box `[k_lo, k_hi]`:
///
/// * star containment: every vertex whose closed star meets the box has its
///   closed star inside the box scaled by 1.5;
/// * graph norms: within every cell meeting the box scaled by 2, the plane at
///   one sampled vertex is a graph over the plane at another with operator
///   norm below one, for all ordered vertex pairs.
///
/// The complex must cover the box padded by 1 on every axis.
pub fn check_lattice_conditions(
    complex: &LatticeComplex,
    tau: &PlaneField,
    k_lo: &[f64],
    k_hi: &[f64],
) -> Result<ConditionsReport> {
    let n = complex.dim;
    if k_lo.len() != n || k_hi.len() != n {
        return Err(Error::Dimension("query box must match the complex dimension".into()));
    }
    // coverage precondition: the positions' bounding box must pad the query
    // box by 1 on every axis
    let mut cover_lo = vec![f64::INFINITY; n];
    let mut cover_hi = vec![f64::NEG_INFINITY; n];
    for p in &complex.positions {
        for a in 0..n {
            cover_lo[a] = cover_lo[a].min(p[a]);
            cover_hi[a] = cover_hi[a].max(p[a]);
        }
    }
    for a in 0..n {
        if cover_lo[a] > k_lo[a] - 1.0 + COVER_TOL || cover_hi[a] < k_hi[a] + 1.0 - COVER_TOL {
            return Err(Error::Precondition(format!(
                "complex must cover the box padded by 1 on axis {a}"
            )));
        }
    }

    let (mid_lo, mid_hi) = scaled_box(k_lo, k_hi, 1.5);
    let (out_lo, out_hi) = scaled_box(k_lo, k_hi, 2.0);

    // star containment
    let cofaces = complex.vertex_cofaces();
    let star_rows: Vec<(u32, bool, bool)> = (0..complex.vertex_count() as u32)
        .into_par_iter()
        .map(|v| {
            let star = &cofaces[v as usize];
            let meets = star.iter().any(|&c| complex.cell_meets_box(c as usize, k_lo, k_hi));
            if !meets {
                return (v, false, true);
            }
            let contained = star.iter().all(|&c| {
                let (blo, bhi) = complex.cell_bbox(c as usize);
                (0..n).all(|a| blo[a] >= mid_lo[a] - COVER_TOL && bhi[a] <= mid_hi[a] + COVER_TOL)
            });
            (v, true, contained)
        })
        .collect();
    let stars_checked = star_rows.iter().filter(|r| r.1).count();
    let star_violations: Vec<u32> =
        star_rows.iter().filter(|r| r.1 && !r.2).map(|r| r.0).collect();

    // graph norms over sampled vertex pairs
    let graph_cells: Vec<u32> = (0..complex.cell_count() as u32)
        .into_par_iter()
        .filter(|&c| complex.cell_meets_box(c as usize, &out_lo, &out_hi))
        .collect();
    let mut vertices: Vec<u32> = graph_cells
        .iter()
        .flat_map(|&c| complex.cell(c as usize).iter().copied())
        .collect();
    vertices.sort_unstable();
    vertices.dedup();
    let frames: Vec<(DMatrix<f64>, DMatrix<f64>)> = vertices
        .par_iter()
        .map(|&v| {
            let s = tau.sample(&complex.positions[v as usize])?;
            let comp = s.complement();
            Ok((s.frame, comp))
        })
        .collect::<Result<_>>()?;
    let frame_of = |v: u32| {
        let i = vertices.binary_search(&v).expect("vertex indexed above");
        &frames[i]
    };

    let cell_norms: Vec<f64> = graph_cells
        .par_iter()
        .map(|&c| {
            let verts = complex.cell(c as usize);
            let mut worst = 0.0f64;
            for &vx in verts {
                let (fx, wx) = frame_of(vx);
                for &vy in verts {
                    if vx == vy {
                        continue;
                    }
                    let (fy, _) = frame_of(vy);
                    let overlap = fx.transpose() * fy;
                    if sigma_min(&overlap) < GRAPH_TRANSVERSALITY_FLOOR {
                        worst = f64::INFINITY;
                        continue;
                    }
                    let inv = overlap
                        .try_inverse()
                        .expect("overlap invertible above the transversality floor");
                    let graph_map = wx.transpose() * fy * inv;
                    worst = worst.max(sigma_max(&graph_map));
                }
            }
            worst
        })
        .collect();

    let mut max_graph_norm = 0.0f64;
    let mut graph_violations = Vec::new();
    for (&c, &norm) in graph_cells.iter().zip(&cell_norms) {
        max_graph_norm = max_graph_norm.max(norm);
        if !(norm < 1.0) {
            graph_violations.push(GraphNormRecord { cell: c, norm });
        }
    }

    Ok(ConditionsReport {
        star_ok: star_violations.is_empty(),
        star_violations,
        stars_checked,
        graph_ok: graph_violations.is_empty(),
        max_graph_norm,
        graph_violations,
        cells_checked: graph_cells.len(),
    })
}

/// Mixes a base seed with the sweep coordinates (splitmix-style) so every
/// (refinement, attempt) pair draws an independent, reproducible jiggle.
fn mix_seed(base: u64, l: u32, attempt: u32) -> u64 {
    let mut z = base
        .wrapping_add((l as u64).wrapping_mul(0x9e3779b97f4a7c15))
        .wrapping_add((attempt as u64).wrapping_mul(0xbf58476d1ce4e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Sweeps lattice refinements l = 1, 2, 4, ... up to the budget, jiggling
/// each mesh with radius `eps_fraction / l` over fresh seeds, and returns the
/// first displaced complex whose cells meeting `[k_lo, k_hi]` all clear the
/// transversality floor. The mesh covers the box padded by 1 per axis.
pub fn find_general_position(
    tau: &PlaneField,
    k_lo: &[f64],
    k_hi: &[f64],
    eps_fraction: f64,
    budget: SweepBudget,
    base_seed: u64,
    depth: usize,
    floor: f64,
) -> Result<SweepOutcome> {
    if !(0.0..JIGGLE_GUARD_FRACTION).contains(&eps_fraction) {
        return Err(Error::Precondition(format!(
            "eps fraction {eps_fraction} must lie in [0, {JIGGLE_GUARD_FRACTION})"
        )));
    }
    if budget.max_l == 0 || budget.attempts_per_l == 0 {
        return Err(Error::Precondition("sweep budget must be positive".into()));
    }
    let n = tau.dim;
    if k_lo.len() != n || k_hi.len() != n {
        return Err(Error::Dimension("box must match the plane field dimension".into()));
    }
    let box_lo: Vec<f64> = k_lo.iter().map(|v| v - 1.0).collect();
    let box_hi: Vec<f64> = k_hi.iter().map(|v| v + 1.0).collect();

    let mut attempts = Vec::new();
    let mut best_margin = f64::NEG_INFINITY;
    let mut l = 1u32;
    while l <= budget.max_l {
        let spec = LatticeSpec::new(n, l, box_lo.clone(), box_hi.clone())?;
        let base = kuhn_triangulation(&spec)?;
        let eps = eps_fraction / l as f64;
        for attempt in 0..budget.attempts_per_l {
            let seed = mix_seed(base_seed, l, attempt);
            let jiggling = jiggle(&base, eps, seed)?;
            let moved = jiggling.apply(&base);
            let report = check_complex_region(&moved, tau, k_lo, k_hi, depth, floor)?;
            let pass = report.all_pass;
            let min_margin = report.min_margin;
            attempts.push(AttemptRecord {
                l,
                attempt,
                seed,
                eps,
                min_margin,
                cells_checked: report.cells_checked,
                pass,
            });
            if min_margin > best_margin {
                best_margin = min_margin;
            }
            if pass {
                return Ok(SweepOutcome::Success {
                    success: Box::new(SweepSuccess { l, jiggling, complex: moved, report }),
                    attempts,
                });
            }
        }
        match l.checked_mul(2) {
            Some(next) => l = next,
            None => break,
        }
    }
    Ok(SweepOutcome::Failure { best_margin, attempts })
}
