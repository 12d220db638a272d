use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geom::Point;

/// Tolerance for box corners landing on lattice points.
const CORNER_TOL: f64 = 1e-9;

/// An axis-aligned box meshed by the lattice `(1/l) Z^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSpec {
    pub dim: usize,
    pub l: u32,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl LatticeSpec {
    pub fn new(dim: usize, l: u32, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != dim || hi.len() != dim {
            return Err(Error::Dimension("box bounds must match the dimension".into()));
        }
        if l == 0 {
            return Err(Error::Precondition("lattice refinement l must be at least 1".into()));
        }
        for i in 0..dim {
            if hi[i] <= lo[i] {
                return Err(Error::Precondition(format!("empty box on axis {i}")));
            }
            for v in [lo[i], hi[i]] {
                let scaled = v * l as f64;
                if (scaled - scaled.round()).abs() > CORNER_TOL {
                    return Err(Error::Precondition(format!(
                        "box corner {v} on axis {i} is not a multiple of 1/{l}"
                    )));
                }
            }
        }
        Ok(Self { dim, l, lo, hi })
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.l as f64
    }

    fn steps(&self) -> Vec<usize> {
        (0..self.dim)
            .map(|i| ((self.hi[i] - self.lo[i]) * self.l as f64).round() as usize)
            .collect()
    }
}

/// A simplicial complex with explicit vertex positions.
///
/// Cells are stored flat, `dim + 1` vertex indices each, ordered so that the
/// signed volume is positive. Faces and vertex stars are derived on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeComplex {
    pub dim: usize,
    /// Lattice spacing the complex was generated with (1/l).
    pub spacing: f64,
    pub positions: Vec<Point>,
    cells_flat: Vec<u32>,
}

impl LatticeComplex {
    pub fn from_parts(dim: usize, spacing: f64, positions: Vec<Point>, cells_flat: Vec<u32>) -> Result<Self> {
        if cells_flat.len() % (dim + 1) != 0 {
            return Err(Error::Dimension("cell buffer length must be a multiple of dim+1".into()));
        }
        Ok(Self { dim, spacing, positions, cells_flat })
    }

    pub fn vertex_count(&self) -> usize {
        self.positions.len()
    }

    pub fn cell_count(&self) -> usize {
        self.cells_flat.len() / (self.dim + 1)
    }

    pub fn cell(&self, i: usize) -> &[u32] {
        let w = self.dim + 1;
        &self.cells_flat[i * w..(i + 1) * w]
    }

    pub fn cells_flat(&self) -> &[u32] {
        &self.cells_flat
    }

    /// Signed volume of a cell (positive for correctly oriented cells).
    pub fn signed_volume(&self, i: usize) -> f64 {
        let cell = self.cell(i);
        let n = self.dim;
        let v0 = &self.positions[cell[0] as usize];
        let mut edges = DMatrix::zeros(n, n);
        for (c, &vi) in cell[1..].iter().enumerate() {
            edges.set_column(c, &(&self.positions[vi as usize] - v0));
        }
        let mut factorial = 1.0;
        for q in 2..=n {
            factorial *= q as f64;
        }
        edges.determinant() / factorial
    }

    /// Axis-aligned bounding box of a cell.
    pub fn cell_bbox(&self, i: usize) -> (Point, Point) {
        let n = self.dim;
        let mut lo = DVector::from_element(n, f64::INFINITY);
        let mut hi = DVector::from_element(n, f64::NEG_INFINITY);
        for &vi in self.cell(i) {
            let p = &self.positions[vi as usize];
            for a in 0..n {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        (lo, hi)
    }

    /// Whether the cell's bounding box intersects `[lo, hi]`.
    ///
    /// Conservative: a bounding-box hit can overstate an actual simplex-box
    /// intersection, so "meets the box" filters check at least the true set.
    pub fn cell_meets_box(&self, i: usize, lo: &[f64], hi: &[f64]) -> bool {
        let (clo, chi) = self.cell_bbox(i);
        for a in 0..self.dim {
            if chi[a] < lo[a] || clo[a] > hi[a] {
                return false;
            }
        }
        true
    }

    /// Cells incident to each vertex.
    pub fn vertex_cofaces(&self) -> Vec<Vec<u32>> {
        let mut stars = vec![Vec::new(); self.vertex_count()];
        for c in 0..self.cell_count() {
            for &vi in self.cell(c) {
                stars[vi as usize].push(c as u32);
            }
        }
        stars
    }

    /// All faces of a cell with `face_dim + 1` vertices, as index tuples.
    pub fn faces_of_cell(&self, i: usize, face_dim: usize) -> Vec<Vec<u32>> {
        let cell = self.cell(i);
        subsets(cell, face_dim + 1)
    }

    /// Deduplicated list of faces of the given dimension across all cells
    /// (each face as a sorted vertex tuple), with ascending order.
    pub fn faces_of_dim(&self, face_dim: usize) -> Vec<Vec<u32>> {
        let mut all: Vec<Vec<u32>> = Vec::new();
        for c in 0..self.cell_count() {
            for mut f in self.faces_of_cell(c, face_dim) {
                f.sort_unstable();
                all.push(f);
            }
        }
        all.sort_unstable();
        all.dedup();
        all
    }

    /// Same-combinatorics complex with displaced vertex positions.
    pub fn with_positions(&self, positions: Vec<Point>) -> Self {
        assert_eq!(positions.len(), self.positions.len());
        Self { dim: self.dim, spacing: self.spacing, positions, cells_flat: self.cells_flat.clone() }
    }
}

fn subsets(items: &[u32], size: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(size);
    fn rec(items: &[u32], size: usize, start: usize, current: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if current.len() == size {
            out.push(current.clone());
            return;
        }
        for i in start..items.len() {
            current.push(items[i]);
            rec(items, size, i + 1, current, out);
            current.pop();
        }
    }
    rec(items, size, 0, &mut current, &mut out);
    out
}

/// Triangulates the box by subdividing each lattice cube into `n!` simplices
/// along coordinate orderings, so neighboring cubes share faces.
///
/// Cells are emitted with positive orientation (odd orderings swap their
/// last two vertices).
pub fn kuhn_triangulation(spec: &LatticeSpec) -> Result<LatticeComplex> {
    let n = spec.dim;
    let steps = spec.steps();
    let h = spec.spacing();

    // vertex grid, lexicographic with the last axis fastest
    let counts: Vec<usize> = steps.iter().map(|s| s + 1).collect();
    let mut strides = vec![1usize; n];
    for i in (0..n.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * counts[i + 1];
    }
    let total_vertices: usize = counts.iter().product();
    if total_vertices > u32::MAX as usize {
        return Err(Error::Precondition("lattice too fine: vertex index overflow".into()));
    }
    let mut positions = Vec::with_capacity(total_vertices);
    let mut idx = vec![0usize; n];
    for _ in 0..total_vertices {
        let p = DVector::from_fn(n, |a, _| spec.lo[a] + idx[a] as f64 * h);
        positions.push(p);
        for a in (0..n).rev() {
            idx[a] += 1;
            if idx[a] <= steps[a] {
                break;
            }
            idx[a] = 0;
        }
    }

    let perms = permutations(n);
    let cube_count: usize = steps.iter().product();
    let mut cells_flat: Vec<u32> = Vec::with_capacity(cube_count * perms.len() * (n + 1));
    let mut corner = vec![0usize; n];
    for _ in 0..cube_count {
        let base: usize = (0..n).map(|a| corner[a] * strides[a]).sum();
        for perm in &perms {
            let mut cell = Vec::with_capacity(n + 1);
            let mut v = base;
            cell.push(v as u32);
            for &axis in perm {
                v += strides[axis];
                cell.push(v as u32);
            }
            if permutation_parity(perm) {
                let len = cell.len();
                cell.swap(len - 1, len - 2);
            }
            cells_flat.extend_from_slice(&cell);
        }
        for a in (0..n).rev() {
            corner[a] += 1;
            if corner[a] < steps[a] {
                break;
            }
            corner[a] = 0;
        }
    }

    LatticeComplex::from_parts(n, h, positions, cells_flat)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut items: Vec<usize> = (0..n).collect();
    fn rec(items: &mut Vec<usize>, depth: usize, out: &mut Vec<Vec<usize>>) {
        if depth == items.len() {
            out.push(items.clone());
            return;
        }
        for i in depth..items.len() {
            items.swap(depth, i);
            rec(items, depth + 1, out);
            items.swap(depth, i);
        }
    }
    rec(&mut items, 0, &mut out);
    out.sort_unstable();
    out
}

/// True for odd permutations.
fn permutation_parity(perm: &[usize]) -> bool {
    let mut seen = vec![false; perm.len()];
    let mut odd = false;
    for start in 0..perm.len() {
        if seen[start] {
            continue;
        }
        let mut len = 0;
        let mut i = start;
        while !seen[i] {
            seen[i] = true;
            i = perm[i];
            len += 1;
        }
        if len % 2 == 0 {
            odd = !odd;
        }
    }
    odd
}
