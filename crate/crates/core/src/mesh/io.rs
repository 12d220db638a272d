use std::fs;
use std::path::Path;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::geom::{join_floats, parse_floats, parse_token};
use crate::geom::Point;

use super::jiggle::Jiggling;
use super::lattice::LatticeComplex;

/// Writes a complex as text: `DIM n`, `VERTS m` with m coordinate rows, then
/// `CELLS c` with c rows of n+1 vertex indices. Coordinates keep full
/// precision (17 significant digits round-trip exactly).
pub fn write_mesh(path: &Path, complex: &LatticeComplex) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("DIM {}\n", complex.dim));
    out.push_str(&format!("VERTS {}\n", complex.vertex_count()));
    for p in &complex.positions {
        out.push_str(&join_floats(p.iter()));
        out.push('\n');
    }
    out.push_str(&format!("CELLS {}\n", complex.cell_count()));
    for c in 0..complex.cell_count() {
        let row: Vec<String> = complex.cell(c).iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a complex written by `write_mesh`. The lattice spacing is not part
/// of the format; it is recovered as the shortest cell edge, which matches
/// the original spacing for unjiggled lattices and is conservative (smaller)
/// for displaced ones, so downstream jiggle guards only get stricter.
pub fn read_mesh(path: &Path) -> Result<LatticeComplex> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());

    let dim: usize = expect_tagged(lines.next(), "DIM")?;
    let verts: usize = expect_tagged(lines.next(), "VERTS")?;
    let mut positions: Vec<Point> = Vec::with_capacity(verts);
    for i in 0..verts {
        let row = parse_floats(lines.next().ok_or_else(|| truncated("vertex", i))?)?;
        if row.len() != dim {
            return Err(Error::Parse(format!("vertex {i}: expected {dim} coordinates")));
        }
        positions.push(DVector::from_vec(row));
    }

    let cells: usize = expect_tagged(lines.next(), "CELLS")?;
    let mut cells_flat: Vec<u32> = Vec::with_capacity(cells * (dim + 1));
    for i in 0..cells {
        let line = lines.next().ok_or_else(|| truncated("cell", i))?;
        let row: Vec<u32> = line
            .split_whitespace()
            .map(|tok| parse_token(Some(tok), "vertex index"))
            .collect::<Result<_>>()?;
        if row.len() != dim + 1 {
            return Err(Error::Parse(format!("cell {i}: expected {} indices", dim + 1)));
        }
        for &v in &row {
            if v as usize >= verts {
                return Err(Error::Parse(format!("cell {i}: vertex index {v} out of range")));
            }
        }
        cells_flat.extend_from_slice(&row);
    }

    let mut spacing = f64::INFINITY;
    for c in 0..cells {
        let cell = &cells_flat[c * (dim + 1)..(c + 1) * (dim + 1)];
        for i in 0..cell.len() {
            for j in (i + 1)..cell.len() {
                let d = (&positions[cell[i] as usize] - &positions[cell[j] as usize]).norm();
                spacing = spacing.min(d);
            }
        }
    }
    if !spacing.is_finite() {
        spacing = 0.0;
    }
    LatticeComplex::from_parts(dim, spacing, positions, cells_flat)
}

/// Writes a jiggling as text: `EPS`, `SEED`, `DIM`, `OFFSETS m`, then m rows
/// of vertex index plus displacement coordinates.
pub fn write_jiggling(path: &Path, jiggling: &Jiggling) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("EPS {}\n", format_float(jiggling.eps)));
    out.push_str(&format!("SEED {}\n", jiggling.seed));
    let dim = jiggling.offsets.first().map_or(0, |d| d.nrows());
    out.push_str(&format!("DIM {dim}\n"));
    out.push_str(&format!("OFFSETS {}\n", jiggling.offsets.len()));
    for (i, d) in jiggling.offsets.iter().enumerate() {
        out.push_str(&format!("{i} {}\n", join_floats(d.iter())));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a jiggling written by `write_jiggling`.
pub fn read_jiggling(path: &Path) -> Result<Jiggling> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());

    let eps: f64 = expect_tagged(lines.next(), "EPS")?;
    let seed: u64 = expect_tagged(lines.next(), "SEED")?;
    let dim: usize = expect_tagged(lines.next(), "DIM")?;
    let count: usize = expect_tagged(lines.next(), "OFFSETS")?;
    let mut offsets: Vec<Point> = Vec::with_capacity(count);
    for i in 0..count {
        let line = lines.next().ok_or_else(|| truncated("offset", i))?;
        let mut toks = line.split_whitespace();
        let idx: usize = parse_token(toks.next(), "offset row index")?;
        if idx != i {
            return Err(Error::Parse(format!("offset rows out of order: {idx} at row {i}")));
        }
        let rest: Vec<f64> = toks
            .map(|tok| parse_token(Some(tok), "offset coordinate"))
            .collect::<Result<_>>()?;
        if rest.len() != dim {
            return Err(Error::Parse(format!("offset {i}: expected {dim} coordinates")));
        }
        offsets.push(DVector::from_vec(rest));
    }
    Ok(Jiggling { eps, seed, offsets })
}

fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn expect_tagged<T: std::str::FromStr>(line: Option<&str>, tag: &str) -> Result<T> {
    let line = line.ok_or_else(|| Error::Parse(format!("missing `{tag}` line")))?;
    let mut toks = line.split_whitespace();
    match toks.next() {
        Some(t) if t == tag => {}
        other => return Err(Error::Parse(format!("expected `{tag}`, found {other:?}"))),
    }
    parse_token(toks.next(), tag)
}

fn truncated(what: &str, i: usize) -> Error {
    Error::Parse(format!("file truncated at {what} {i}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::jiggle::jiggle;
    use crate::mesh::lattice::{kuhn_triangulation, LatticeSpec};
    use tempfile::tempdir;

    #[test]
    fn mesh_round_trips_exactly() {
        let spec = LatticeSpec::new(3, 2, vec![-0.5; 3], vec![1.0; 3]).unwrap();
        let complex = kuhn_triangulation(&spec).unwrap();
        let dir = tempdir().unwrap();
        let path = dir.path().join("mesh.txt");
        write_mesh(&path, &complex).unwrap();
        let back = read_mesh(&path).unwrap();
        // unjiggled lattices recover the exact spacing, so the whole value
        // round-trips bit for bit
        assert_eq!(back, complex);
    }

    #[test]
    fn displaced_mesh_round_trips_positions_and_cells() {
        let spec = LatticeSpec::new(2, 2, vec![0.0; 2], vec![1.0; 2]).unwrap();
        let base = kuhn_triangulation(&spec).unwrap();
        let moved = jiggle(&base, 0.1, 3).unwrap().apply(&base);
        let dir = tempdir().unwrap();
        let path = dir.path().join("mesh.txt");
        write_mesh(&path, &moved).unwrap();
        let back = read_mesh(&path).unwrap();
        assert_eq!(back.positions, moved.positions);
        assert_eq!(back.cells_flat(), moved.cells_flat());
        assert!(back.spacing <= moved.spacing + 1e-12);
    }

    #[test]
    fn jiggling_round_trips_exactly() {
        let spec = LatticeSpec::new(4, 1, vec![0.0; 4], vec![1.0; 4]).unwrap();
        let base = kuhn_triangulation(&spec).unwrap();
        let jiggling = jiggle(&base, 0.25, 17).unwrap();
        let dir = tempdir().unwrap();
        let path = dir.path().join("jiggle.txt");
        write_jiggling(&path, &jiggling).unwrap();
        let back = read_jiggling(&path).unwrap();
        assert_eq!(back, jiggling);
    }

    #[test]
    fn rejects_out_of_range_cell_indices() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("mesh.txt");
        std::fs::write(&path, "DIM 2\nVERTS 2\n0 0\n1 1\nCELLS 1\n0 1 5\n").unwrap();
        assert!(read_mesh(&path).is_err());
    }
}
