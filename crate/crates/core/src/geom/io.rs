use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::Point;
use crate::error::{Error, Result};

/// One stored sample: base point, plane frame, and 2-form matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub x: Point,
    /// n-by-k frame, columns spanning the plane.
    pub frame: DMatrix<f64>,
    /// n-by-n antisymmetric coefficient matrix.
    pub omega: DMatrix<f64>,
}

/// Serializes samples as text: a `n k` header line, then one line per
/// sample with `|`-separated groups (point, frame rows, form rows).
///
/// Floats are printed with 17 significant digits, so reading the file back
/// reproduces the samples bit for bit.
pub fn write_field_samples(path: &Path, samples: &[FieldSample]) -> Result<()> {
    let mut out = String::new();
    if let Some(first) = samples.first() {
        writeln!(out, "{} {}", first.x.len(), first.frame.ncols()).expect("string write");
    } else {
        writeln!(out, "0 0").expect("string write");
    }
    for s in samples {
        let mut groups: Vec<String> = Vec::with_capacity(3);
        groups.push(join_floats(s.x.iter()));
        groups.push(join_floats(row_major(&s.frame).iter()));
        groups.push(join_floats(row_major(&s.omega).iter()));
        writeln!(out, "{}", groups.join(" | ")).expect("string write");
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_field_samples(path: &Path) -> Result<Vec<FieldSample>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty sample file".into()))?;
    let mut dims = header.split_whitespace();
    let n: usize = parse_token(dims.next(), "sample dim")?;
    let k: usize = parse_token(dims.next(), "sample rank")?;
    let mut samples = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let groups: Vec<&str> = line.split('|').collect();
        if groups.len() != 3 {
            return Err(Error::Parse(format!(
                "sample line {}: expected 3 `|` groups, found {}",
                lineno + 2,
                groups.len()
            )));
        }
        let x = parse_floats(groups[0])?;
        let frame_flat = parse_floats(groups[1])?;
        let omega_flat = parse_floats(groups[2])?;
        if x.len() != n || frame_flat.len() != n * k || omega_flat.len() != n * n {
            return Err(Error::Parse(format!(
                "sample line {}: group sizes {}/{}/{} do not match header {}x{}",
                lineno + 2,
                x.len(),
                frame_flat.len(),
                omega_flat.len(),
                n,
                k
            )));
        }
        samples.push(FieldSample {
            x: DVector::from_vec(x),
            frame: DMatrix::from_row_slice(n, k, &frame_flat),
            omega: DMatrix::from_row_slice(n, n, &omega_flat),
        });
    }
    Ok(samples)
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            out.push(m[(r, c)]);
        }
    }
    out
}

pub(crate) fn join_floats<'a>(vals: impl Iterator<Item = &'a f64>) -> String {
    vals.map(|v| format!("{v:.16e}")).collect::<Vec<_>>().join(" ")
}

pub(crate) fn parse_floats(group: &str) -> Result<Vec<f64>> {
    group
        .split_whitespace()
        .map(|tok| tok.parse::<f64>().map_err(|e| Error::Parse(format!("float `{tok}`: {e}"))))
        .collect()
}

pub(crate) fn parse_token<T: std::str::FromStr>(tok: Option<&str>, what: &str) -> Result<T> {
    tok.ok_or_else(|| Error::Parse(format!("missing {what}")))?
        .parse::<T>()
        .map_err(|_| Error::Parse(format!("bad {what}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn samples_round_trip_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 4;
        let k = 2;
        let samples: Vec<FieldSample> = (0..7)
            .map(|_| {
                let x = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
                let frame = DMatrix::from_fn(n, k, |_, _| rng.random_range(-1.0..1.0));
                let raw = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
                let omega = &raw - raw.transpose();
                FieldSample { x, frame, omega }
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("samples.txt");
        write_field_samples(&path, &samples).unwrap();
        let back = read_field_samples(&path).unwrap();
        assert_eq!(samples.len(), back.len());
        for (a, b) in samples.iter().zip(&back) {
            assert_eq!(a.x, b.x);
            assert_eq!(a.frame, b.frame);
            assert_eq!(a.omega, b.omega);
        }
    }

    #[test]
    fn malformed_group_count_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.txt");
        std::fs::write(&path, "4 2\n1 2 3 4 | 0 0\n").unwrap();
        assert!(read_field_samples(&path).is_err());
    }
}
