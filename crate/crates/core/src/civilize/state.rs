//! Civilization progress as an explicit state, plus a text checkpoint
//! format.
//!
//! The pair field is built from closures, so a checkpoint cannot store it
//! directly. Instead it stores what determines the state: the mesh, the
//! radii actually used per level, and a label naming the starting pair
//! (resolved by the caller). Restoring replays the deformation from those
//! ingredients, then proves the replay matches by comparing stored pair
//! samples bit for bit.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geom::{join_floats, parse_floats, parse_token, FieldSample, PairedDistribution};
use crate::mesh::{read_mesh, write_mesh, LatticeComplex};

use super::fiber::SimplexGeometry;
use super::step::civilize_level_with_radii;

/// Default ratio of the outer tube radius to the inner (constancy) radius.
pub const DEFAULT_OUTER_RATIO: f64 = 2.0;

/// How many simplices per level contribute verification records to a
/// checkpoint.
const RECORD_SIMPLICES_PER_LEVEL: usize = 6;

/// Embedding-check sampling used during checkpoint replay; the radii were
/// already validated when the state was first built, so a light pass
/// suffices.
const REPLAY_EMBED_DEPTH: usize = 1;
const REPLAY_EMBED_DIRECTIONS: usize = 2;

/// A pair of fields over a triangulated region, deformed up to some
/// skeleton dimension, together with the tube radii that did it.
#[derive(Clone)]
pub struct SkeletonState {
    pub complex: LatticeComplex,
    /// Highest simplex dimension whose tubes have been deformed; -1 before
    /// any level.
    pub skeleton: i32,
    /// Inner tube radius used per level, strictly decreasing.
    pub deltas: Vec<f64>,
    /// Complement radius used per level, strictly decreasing.
    pub etas: Vec<f64>,
    pub pair: PairedDistribution,
    /// Outer tube radius as a multiple of the inner, shared by all levels.
    pub outer_ratio: f64,
}

impl SkeletonState {
    /// Fresh state: nothing deformed yet, radii unset (treated as infinite
    /// by the shrink checks).
    pub fn start(complex: LatticeComplex, pair: PairedDistribution) -> Result<Self> {
        Self::start_with_ratio(complex, pair, DEFAULT_OUTER_RATIO)
    }

    pub fn start_with_ratio(
        complex: LatticeComplex,
        pair: PairedDistribution,
        outer_ratio: f64,
    ) -> Result<Self> {
        if pair.dim() != complex.dim {
            return Err(Error::Dimension(format!(
                "pair lives in R^{} but the complex in R^{}",
                pair.dim(),
                complex.dim
            )));
        }
        if !(outer_ratio > 1.0) {
            return Err(Error::Precondition(format!(
                "outer tube ratio must exceed 1, got {outer_ratio}"
            )));
        }
        Ok(Self { complex, skeleton: -1, deltas: Vec::new(), etas: Vec::new(), pair, outer_ratio })
    }

    /// Number of levels already deformed.
    pub fn level_count(&self) -> usize {
        (self.skeleton + 1) as usize
    }

    /// Inner radius of the most recent level; infinite before any level,
    /// so first-level radii pass the shrink check unconditionally.
    pub fn last_delta(&self) -> f64 {
        self.deltas.last().copied().unwrap_or(f64::INFINITY)
    }

    pub fn last_eta(&self) -> f64 {
        self.etas.last().copied().unwrap_or(f64::INFINITY)
    }
}

/// One stored verification record: a probe point near one simplex's tube
/// with the pair values the state reported there.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberRecord {
    pub level: usize,
    pub vertices: Vec<u32>,
    /// Affine coordinates of the record's base point on the simplex.
    pub affine: Vec<f64>,
    pub sample: FieldSample,
}

/// Parsed checkpoint: everything needed to rebuild a state given the
/// starting pair, plus the verification records proving the rebuild.
#[derive(Debug, Clone)]
pub struct StateCheckpoint {
    pub dim: usize,
    pub skeleton: i32,
    pub outer_ratio: f64,
    /// Mesh file, resolved relative to the checkpoint's directory.
    pub mesh_path: PathBuf,
    /// Free-form one-line label naming the starting pair; the caller maps
    /// it back to an actual field (for example through a preset registry).
    pub preset: String,
    pub deltas: Vec<f64>,
    pub etas: Vec<f64>,
    pub records: Vec<FiberRecord>,
}

/// Writes the state to `path` and its mesh to `mesh_name` in the same
/// directory. `preset` is the label a reader will use to reconstruct the
/// starting pair.
pub fn write_state(
    path: &Path,
    state: &SkeletonState,
    mesh_name: &str,
    preset: &str,
) -> Result<()> {
    if preset.trim().is_empty() || preset.contains('\n') {
        return Err(Error::Precondition(
            "the preset label must be a single nonempty line".into(),
        ));
    }
    if mesh_name.contains(char::is_whitespace) || mesh_name.is_empty() {
        return Err(Error::Precondition(format!(
            "mesh file name must be nonempty without spaces, got `{mesh_name}`"
        )));
    }
    let dir = checkpoint_dir(path);
    write_mesh(&dir.join(mesh_name), &state.complex)?;
    let records = probe_records(state)?;

    let mut out = String::new();
    writeln!(out, "LEAFSTATE 1").expect("string write");
    writeln!(out, "DIM {}", state.complex.dim).expect("string write");
    writeln!(out, "SKELETON {}", state.skeleton).expect("string write");
    writeln!(out, "OUTER {:.16e}", state.outer_ratio).expect("string write");
    writeln!(out, "MESH {mesh_name}").expect("string write");
    writeln!(out, "PRESET {}", preset.trim()).expect("string write");
    writeln!(out, "DELTAS {}", join_floats(state.deltas.iter())).expect("string write");
    writeln!(out, "ETAS {}", join_floats(state.etas.iter())).expect("string write");
    writeln!(out, "RECORDS {}", records.len()).expect("string write");
    for r in &records {
        let ids: Vec<String> = r.vertices.iter().map(u32::to_string).collect();
        let groups = [
            format!("{} {}", r.level, ids.join(" ")),
            join_floats(r.affine.iter()),
            join_floats(r.sample.x.iter()),
            join_floats(row_major(&r.sample.frame).iter()),
            join_floats(row_major(&r.sample.omega).iter()),
        ];
        writeln!(out, "{}", groups.join(" | ")).expect("string write");
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads a checkpoint written by [`write_state`]. The mesh is not loaded
/// here; [`restore_state`] does that as part of the replay.
pub fn read_state(path: &Path) -> Result<StateCheckpoint> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());

    let version: u32 = tagged(lines.next(), "LEAFSTATE")?;
    if version != 1 {
        return Err(Error::Parse(format!("unsupported checkpoint version {version}")));
    }
    let dim: usize = tagged(lines.next(), "DIM")?;
    let skeleton: i32 = tagged(lines.next(), "SKELETON")?;
    let outer_ratio: f64 = tagged(lines.next(), "OUTER")?;
    let mesh_name: String = tagged(lines.next(), "MESH")?;
    let preset = tagged_rest(lines.next(), "PRESET")?;
    let deltas = tagged_floats(lines.next(), "DELTAS")?;
    let etas = tagged_floats(lines.next(), "ETAS")?;
    let count: usize = tagged(lines.next(), "RECORDS")?;

    if dim == 0 {
        return Err(Error::Parse("checkpoint dimension must be positive".into()));
    }
    if skeleton < -1 || skeleton >= dim as i32 {
        return Err(Error::Parse(format!(
            "skeleton {skeleton} out of range for dimension {dim}"
        )));
    }
    let levels = (skeleton + 1) as usize;
    if deltas.len() != levels || etas.len() != levels {
        return Err(Error::Parse(format!(
            "expected {levels} radii per array, got {} deltas and {} etas",
            deltas.len(),
            etas.len()
        )));
    }
    for p in 0..levels {
        if !(deltas[p] > 0.0 && etas[p] > 0.0) {
            return Err(Error::Parse(format!("level {p} radii must be positive")));
        }
        if p > 0 && !(deltas[p] < deltas[p - 1] && etas[p] < etas[p - 1]) {
            return Err(Error::Parse(format!("level {p} radii do not shrink")));
        }
    }
    if !(outer_ratio > 1.0) {
        return Err(Error::Parse(format!("outer ratio {outer_ratio} must exceed 1")));
    }

    let mut records = Vec::with_capacity(count);
    for i in 0..count {
        let line = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("checkpoint truncated at record {i}")))?;
        let groups: Vec<&str> = line.split('|').collect();
        if groups.len() != 5 {
            return Err(Error::Parse(format!(
                "record {i}: expected 5 `|` groups, found {}",
                groups.len()
            )));
        }
        let mut head = groups[0].split_whitespace();
        let level: usize = parse_token(head.next(), "record level")?;
        let vertices: Vec<u32> = head
            .map(|tok| parse_token(Some(tok), "record vertex index"))
            .collect::<Result<_>>()?;
        if level >= levels {
            return Err(Error::Parse(format!(
                "record {i}: level {level} beyond skeleton {skeleton}"
            )));
        }
        if vertices.len() != level + 1 {
            return Err(Error::Parse(format!(
                "record {i}: {} vertices for a {level}-simplex",
                vertices.len()
            )));
        }
        let affine = parse_floats(groups[1])?;
        let x = parse_floats(groups[2])?;
        let frame_flat = parse_floats(groups[3])?;
        let omega_flat = parse_floats(groups[4])?;
        if affine.len() != level || x.len() != dim {
            return Err(Error::Parse(format!("record {i}: coordinate sizes do not match")));
        }
        if frame_flat.len() % dim != 0 || omega_flat.len() != dim * dim {
            return Err(Error::Parse(format!("record {i}: matrix sizes do not match")));
        }
        let rank = frame_flat.len() / dim;
        records.push(FiberRecord {
            level,
            vertices,
            affine,
            sample: FieldSample {
                x: DVector::from_vec(x),
                frame: DMatrix::from_row_slice(dim, rank, &frame_flat),
                omega: DMatrix::from_row_slice(dim, dim, &omega_flat),
            },
        });
    }

    Ok(StateCheckpoint {
        dim,
        skeleton,
        outer_ratio,
        mesh_path: checkpoint_dir(path).join(mesh_name),
        preset,
        deltas,
        etas,
        records,
    })
}

/// Rebuilds the state a checkpoint describes: reads the mesh, replays the
/// deformation level by level with the recorded radii, then verifies every
/// stored record against the replayed pair, bit for bit. A mismatch means
/// the caller resolved the preset to a different starting pair than the
/// writer used (or the file was edited), and is an error.
pub fn restore_state(
    checkpoint: &StateCheckpoint,
    base_pair: PairedDistribution,
) -> Result<SkeletonState> {
    let complex = read_mesh(&checkpoint.mesh_path)?;
    if complex.dim != checkpoint.dim {
        return Err(Error::Parse(format!(
            "mesh dimension {} does not match checkpoint dimension {}",
            complex.dim, checkpoint.dim
        )));
    }
    let mut state =
        SkeletonState::start_with_ratio(complex, base_pair, checkpoint.outer_ratio)?;
    for p in 0..(checkpoint.skeleton + 1) as usize {
        state = civilize_level_with_radii(
            &state,
            p,
            checkpoint.deltas[p],
            checkpoint.etas[p],
            REPLAY_EMBED_DEPTH,
            REPLAY_EMBED_DIRECTIONS,
        )?;
    }
    for (i, r) in checkpoint.records.iter().enumerate() {
        let s = state.pair.sample(&r.sample.x)?;
        let frame_dev = (&s.tau.frame - &r.sample.frame).amax();
        let omega_dev = (&s.omega - &r.sample.omega).amax();
        if frame_dev != 0.0 || omega_dev != 0.0 {
            return Err(Error::Precondition(format!(
                "checkpoint record {i} does not match the replayed state \
                 (frame deviation {frame_dev:.3e}, form deviation {omega_dev:.3e}); \
                 the starting pair differs from the one the checkpoint was written with"
            )));
        }
    }
    Ok(state)
}

/// Deterministic verification probes: per level, for the first few
/// simplices, the pair is sampled at the barycenter, at an inner-tube
/// offset, and outside the tube.
fn probe_records(state: &SkeletonState) -> Result<Vec<FiberRecord>> {
    let n = state.complex.dim;
    let diag = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut records = Vec::new();
    for p in 0..state.level_count() {
        let simplices = state.complex.faces_of_dim(p);
        let delta = state.deltas[p];
        for verts in simplices.iter().take(RECORD_SIMPLICES_PER_LEVEL) {
            let sigma = SimplexGeometry::from_complex(&state.complex, verts)?;
            let bary = DVector::from_element(p, 1.0 / (p as f64 + 1.0));
            let base = sigma.point(&bary);
            for off in [0.0, delta / 2.0, 2.0 * state.outer_ratio * delta] {
                let x = &base + &diag * off;
                let s = state.pair.sample(&x)?;
                records.push(FiberRecord {
                    level: p,
                    vertices: verts.clone(),
                    affine: bary.iter().copied().collect(),
                    sample: FieldSample { x, frame: s.tau.frame, omega: s.omega },
                });
            }
        }
    }
    Ok(records)
}

fn checkpoint_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
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

fn tagged<T: std::str::FromStr>(line: Option<&str>, tag: &str) -> Result<T> {
    let line = line.ok_or_else(|| Error::Parse(format!("missing `{tag}` line")))?;
    let mut toks = line.split_whitespace();
    match toks.next() {
        Some(t) if t == tag => {}
        other => return Err(Error::Parse(format!("expected `{tag}`, found {other:?}"))),
    }
    parse_token(toks.next(), tag)
}

/// Like [`tagged`] but keeps the whole rest of the line (labels may contain
/// spaces).
fn tagged_rest(line: Option<&str>, tag: &str) -> Result<String> {
    let line = line.ok_or_else(|| Error::Parse(format!("missing `{tag}` line")))?;
    let rest = line
        .strip_prefix(tag)
        .ok_or_else(|| Error::Parse(format!("expected `{tag}`, found `{line}`")))?
        .trim();
    if rest.is_empty() {
        return Err(Error::Parse(format!("`{tag}` line has no value")));
    }
    Ok(rest.to_string())
}

fn tagged_floats(line: Option<&str>, tag: &str) -> Result<Vec<f64>> {
    let line = line.ok_or_else(|| Error::Parse(format!("missing `{tag}` line")))?;
    let rest = line
        .strip_prefix(tag)
        .ok_or_else(|| Error::Parse(format!("expected `{tag}`, found `{line}`")))?;
    parse_floats(rest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::civilize::{civilize_skeleton, CivilizeOptions};
    use crate::geom::{PlaneField, Point, Smoothness, TwoFormField};
    use crate::mesh::{kuhn_triangulation, LatticeSpec};
    use nalgebra::dmatrix;
    use tempfile::tempdir;

    fn demo_pair(rate: f64) -> PairedDistribution {
        let tau = PlaneField::new(3, 2, Smoothness::Analytic, move |x: &Point| {
            dmatrix![
                1.0, 0.0;
                0.0, 1.0;
                0.25 + rate * x[2], -0.2 + rate * x[0];
            ]
        });
        let omega = TwoFormField::new(3, |_x| {
            let mut m = DMatrix::zeros(3, 3);
            m[(0, 1)] = 1.0;
            m[(1, 0)] = -1.0;
            m
        });
        PairedDistribution::new(tau, omega).unwrap()
    }

    fn civilized_state(rate: f64, levels: usize) -> SkeletonState {
        let spec = LatticeSpec::new(3, 1, vec![0.0; 3], vec![1.0; 3]).unwrap();
        let complex = kuhn_triangulation(&spec).unwrap();
        let mut state = SkeletonState::start(complex, demo_pair(rate)).unwrap();
        for p in 0..levels {
            state = civilize_skeleton(&state, p, &CivilizeOptions::default()).unwrap();
        }
        state
    }

    #[test]
    fn checkpoint_round_trips_and_replays() {
        let state = civilized_state(0.15, 2);
        let dir = tempdir().unwrap();
        let path = dir.path().join("level1.state");
        write_state(&path, &state, "level1.mesh", "demo rate=0.15").unwrap();

        let checkpoint = read_state(&path).unwrap();
        assert_eq!(checkpoint.dim, 3);
        assert_eq!(checkpoint.skeleton, 1);
        assert_eq!(checkpoint.preset, "demo rate=0.15");
        assert_eq!(checkpoint.deltas, state.deltas);
        assert_eq!(checkpoint.etas, state.etas);
        assert!(!checkpoint.records.is_empty());

        let restored = restore_state(&checkpoint, demo_pair(0.15)).unwrap();
        assert_eq!(restored.skeleton, 1);
        assert_eq!(restored.deltas, state.deltas);
        // The replayed pair matches the original everywhere, including
        // inside tubes, bit for bit.
        for i in 0..8 {
            let t = i as f64 / 7.0;
            let y = nalgebra::DVector::from_vec(vec![t, 0.2 + 0.6 * t, 1.0 - t]);
            let a = state.pair.sample(&y).unwrap();
            let b = restored.pair.sample(&y).unwrap();
            assert_eq!(a.tau.frame, b.tau.frame);
            assert_eq!(a.omega, b.omega);
        }
    }

    #[test]
    fn fresh_state_round_trips() {
        let state = civilized_state(0.1, 0);
        let dir = tempdir().unwrap();
        let path = dir.path().join("fresh.state");
        write_state(&path, &state, "fresh.mesh", "demo rate=0.1").unwrap();
        let checkpoint = read_state(&path).unwrap();
        assert_eq!(checkpoint.skeleton, -1);
        assert!(checkpoint.records.is_empty());
        let restored = restore_state(&checkpoint, demo_pair(0.1)).unwrap();
        assert_eq!(restored.skeleton, -1);
        assert_eq!(restored.level_count(), 0);
    }

    #[test]
    fn wrong_starting_pair_is_rejected() {
        let state = civilized_state(0.15, 1);
        let dir = tempdir().unwrap();
        let path = dir.path().join("level0.state");
        write_state(&path, &state, "level0.mesh", "demo rate=0.15").unwrap();
        let checkpoint = read_state(&path).unwrap();
        match restore_state(&checkpoint, demo_pair(0.3)) {
            Err(Error::Precondition(msg)) => assert!(msg.contains("does not match")),
            Err(other) => panic!("unexpected error {other}"),
            Ok(_) => panic!("mismatched pair was accepted"),
        }
    }

    #[test]
    fn malformed_checkpoints_are_reported() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.state");

        // Missing OUTER line.
        std::fs::write(&path, "LEAFSTATE 1\nDIM 3\nSKELETON 0\nMESH m\n").unwrap();
        assert!(matches!(read_state(&path), Err(Error::Parse(_))));

        // Radii that fail to shrink.
        std::fs::write(
            &path,
            "LEAFSTATE 1\nDIM 3\nSKELETON 1\nOUTER 2.0\nMESH m\nPRESET p\n\
             DELTAS 0.1 0.1\nETAS 0.01 0.001\nRECORDS 0\n",
        )
        .unwrap();
        assert!(matches!(read_state(&path), Err(Error::Parse(_))));

        // Record with a level beyond the skeleton.
        std::fs::write(
            &path,
            "LEAFSTATE 1\nDIM 2\nSKELETON 0\nOUTER 2.0\nMESH m\nPRESET p\n\
             DELTAS 0.1\nETAS 0.01\nRECORDS 1\n\
             1 0 1 | 0.5 | 0 0 | 1 0 0 1 | 0 1 -1 0\n",
        )
        .unwrap();
        assert!(matches!(read_state(&path), Err(Error::Parse(_))));
    }
}
