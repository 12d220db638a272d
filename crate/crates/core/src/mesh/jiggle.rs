use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geom::Point;

use super::lattice::LatticeComplex;

/// Largest allowed displacement radius as a fraction of the lattice spacing.
/// Below this bound every displaced cell stays embedded and the combinatorics
/// of the complex cannot change.
pub const JIGGLE_GUARD_FRACTION: f64 = 0.3;

/// Max rounds of redrawing vertices of degenerate cells before giving up.
const MAX_REPAIR_ROUNDS: usize = 100;

/// A vertex displacement bounded by `eps`, applicable to a complex.
#[derive(Debug, Clone, PartialEq)]
pub struct Jiggling {
    pub eps: f64,
    pub seed: u64,
    pub offsets: Vec<Point>,
}

impl Jiggling {
    /// Positions of the displaced complex.
    pub fn displaced(&self, complex: &LatticeComplex) -> Vec<Point> {
        complex
            .positions
            .iter()
            .zip(&self.offsets)
            .map(|(p, d)| p + d)
            .collect()
    }

    /// The displaced complex itself (same combinatorics).
    pub fn apply(&self, complex: &LatticeComplex) -> LatticeComplex {
        complex.with_positions(self.displaced(complex))
    }

    pub fn max_offset(&self) -> f64 {
        self.offsets
            .iter()
            .map(|d| d.norm())
            .fold(0.0, f64::max)
    }
}

/// Draws a uniform point in the open ball of radius `eps`.
fn ball_sample(rng: &mut ChaCha8Rng, dim: usize, eps: f64) -> Point {
    if eps == 0.0 {
        return DVector::zeros(dim);
    }
    loop {
        let v = DVector::from_fn(dim, |_, _| rng.random_range(-eps..eps));
        let r = v.norm();
        if r < eps {
            return v;
        }
    }
}

/// Displaces every vertex independently and uniformly within the open
/// `eps`-ball, redrawing the vertices of any cell whose displaced volume is
/// not positive. `eps = 0` returns the zero displacement.
///
/// Requires `eps < 0.3 * spacing`; beyond that bound a displacement can
/// collapse a cell no matter how often it is redrawn.
pub fn jiggle(complex: &LatticeComplex, eps: f64, seed: u64) -> Result<Jiggling> {
    if eps < 0.0 {
        return Err(Error::Precondition("displacement radius must be nonnegative".into()));
    }
    if eps >= JIGGLE_GUARD_FRACTION * complex.spacing {
        return Err(Error::Jiggle(format!(
            "radius {eps} exceeds the guard bound {} (0.3 of spacing {})",
            JIGGLE_GUARD_FRACTION * complex.spacing,
            complex.spacing
        )));
    }
    let n = complex.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut offsets: Vec<Point> = (0..complex.vertex_count())
        .map(|_| ball_sample(&mut rng, n, eps))
        .collect();
    if eps == 0.0 {
        return Ok(Jiggling { eps, seed, offsets });
    }

    let cofaces = complex.vertex_cofaces();
    let mut round = 0;
    loop {
        let moved = complex.with_positions(
            complex
                .positions
                .iter()
                .zip(&offsets)
                .map(|(p, d)| p + d)
                .collect(),
        );
        let mut bad_vertices: Vec<u32> = Vec::new();
        for c in 0..moved.cell_count() {
            if moved.signed_volume(c) <= 0.0 {
                bad_vertices.extend_from_slice(moved.cell(c));
            }
        }
        if bad_vertices.is_empty() {
            return Ok(Jiggling { eps, seed, offsets });
        }
        round += 1;
        if round > MAX_REPAIR_ROUNDS {
            return Err(Error::Jiggle(format!(
                "failed to repair degenerate cells after {MAX_REPAIR_ROUNDS} rounds"
            )));
        }
        bad_vertices.sort_unstable();
        bad_vertices.dedup();
        let _ = &cofaces;
        for vi in bad_vertices {
            offsets[vi as usize] = ball_sample(&mut rng, n, eps);
        }
    }
}
