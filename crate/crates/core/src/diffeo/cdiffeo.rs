//! Compactly supported diffeomorphisms as composable closures: a forward
//! evaluator, an inverse evaluator, and a support box outside which the map
//! is the identity. No grid discretization: composition, inversion,
//! conjugation, and commutators stay exact at the closure level, so group
//! identities hold to evaluator tolerance.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geom::Point;

/// Shared evaluator type for the forward and inverse maps.
pub type MapFn = Arc<dyn Fn(&Point) -> Point + Send + Sync>;

/// Axis-aligned box bounding the support of a diffeomorphism.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportBox {
    pub lo: DVector<f64>,
    pub hi: DVector<f64>,
}

impl SupportBox {
    pub fn new(lo: DVector<f64>, hi: DVector<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::Dimension(format!(
                "box corners have lengths {} and {}",
                lo.len(),
                hi.len()
            )));
        }
        if lo.iter().zip(hi.iter()).any(|(a, b)| a > b) {
            return Err(Error::Precondition("box has a negative extent".into()));
        }
        Ok(SupportBox { lo, hi })
    }

    /// Ball bounding box: center +- radius in every coordinate.
    pub fn ball(center: &Point, radius: f64) -> Result<Self> {
        if radius <= 0.0 {
            return Err(Error::Precondition(format!("ball radius {radius} must be positive")));
        }
        Ok(SupportBox {
            lo: center.map(|c| c - radius),
            hi: center.map(|c| c + radius),
        })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.len() == self.dim()
            && p.iter()
                .zip(self.lo.iter().zip(self.hi.iter()))
                .all(|(x, (lo, hi))| *x >= *lo && *x <= *hi)
    }

    pub fn contains_box(&self, other: &SupportBox) -> bool {
        self.contains(&other.lo) && self.contains(&other.hi)
    }

    pub fn intersects(&self, other: &SupportBox) -> bool {
        self.lo
            .iter()
            .zip(self.hi.iter())
            .zip(other.lo.iter().zip(other.hi.iter()))
            .all(|((alo, ahi), (blo, bhi))| alo.max(*blo) <= ahi.min(*bhi))
    }

    pub fn union(&self, other: &SupportBox) -> SupportBox {
        SupportBox {
            lo: self.lo.zip_map(&other.lo, f64::min),
            hi: self.hi.zip_map(&other.hi, f64::max),
        }
    }

    pub fn pad(&self, margin: f64) -> SupportBox {
        SupportBox {
            lo: self.lo.map(|c| c - margin),
            hi: self.hi.map(|c| c + margin),
        }
    }

    pub fn center(&self) -> Point {
        (&self.lo + &self.hi) * 0.5
    }

    /// Union helper over optional boxes (`None` means empty support).
    pub fn union_opt(a: Option<&SupportBox>, b: Option<&SupportBox>) -> Option<SupportBox> {
        match (a, b) {
            (Some(x), Some(y)) => Some(x.union(y)),
            (Some(x), None) => Some(x.clone()),
            (None, Some(y)) => Some(y.clone()),
            (None, None) => None,
        }
    }
}

/// Deterministic uniform probe set inside a box.
pub fn probe_points(region: &SupportBox, n: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = region.dim();
    (0..n)
        .map(|_| {
            DVector::from_fn(dim, |i, _| {
                let (lo, hi) = (region.lo[i], region.hi[i]);
                if hi > lo {
                    rng.random_range(lo..hi)
                } else {
                    lo
                }
            })
        })
        .collect()
}

/// A diffeomorphism of Euclidean space carried as a forward/inverse closure
/// pair plus metadata: the dimension, the support box (None for the
/// identity), and the finite-difference step its Jacobian probes use.
#[derive(Clone)]
pub struct CDiffeo {
    dim: usize,
    forward: MapFn,
    inverse: MapFn,
    support: Option<SupportBox>,
    fd_step: f64,
}

impl std::fmt::Debug for CDiffeo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CDiffeo")
            .field("dim", &self.dim)
            .field("support", &self.support)
            .field("fd_step", &self.fd_step)
            .finish()
    }
}

/// Default step for finite-difference Jacobian probes.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

impl CDiffeo {
    pub fn identity(dim: usize) -> Self {
        let id: MapFn = Arc::new(|p: &Point| p.clone());
        CDiffeo { dim, forward: id.clone(), inverse: id, support: None, fd_step: DEFAULT_FD_STEP }
    }

    pub fn from_parts(dim: usize, forward: MapFn, inverse: MapFn, support: Option<SupportBox>) -> Self {
        CDiffeo { dim, forward, inverse, support, fd_step: DEFAULT_FD_STEP }
    }

    pub fn with_fd_step(mut self, step: f64) -> Self {
        self.fd_step = step;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn fd_step(&self) -> f64 {
        self.fd_step
    }

    pub fn support(&self) -> Option<&SupportBox> {
        self.support.as_ref()
    }

    pub fn apply(&self, p: &Point) -> Point {
        (self.forward)(p)
    }

    pub fn apply_inverse(&self, p: &Point) -> Point {
        (self.inverse)(p)
    }

    pub fn inverse(&self) -> CDiffeo {
        CDiffeo {
            dim: self.dim,
            forward: self.inverse.clone(),
            inverse: self.forward.clone(),
            support: self.support.clone(),
            fd_step: self.fd_step,
        }
    }

    /// outer after inner: (outer . inner)(x) = outer(inner(x)).
    pub fn compose(outer: &CDiffeo, inner: &CDiffeo) -> CDiffeo {
        let (of, inf) = (outer.forward.clone(), inner.forward.clone());
        let (oi, ini) = (outer.inverse.clone(), inner.inverse.clone());
        CDiffeo {
            dim: outer.dim,
            forward: Arc::new(move |p| of(&inf(p))),
            inverse: Arc::new(move |p| ini(&oi(p))),
            support: SupportBox::union_opt(outer.support(), inner.support()),
            fd_step: outer.fd_step.min(inner.fd_step),
        }
    }

    /// g a g^-1.
    pub fn conjugate(g: &CDiffeo, a: &CDiffeo) -> CDiffeo {
        CDiffeo::compose(&CDiffeo::compose(g, a), &g.inverse())
    }

    /// a b a^-1 b^-1.
    pub fn commutator(a: &CDiffeo, b: &CDiffeo) -> CDiffeo {
        CDiffeo::compose(
            &CDiffeo::compose(a, b),
            &CDiffeo::compose(&a.inverse(), &b.inverse()),
        )
    }

    /// Central-difference Jacobian of the forward map at a point.
    pub fn jacobian(&self, p: &Point, step: f64) -> DMatrix<f64> {
        let n = self.dim;
        let mut j = DMatrix::zeros(n, n);
        for col in 0..n {
            let mut plus = p.clone();
            let mut minus = p.clone();
            plus[col] += step;
            minus[col] -= step;
            let d = (self.apply(&plus) - self.apply(&minus)) / (2.0 * step);
            j.set_column(col, &d);
        }
        j
    }

    /// Jacobian of the displacement (map minus identity), Richardson-refined
    /// from two central-difference stencils.
    pub fn displacement_jacobian(&self, p: &Point) -> DMatrix<f64> {
        let coarse = self.jacobian(p, self.fd_step);
        let fine = self.jacobian(p, self.fd_step / 2.0);
        (fine * 4.0 - coarse) / 3.0 - DMatrix::identity(self.dim, self.dim)
    }

    /// Largest forward-then-inverse and inverse-then-forward deviation from
    /// the identity over a probe set.
    pub fn roundtrip_gap(&self, probes: &[Point]) -> f64 {
        probes.iter().fold(0.0f64, |worst, p| {
            let there = (self.apply_inverse(&self.apply(p)) - p).amax();
            let back = (self.apply(&self.apply_inverse(p)) - p).amax();
            worst.max(there).max(back)
        })
    }

    /// Largest pointwise difference between two maps over a probe set.
    pub fn discrepancy(a: &CDiffeo, b: &CDiffeo, probes: &[Point]) -> f64 {
        probes
            .iter()
            .fold(0.0f64, |worst, p| worst.max((a.apply(p) - b.apply(p)).amax()))
    }

    /// Largest deviation from the identity over a probe set.
    pub fn identity_gap(&self, probes: &[Point]) -> f64 {
        probes
            .iter()
            .fold(0.0f64, |worst, p| worst.max((self.apply(p) - p).amax()))
    }
}
