use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::frame::{grassmann_distance, PlaneFieldSample};
use super::{Point, ANTISYMMETRY_TOL};
use crate::error::{Error, Result};

/// Declared regularity of a field evaluator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smoothness {
    Analytic,
    GridInterpolated,
}

type FrameFn = dyn Fn(&Point) -> DMatrix<f64> + Send + Sync;
type MatrixFn = dyn Fn(&Point) -> DMatrix<f64> + Send + Sync;

/// A field of k-planes on `R^n`, sampled through a closure.
///
/// The evaluator returns spanning columns; sampling orthonormalizes them, so
/// a `PlaneFieldSample` obtained here always satisfies the Gram identity.
#[derive(Clone)]
pub struct PlaneField {
    pub dim: usize,
    pub rank: usize,
    pub smoothness: Smoothness,
    eval: Arc<FrameFn>,
}

impl PlaneField {
    pub fn new<F>(dim: usize, rank: usize, smoothness: Smoothness, eval: F) -> Self
    where
        F: Fn(&Point) -> DMatrix<f64> + Send + Sync + 'static,
    {
        Self { dim, rank, smoothness, eval: Arc::new(eval) }
    }

    pub fn sample(&self, x: &Point) -> Result<PlaneFieldSample> {
        let raw = (self.eval)(x);
        if raw.ncols() != self.rank {
            return Err(Error::Dimension(format!(
                "plane field returned {} columns, declared rank {}",
                raw.ncols(),
                self.rank
            )));
        }
        PlaneFieldSample::new(x.clone(), raw)
    }

    /// Statistical continuity check: Grassmann distance between samples at
    /// `x` and `x + dx` must be bounded by `lipschitz * |dx|`.
    pub fn check_continuity(
        &self,
        lo: &[f64],
        hi: &[f64],
        lipschitz: f64,
        probes: usize,
        seed: u64,
    ) -> Result<ContinuityReport> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst_ratio = 0.0f64;
        let mut violations = 0usize;
        for _ in 0..probes {
            let x = random_point(&mut rng, lo, hi);
            let step = 1e-3;
            let mut dx = DVector::zeros(self.dim);
            for c in dx.iter_mut() {
                *c = rng.random_range(-1.0..1.0);
            }
            let norm = dx.norm();
            if norm == 0.0 {
                continue;
            }
            dx *= step / norm;
            let y = &x + &dx;
            let fx = self.sample(&x)?;
            let fy = self.sample(&y)?;
            let dist = grassmann_distance(&fx.frame, &fy.frame);
            let ratio = dist / step;
            worst_ratio = worst_ratio.max(ratio);
            if ratio > lipschitz {
                violations += 1;
            }
        }
        Ok(ContinuityReport { worst_ratio, declared_lipschitz: lipschitz, probes, violations })
    }
}

#[derive(Debug, Clone)]
pub struct ContinuityReport {
    pub worst_ratio: f64,
    pub declared_lipschitz: f64,
    pub probes: usize,
    pub violations: usize,
}

fn random_point(rng: &mut ChaCha8Rng, lo: &[f64], hi: &[f64]) -> Point {
    let mut x = DVector::zeros(lo.len());
    for i in 0..lo.len() {
        x[i] = rng.random_range(lo[i]..hi[i]);
    }
    x
}

/// An ambient 2-form on `R^n`, evaluated as an antisymmetric n-by-n matrix.
#[derive(Clone)]
pub struct TwoFormField {
    pub dim: usize,
    eval: Arc<MatrixFn>,
}

impl TwoFormField {
    pub fn new<F>(dim: usize, eval: F) -> Self
    where
        F: Fn(&Point) -> DMatrix<f64> + Send + Sync + 'static,
    {
        Self { dim, eval: Arc::new(eval) }
    }

    /// Evaluates the coefficient matrix, rejecting antisymmetry violations.
    pub fn value_at(&self, x: &Point) -> Result<DMatrix<f64>> {
        let m = (self.eval)(x);
        if m.nrows() != self.dim || m.ncols() != self.dim {
            return Err(Error::Dimension(format!(
                "2-form returned {}x{}, expected {}x{}",
                m.nrows(),
                m.ncols(),
                self.dim,
                self.dim
            )));
        }
        let defect = antisymmetry_defect(&m);
        if defect > ANTISYMMETRY_TOL {
            return Err(Error::Degenerate(format!(
                "2-form matrix not antisymmetric (defect {defect:.3e})"
            )));
        }
        Ok(m)
    }

    /// `omega(u, v)` at `x`.
    pub fn pair(&self, x: &Point, u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
        let m = self.value_at(x)?;
        Ok((u.transpose() * m * v)[(0, 0)])
    }
}

pub fn antisymmetry_defect(m: &DMatrix<f64>) -> f64 {
    (m + m.transpose()).amax()
}

/// A combined sample of the pair at one point.
#[derive(Debug, Clone)]
pub struct PairSample {
    pub tau: PlaneFieldSample,
    pub omega: DMatrix<f64>,
}

/// A plane field together with an ambient 2-form, deformed as one unit.
#[derive(Clone)]
pub struct PairedDistribution {
    pub tau: PlaneField,
    pub omega: TwoFormField,
}

impl PairedDistribution {
    pub fn new(tau: PlaneField, omega: TwoFormField) -> Result<Self> {
        if tau.dim != omega.dim {
            return Err(Error::Dimension(format!(
                "plane field dim {} vs 2-form dim {}",
                tau.dim, omega.dim
            )));
        }
        Ok(Self { tau, omega })
    }

    pub fn dim(&self) -> usize {
        self.tau.dim
    }

    pub fn rank(&self) -> usize {
        self.tau.rank
    }

    pub fn sample(&self, x: &Point) -> Result<PairSample> {
        Ok(PairSample { tau: self.tau.sample(x)?, omega: self.omega.value_at(x)? })
    }

    /// Pulls the pair back through a point map: the returned pair evaluated
    /// at `x` reports the original pair's values at `map(x)`.
    pub fn pulled_back<M>(&self, map: M) -> Self
    where
        M: Fn(&Point) -> Point + Send + Sync + 'static,
    {
        let map = Arc::new(map);
        let tau_src = self.tau.clone();
        let omega_src = self.omega.clone();
        let map_tau = Arc::clone(&map);
        let tau = PlaneField::new(
            self.tau.dim,
            self.tau.rank,
            Smoothness::GridInterpolated,
            move |x| {
                let y = (map_tau)(x);
                tau_src
                    .sample(&y)
                    .map(|s| s.frame)
                    .unwrap_or_else(|_| DMatrix::zeros(tau_src.dim, tau_src.rank))
            },
        );
        let omega = TwoFormField::new(self.omega.dim, move |x| {
            let y = (map)(x);
            omega_src
                .value_at(&y)
                .unwrap_or_else(|_| DMatrix::zeros(omega_src.dim, omega_src.dim))
        });
        Self { tau, omega }
    }

    /// Constant pair: plane spanned by the first two coordinate axes and the
    /// standard split 2-form `dx1^dx2 + dx3^dx4 + ...`.
    pub fn constant(dim: usize) -> Self {
        let tau = PlaneField::new(dim, 2, Smoothness::Analytic, move |_x| axis_frame(dim, &[0, 1]));
        let omega = TwoFormField::new(dim, move |_x| split_form(dim));
        Self { tau, omega }
    }

    /// Plane slowly rotating from span(e1,e2) toward e3 as the third
    /// coordinate grows; `rate` is the rotation angle per unit of x3.
    pub fn rotating(dim: usize, rate: f64) -> Self {
        assert!(dim >= 3);
        let tau = PlaneField::new(dim, 2, Smoothness::Analytic, move |x| {
            let angle = rate * x[2];
            let mut f = DMatrix::zeros(dim, 2);
            f[(0, 0)] = 1.0;
            f[(1, 1)] = angle.cos();
            f[(2, 1)] = angle.sin();
            f
        });
        let omega = TwoFormField::new(dim, move |_x| split_form(dim));
        Self { tau, omega }
    }

    /// Constant plane with a 2-form whose leading coefficient drifts
    /// linearly in x1; useful as a pair that is *not* constant on any fiber.
    pub fn linear_omega(dim: usize, slope: f64) -> Self {
        let tau = PlaneField::new(dim, 2, Smoothness::Analytic, move |_x| axis_frame(dim, &[0, 1]));
        let omega = TwoFormField::new(dim, move |x| {
            let mut m = split_form(dim);
            let c = 1.0 + slope * x[0];
            m[(0, 1)] = c;
            m[(1, 0)] = -c;
            m
        });
        Self { tau, omega }
    }

    /// Constant plane with the zero 2-form; degenerate everywhere.
    pub fn zero_omega(dim: usize) -> Self {
        let tau = PlaneField::new(dim, 2, Smoothness::Analytic, move |_x| axis_frame(dim, &[0, 1]));
        let omega = TwoFormField::new(dim, move |_x| DMatrix::zeros(dim, dim));
        Self { tau, omega }
    }
}

fn axis_frame(dim: usize, axes: &[usize]) -> DMatrix<f64> {
    let mut f = DMatrix::zeros(dim, axes.len());
    for (j, &i) in axes.iter().enumerate() {
        f[(i, j)] = 1.0;
    }
    f
}

/// `dx1^dx2 + dx3^dx4 + ...` over as many full pairs of axes as fit.
fn split_form(dim: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(dim, dim);
    let mut i = 0;
    while i + 1 < dim {
        m[(i, i + 1)] = 1.0;
        m[(i + 1, i)] = -1.0;
        i += 2;
    }
    m
}
