use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{orth_complement, Point};

use super::cutoffs::CutoffTriple;

/// How close to zero the 1-form may get before the kernel is meaningless.
const BETA_FLOOR: f64 = 1e-12;

/// Half-width of the radial band around the piece seam where both piece
/// formulas apply and must agree.
const SEAM_BAND: f64 = 0.05;
const SEAM_TOL: f64 = 1e-10;

/// Orientation of the mid-radius 2-form term relative to the core and
/// boundary pieces.
///
/// `Coherent` keeps the associated 3-form density one-signed across the whole
/// torus, so the 2-form stays nondegenerate along every leaf. `Reversed`
/// flips that term; the density then changes sign inside each transition
/// band, forcing a circle of leafwise degeneracy. The reversed variant is
/// kept as an inspectable negative control.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum BandSign {
    #[default]
    Coherent,
    Reversed,
}

impl BandSign {
    pub(crate) fn factor(self) -> f64 {
        match self {
            BandSign::Coherent => 1.0,
            BandSign::Reversed => -1.0,
        }
    }
}

/// The 1-form at a point together with an orthonormal basis of its kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaSample {
    /// Covector components in the Cartesian chart (x, y, angle).
    pub components: DVector<f64>,
    /// 3 x 2 orthonormal kernel frame in the same chart.
    pub kernel: DMatrix<f64>,
}

/// Solid torus D^2 x S^1 carrying the cutoff-built foliation. Points are
/// written in the Cartesian chart (x, y, theta) with x^2 + y^2 <= 1; the
/// disk angle phi satisfies (x, y) = (r cos phi, r sin phi). All forms are
/// evaluated in this chart, which is smooth across the core r = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolidTorusModel {
    /// Boundary slope: the boundary foliation is the kernel of
    /// d(theta) - a d(phi).
    pub a: f64,
    pub cutoffs: CutoffTriple,
    pub band_sign: BandSign,
}

impl SolidTorusModel {
    pub fn new(a: f64, cutoffs: CutoffTriple, band_sign: BandSign) -> Result<Self> {
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::Precondition(format!("slope {a} outside [0, 1]")));
        }
        cutoffs.validate()?;
        Ok(Self { a, cutoffs, band_sign })
    }

    pub fn standard(a: f64) -> Result<Self> {
        Self::new(a, CutoffTriple::standard(), BandSign::Coherent)
    }

    fn radius(p: &Point) -> Result<f64> {
        if p.nrows() != 3 {
            return Err(Error::Dimension(format!("expected 3 coordinates, got {}", p.nrows())));
        }
        let r = p[0].hypot(p[1]);
        if r > 1.0 + 1e-12 {
            return Err(Error::Precondition(format!("point at radius {r} outside the torus")));
        }
        Ok(r.min(1.0))
    }

    /// The defining 1-form at a point: its chart components and an
    /// orthonormal kernel 2-plane.
    pub fn beta_form(&self, p: &Point) -> Result<BetaSample> {
        let components = self.beta_components(p)?;
        if components.norm() < BETA_FLOOR {
            return Err(Error::Degenerate(format!(
                "the 1-form vanishes at radius {}",
                Self::radius(p)?
            )));
        }
        let normal = DMatrix::from_column_slice(3, 1, components.as_slice());
        let kernel = orth_complement(&normal);
        Ok(BetaSample { components, kernel })
    }

    ///exposes the raw covector so degeneracy probes can see exact zeros.
    pub fn beta_components(&self, p: &Point) -> Result<DVector<f64>> {
        let r = Self::radius(p)?;
        let (x, y) = (p[0], p[1]);
        let l0 = self.cutoffs.lambda0.value(r);
        let lh = self.cutoffs.lambda_half.value(r);
        let l1 = self.cutoffs.lambda1.value(r);
        let mut c = DVector::zeros(3);
        c[2] = l0 + l1;
        // radial term lh * dr = lh (x dx + y dy)/r; the cutoff vanishes
        // identically near the core, so the division never runs there
        if lh != 0.0 {
            c[0] += lh * x / r;
            c[1] += lh * y / r;
        }
        // angular term -a l1 dphi = -a l1 (-y dx + x dy)/r^2
        if l1 != 0.0 && self.a != 0.0 {
            let rr = r * r;
            c[0] += self.a * l1 * y / rr;
            c[1] -= self.a * l1 * x / rr;
        }
        Ok(c)
    }

    /// Core-piece 2-form matrix (valid where the boundary cutoff vanishes).
    fn omega_inner(&self, p: &Point, r: f64) -> DMatrix<f64> {
        let l0 = self.cutoffs.lambda0.value(r);
        let lh = self.cutoffs.lambda_half.value(r);
        let mut m = DMatrix::zeros(3, 3);
        // l0 * r dr ^ dphi = l0 dx ^ dy
        add_area(&mut m, l0);
        add_dphi_dtheta(&mut m, self.band_sign.factor() * lh, p, r);
        m
    }

    /// Boundary-piece 2-form matrix (valid where the core cutoff vanishes).
    fn omega_outer(&self, p: &Point, r: f64) -> DMatrix<f64> {
        let lh = self.cutoffs.lambda_half.value(r);
        let l1 = self.cutoffs.lambda1.value(r);
        let mut m = DMatrix::zeros(3, 3);
        if l1 != 0.0 {
            // l1 dr ^ dphi = (l1 / r) dx ^ dy
            add_area(&mut m, l1 / r);
            add_dr_dtheta(&mut m, self.a * l1, p, r);
        }
        add_dphi_dtheta(&mut m, self.band_sign.factor() * lh, p, r);
        m
    }

    /// The companion 2-form at a point, as an antisymmetric matrix in the
    /// Cartesian chart. The two piece formulas are stitched at mid-radius
    /// and cross-checked against each other in a band around the seam.
    pub fn omega_form(&self, p: &Point) -> Result<DMatrix<f64>> {
        let r = Self::radius(p)?;
        if (r - 0.5).abs() <= SEAM_BAND {
            let inner = self.omega_inner(p, r);
            let outer = self.omega_outer(p, r);
            let gap = (&inner - &outer).amax();
            if gap > SEAM_TOL {
                return Err(Error::Precondition(format!(
                    "2-form pieces disagree by {gap} at radius {r}"
                )));
            }
            return Ok(inner);
        }
        Ok(if r <= 0.5 { self.omega_inner(p, r) } else { self.omega_outer(p, r) })
    }

    /// Largest entry-wise disagreement between the two piece formulas at a
    /// point of the seam band (zero away from the band).
    pub fn seam_gap(&self, p: &Point) -> Result<f64> {
        let r = Self::radius(p)?;
        if (r - 0.5).abs() > SEAM_BAND {
            return Ok(0.0);
        }
        Ok((self.omega_inner(p, r) - self.omega_outer(p, r)).amax())
    }

    /// |2-form on an orthonormal kernel basis| of the 1-form: the leafwise
    /// nondegeneracy margin at a point.
    pub fn leafwise_margin(&self, p: &Point) -> Result<f64> {
        let beta = self.beta_form(p)?;
        let omega = self.omega_form(p)?;
        let u1 = beta.kernel.column(0);
        let u2 = beta.kernel.column(1);
        Ok((u1.transpose() * &omega * u2)[(0, 0)].abs())
    }

    /// Density of the 3-form (1-form wedge its exterior derivative) against
    /// the chart volume. The 1-form depends on position only through the
    /// radius, so the coefficient assembles from the cutoff derivatives; it
    /// vanishes identically when the core and boundary supports are
    /// disjoint.
    pub fn integrability_defect_at(&self, p: &Point) -> Result<f64> {
        let r = Self::radius(p)?;
        let l0 = self.cutoffs.lambda0.value(r);
        let l1 = self.cutoffs.lambda1.value(r);
        let l0p = self.cutoffs.lambda0.derivative(r);
        let l1p = self.cutoffs.lambda1.derivative(r);
        // coefficient on dr ^ dphi ^ dtheta
        let polar = self.a * l1 * (l0p + l1p) - self.a * (l0 + l1) * l1p;
        if polar == 0.0 {
            return Ok(0.0);
        }
        // dr ^ dphi ^ dtheta = dx ^ dy ^ dtheta / r
        Ok((polar / r).abs())
    }
}

/// c * dx ^ dy
fn add_area(m: &mut DMatrix<f64>, c: f64) {
    m[(0, 1)] += c;
    m[(1, 0)] -= c;
}

/// c * dphi ^ dtheta = c (-y dx + x dy) ^ dtheta / r^2
fn add_dphi_dtheta(m: &mut DMatrix<f64>, c: f64, p: &Point, r: f64) {
    if c == 0.0 {
        return;
    }
    let rr = r * r;
    let (x, y) = (p[0], p[1]);
    m[(0, 2)] += -c * y / rr;
    m[(2, 0)] -= -c * y / rr;
    m[(1, 2)] += c * x / rr;
    m[(2, 1)] -= c * x / rr;
}

/// c * dr ^ dtheta = c (x dx + y dy) ^ dtheta / r
fn add_dr_dtheta(m: &mut DMatrix<f64>, c: f64, p: &Point, r: f64) {
    if c == 0.0 {
        return;
    }
    let (x, y) = (p[0], p[1]);
    m[(0, 2)] += c * x / r;
    m[(2, 0)] -= c * x / r;
    m[(1, 2)] += c * y / r;
    m[(2, 1)] -= c * y / r;
}
