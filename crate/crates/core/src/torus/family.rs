use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{orth_complement, Point};

use super::cutoffs::PlateauCutoff;
use super::model::SolidTorusModel;

/// Which 2-form accompanies the product region of the family (where the
/// torus construction is switched off and leaves are disk slices).
///
/// `DiskArea` uses the disk area form, which restricts nondegenerately to
/// every disk slice. `RadialTheta` uses the radial-times-angular term
/// instead; it vanishes identically on disk slices and is kept only as an
/// inspectable negative control.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum DiskTerm {
    #[default]
    DiskArea,
    RadialTheta,
}

/// A family of foliated-torus data over the parameter ball: at parameter w
/// the torus carries the construction with slope f(|w|), faded against the
/// product foliation by the weight g(|w|). Ambient points are
/// (x, y, theta, w_1 .. w_{n-3}) with n >= 4.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyModel {
    /// Ambient dimension n (torus chart takes 3 slots, parameters n - 3).
    pub dim: usize,
    /// Base model; its slope scales the profile into f = a * f_profile(|w|).
    pub base: SolidTorusModel,
    /// Slope profile: one near the center, vanishing before the boundary.
    pub f_profile: PlateauCutoff,
    /// Fade weight: one on the slope support, vanishing near the boundary.
    pub g_profile: PlateauCutoff,
    pub disk_term: DiskTerm,
}

impl FamilyModel {
    pub fn new(
        dim: usize,
        base: SolidTorusModel,
        f_profile: PlateauCutoff,
        g_profile: PlateauCutoff,
        disk_term: DiskTerm,
    ) -> Result<Self> {
        if dim < 4 {
            return Err(Error::Dimension(format!("family needs dimension >= 4, got {dim}")));
        }
        if base.a <= 0.0 {
            return Err(Error::Precondition(
                "family slope scale must be positive so the slope profile is non-vanishing on its plateau".into(),
            ));
        }
        if f_profile.rise.is_some() || f_profile.value(0.0) != 1.0 {
            return Err(Error::Precondition(
                "slope profile must be constant one near the parameter origin".into(),
            ));
        }
        let (_, f_hi) = f_profile.support();
        if f_hi >= 1.0 {
            return Err(Error::Precondition(
                "slope profile must vanish near the parameter boundary".into(),
            ));
        }
        let g_plateau_end = match (g_profile.rise, g_profile.fall) {
            (None, Some((c, d))) => {
                if d >= 1.0 {
                    return Err(Error::Precondition(
                        "fade weight must vanish near the parameter boundary".into(),
                    ));
                }
                c
            }
            _ => {
                return Err(Error::Precondition(
                    "fade weight must be one near the origin and fall once".into(),
                ))
            }
        };
        if g_plateau_end < f_hi {
            return Err(Error::Precondition(format!(
                "fade weight must be one on the slope support: plateau ends at {g_plateau_end}, support reaches {f_hi}"
            )));
        }
        Ok(Self { dim, base, f_profile, g_profile, disk_term })
    }

    /// Slope one near the center fading out at parameter radius 0.6; weight
    /// one out to 0.9 and gone before the boundary.
    pub fn standard(dim: usize, a: f64) -> Result<Self> {
        let base = SolidTorusModel::standard(a)?;
        let f_profile = PlateauCutoff::new(None, Some((0.4, 0.6)))?;
        let g_profile = PlateauCutoff::new(None, Some((0.7, 0.9)))?;
        Self::new(dim, base, f_profile, g_profile, DiskTerm::DiskArea)
    }

    fn split(&self, p: &Point) -> Result<(Point, f64)> {
        if p.nrows() != self.dim {
            return Err(Error::Dimension(format!(
                "expected {} coordinates, got {}",
                self.dim,
                p.nrows()
            )));
        }
        let torus_part = DVector::from_vec(vec![p[0], p[1], p[2]]);
        let t = p.rows(3, self.dim - 3).norm();
        if t > 1.0 + 1e-12 {
            return Err(Error::Precondition(format!("parameter at radius {t} outside the ball")));
        }
        Ok((torus_part, t.min(1.0)))
    }

    /// Torus model at one parameter value (slope faded by the profile).
    pub fn slice_model(&self, t: f64) -> SolidTorusModel {
        SolidTorusModel {
            a: self.base.a * self.f_profile.value(t),
            cutoffs: self.base.cutoffs.clone(),
            band_sign: self.base.band_sign,
        }
    }

    /// Blended 1-form components on the 3-dimensional torus slice.
    fn slice_one_form(&self, q: &Point, t: f64) -> Result<DVector<f64>> {
        let g = self.g_profile.value(t);
        let mut c = DVector::zeros(3);
        c[2] = 1.0 - g;
        if g != 0.0 {
            let beta = self.slice_model(t).beta_components(q)?;
            c += g * beta;
        }
        Ok(c)
    }

    /// Blended 2-form matrix on the 3-dimensional torus slice.
    fn slice_two_form(&self, q: &Point, t: f64) -> Result<DMatrix<f64>> {
        let g = self.g_profile.value(t);
        let mut m = DMatrix::zeros(3, 3);
        let w = 1.0 - g;
        if w != 0.0 {
            match self.disk_term {
                DiskTerm::DiskArea => {
                    // r dr ^ dphi = dx ^ dy
                    m[(0, 1)] += w;
                    m[(1, 0)] -= w;
                }
                DiskTerm::RadialTheta => {
                    // r dr ^ dtheta = (x dx + y dy) ^ dtheta
                    m[(0, 2)] += w * q[0];
                    m[(2, 0)] -= w * q[0];
                    m[(1, 2)] += w * q[1];
                    m[(2, 1)] -= w * q[1];
                }
            }
        }
        if g != 0.0 {
            m += g * self.slice_model(t).omega_form(q)?;
        }
        Ok(m)
    }

    /// The family's 1-form and 2-form at an ambient point, as full-size
    /// components and matrix (parameter slots carry zeros: the displayed
    /// forms have no parameter-direction terms).
    pub fn family_forms(&self, p: &Point) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let (q, t) = self.split(p)?;
        let c3 = self.slice_one_form(&q, t)?;
        let m3 = self.slice_two_form(&q, t)?;
        let mut c = DVector::zeros(self.dim);
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for i in 0..3 {
            c[i] = c3[i];
            for j in 0..3 {
                m[(i, j)] = m3[(i, j)];
            }
        }
        Ok((c, m))
    }

    /// Leafwise nondegeneracy margin at an ambient point: leaves are the
    /// slice foliation's leaves at frozen parameter, so the margin is the
    /// |2-form| on an orthonormal kernel basis of the slice 1-form.
    pub fn leafwise_margin(&self, p: &Point) -> Result<f64> {
        let (q, t) = self.split(p)?;
        let c3 = self.slice_one_form(&q, t)?;
        if c3.norm() < 1e-12 {
            return Err(Error::Degenerate(format!(
                "family 1-form vanishes at parameter radius {t}"
            )));
        }
        let m3 = self.slice_two_form(&q, t)?;
        let kernel = orth_complement(&DMatrix::from_column_slice(3, 1, c3.as_slice()));
        let u1 = kernel.column(0);
        let u2 = kernel.column(1);
        Ok((u1.transpose() * &m3 * u2)[(0, 0)].abs())
    }
}
