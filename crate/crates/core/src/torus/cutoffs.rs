use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn sigma(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

fn sigma_prime(t: f64) -> f64 {
    if t > 0.0 {
        sigma(t) / (t * t)
    } else {
        0.0
    }
}

/// Smooth monotone step: 0 for t <= 0, 1 for t >= 1, infinitely
/// differentiable, with all derivatives vanishing at both ends.
pub fn smoothstep(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = sigma(t);
        let b = sigma(1.0 - t);
        a / (a + b)
    }
}

/// Exact derivative of `smoothstep`.
pub fn smoothstep_derivative(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        let a = sigma(t);
        let b = sigma(1.0 - t);
        let ap = sigma_prime(t);
        let bp = sigma_prime(1.0 - t);
        (ap * b + a * bp) / ((a + b) * (a + b))
    }
}

/// A smooth plateau bump on [0, 1]: zero before `rise`, climbing to one
/// across it, constant one on the plateau, and falling back to zero across
/// `fall`. A missing ramp pins that end of the interval at one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateauCutoff {
    pub rise: Option<(f64, f64)>,
    pub fall: Option<(f64, f64)>,
}

impl PlateauCutoff {
    pub fn new(rise: Option<(f64, f64)>, fall: Option<(f64, f64)>) -> Result<Self> {
        if let Some((a, b)) = rise {
            if !(a < b) {
                return Err(Error::Precondition(format!("empty rise ramp ({a}, {b})")));
            }
        }
        if let Some((c, d)) = fall {
            if !(c < d) {
                return Err(Error::Precondition(format!("empty fall ramp ({c}, {d})")));
            }
        }
        if let (Some((_, b)), Some((c, _))) = (rise, fall) {
            if b > c {
                return Err(Error::Precondition(format!(
                    "rise ends at {b} after fall starts at {c}"
                )));
            }
        }
        Ok(Self { rise, fall })
    }

    pub fn value(&self, r: f64) -> f64 {
        if let Some((a, b)) = self.rise {
            if r < b {
                return smoothstep((r - a) / (b - a));
            }
        }
        if let Some((c, d)) = self.fall {
            if r > c {
                return smoothstep((d - r) / (d - c));
            }
        }
        1.0
    }

    pub fn derivative(&self, r: f64) -> f64 {
        if let Some((a, b)) = self.rise {
            if r < b {
                return smoothstep_derivative((r - a) / (b - a)) / (b - a);
            }
        }
        if let Some((c, d)) = self.fall {
            if r > c {
                return -smoothstep_derivative((d - r) / (d - c)) / (d - c);
            }
        }
        0.0
    }

    /// Closure of the positivity set, clamped to [0, 1].
    pub fn support(&self) -> (f64, f64) {
        let lo = self.rise.map_or(0.0, |(a, _)| a.max(0.0));
        let hi = self.fall.map_or(1.0, |(_, d)| d.min(1.0));
        (lo, hi)
    }
}

/// Three radial cutoffs: one pinned at the core, one pinned at mid-radius,
/// one pinned at the boundary, with the core and boundary supports disjoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffTriple {
    pub lambda0: PlateauCutoff,
    pub lambda_half: PlateauCutoff,
    pub lambda1: PlateauCutoff,
}

impl CutoffTriple {
    /// Plateau ramps: core cutoff constant on [0, 0.25] falling over
    /// (0.25, 0.35); mid cutoff supported in (0.25, 0.75), constant on
    /// [0.4, 0.6]; boundary cutoff rising over (0.65, 0.75), constant on
    /// [0.75, 1].
    pub fn standard() -> Self {
        Self {
            lambda0: PlateauCutoff { rise: None, fall: Some((0.25, 0.35)) },
            lambda_half: PlateauCutoff { rise: Some((0.25, 0.4)), fall: Some((0.6, 0.75)) },
            lambda1: PlateauCutoff { rise: Some((0.65, 0.75)), fall: None },
        }
    }

    /// Deliberately broken triple whose core and boundary cutoffs have
    /// overlapping supports, for negative controls.
    pub fn overlapping() -> Self {
        Self {
            lambda0: PlateauCutoff { rise: None, fall: Some((0.3, 0.7)) },
            lambda_half: PlateauCutoff { rise: Some((0.25, 0.4)), fall: Some((0.6, 0.75)) },
            lambda1: PlateauCutoff { rise: Some((0.35, 0.75)), fall: None },
        }
    }

    /// Checks the plateau pins (value one at 0, 1/2, and 1 respectively,
    /// with a genuine plateau around each pin) and the disjointness of the
    /// core and boundary supports.
    pub fn validate(&self) -> Result<()> {
        if self.lambda0.rise.is_some() || self.lambda0.value(0.0) != 1.0 {
            return Err(Error::Precondition("core cutoff must be constant one near 0".into()));
        }
        if self.lambda1.fall.is_some() || self.lambda1.value(1.0) != 1.0 {
            return Err(Error::Precondition("boundary cutoff must be constant one near 1".into()));
        }
        let plateau_mid = match (self.lambda_half.rise, self.lambda_half.fall) {
            (Some((_, b)), Some((c, _))) => b < 0.5 && 0.5 < c,
            _ => false,
        };
        if !plateau_mid || self.lambda_half.value(0.5) != 1.0 {
            return Err(Error::Precondition(
                "mid cutoff must be constant one on a neighborhood of 1/2".into(),
            ));
        }
        let (_, core_hi) = self.lambda0.support();
        let (bdry_lo, _) = self.lambda1.support();
        if core_hi >= bdry_lo {
            return Err(Error::Precondition(format!(
                "core support reaches {core_hi}, boundary support starts at {bdry_lo}: overlap"
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoothstep_ends_and_midpoint() {
        assert_eq!(smoothstep(0.0), 0.0);
        assert_eq!(smoothstep(1.0), 1.0);
        assert!((smoothstep(0.5) - 0.5).abs() <= 1e-15);
        assert_eq!(smoothstep(-3.0), 0.0);
        assert_eq!(smoothstep(7.0), 1.0);
        for i in 0..=100 {
            let t = i as f64 / 100.0;
            let v = smoothstep(t);
            assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn smoothstep_derivative_matches_finite_differences() {
        let h = 1e-6;
        for &t in &[0.1, 0.3, 0.5, 0.77, 0.9] {
            let fd = (smoothstep(t + h) - smoothstep(t - h)) / (2.0 * h);
            let exact = smoothstep_derivative(t);
            assert!((fd - exact).abs() <= 1e-7, "t={t}: fd {fd} vs exact {exact}");
        }
        assert_eq!(smoothstep_derivative(0.0), 0.0);
        assert_eq!(smoothstep_derivative(1.0), 0.0);
    }

    #[test]
    fn plateau_cutoff_shape_and_derivative() {
        let c = PlateauCutoff::new(Some((0.25, 0.4)), Some((0.6, 0.75))).unwrap();
        assert_eq!(c.value(0.0), 0.0);
        assert_eq!(c.value(0.25), 0.0);
        assert_eq!(c.value(0.5), 1.0);
        assert_eq!(c.value(0.75), 0.0);
        assert_eq!(c.value(1.0), 0.0);
        assert_eq!(c.derivative(0.5), 0.0);
        let h = 1e-6;
        for &r in &[0.3, 0.35, 0.62, 0.7] {
            let fd = (c.value(r + h) - c.value(r - h)) / (2.0 * h);
            assert!((fd - c.derivative(r)).abs() <= 1e-6, "r={r}");
        }
        assert_eq!(c.support(), (0.25, 0.75));
    }

    #[test]
    fn standard_triple_validates_and_pins() {
        let t = CutoffTriple::standard();
        t.validate().unwrap();
        assert_eq!(t.lambda0.value(0.0), 1.0);
        assert_eq!(t.lambda0.value(0.2), 1.0);
        assert_eq!(t.lambda_half.value(0.5), 1.0);
        assert_eq!(t.lambda1.value(1.0), 1.0);
        assert_eq!(t.lambda1.value(0.8), 1.0);
        // disjointness makes the core and boundary ramps never coexist
        for i in 0..=1000 {
            let r = i as f64 / 1000.0;
            assert!(t.lambda0.value(r) * t.lambda1.value(r) == 0.0);
            assert!(t.lambda0.value(r) * t.lambda1.derivative(r) == 0.0);
            assert!(t.lambda1.value(r) * t.lambda0.derivative(r) == 0.0);
        }
    }

    #[test]
    fn overlapping_triple_fails_validation() {
        assert!(CutoffTriple::overlapping().validate().is_err());
    }

    #[test]
    fn ramp_order_is_enforced() {
        assert!(PlateauCutoff::new(Some((0.5, 0.6)), Some((0.4, 0.7))).is_err());
        assert!(PlateauCutoff::new(Some((0.6, 0.5)), None).is_err());
    }
}
