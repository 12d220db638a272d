//! Concrete generators of compactly supported diffeomorphisms: flows of
//! bump vector fields (adaptive integration), closed-form twists and
//! displacement bumps (exact inverses), plateau translations, and the
//! rotation family on a tubular chart around the unit circle.

use std::sync::{Arc, OnceLock};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geom::Point;
use crate::torus::smoothstep;

use super::cdiffeo::{CDiffeo, MapFn, SupportBox};
use super::ode::{integrate, OdeOptions};

/// Hard cap on flow times accepted by the flow builder.
pub const MAX_FLOW_TIME: f64 = 32.0;
/// Largest displacement-Jacobian norm a closed-form displacement map may
/// declare; beyond this the fixed-point inverse stops being trustworthy.
const MAX_DISPLACEMENT_NORM: f64 = 0.95;
/// Fixed-point inversion controls.
const PICARD_TOL: f64 = 1e-14;
const PICARD_CAP: usize = 2000;

/// Smooth bump: exp(1 - 1/(1 - t^2)) for |t| < 1, zero outside. Equals one
/// at t = 0 and vanishes with all derivatives at |t| = 1.
pub fn bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        return 0.0;
    }
    (1.0 - 1.0 / (1.0 - t * t)).exp()
}

/// Derivative of `bump`.
pub fn bump_derivative(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        return 0.0;
    }
    let w = 1.0 - t * t;
    -2.0 * t / (w * w) * bump(t)
}

fn scan_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    // Coarse scan followed by golden-section refinement around the best
    // sample; the profiles here are smooth with a single interior maximum.
    let n = 20_000;
    let mut best_t = lo;
    let mut best = f64::NEG_INFINITY;
    for i in 0..=n {
        let t = lo + (hi - lo) * i as f64 / n as f64;
        let v = f(t);
        if v > best {
            best = v;
            best_t = t;
        }
    }
    let step = (hi - lo) / n as f64;
    let (mut a, mut b) = ((best_t - step).max(lo), (best_t + step).min(hi));
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if f(c) < f(d) {
            a = c;
        } else {
            b = d;
        }
    }
    f(0.5 * (a + b)).max(best)
}

/// Largest slope of `bump` over its support.
pub fn bump_derivative_max() -> f64 {
    static CACHE: OnceLock<f64> = OnceLock::new();
    *CACHE.get_or_init(|| scan_max(|t| bump_derivative(t).abs(), 0.0, 1.0))
}

/// Largest slope of the smoothstep ramp.
pub fn smoothstep_derivative_max() -> f64 {
    static CACHE: OnceLock<f64> = OnceLock::new();
    *CACHE.get_or_init(|| scan_max(crate::torus::smoothstep_derivative, 0.0, 1.0))
}

fn check_dim(center: &Point, what: &str, len: usize) -> Result<()> {
    if center.len() != len {
        return Err(Error::Dimension(format!(
            "{what} has length {} but the ambient dimension is {len}",
            center.len()
        )));
    }
    Ok(())
}

/// Time-`time` flow of the bump field bump(|x - center|/radius) *
/// direction, integrated adaptively; the inverse runs the flow backward.
/// Identity outside the ball (the field vanishes there, and the integrator
/// reproduces constants exactly).
pub fn make_bump_flow(center: &Point, radius: f64, direction: &Point, time: f64) -> Result<CDiffeo> {
    let dim = center.len();
    check_dim(direction, "direction", dim)?;
    if radius <= 0.0 {
        return Err(Error::Precondition(format!("radius {radius} must be positive")));
    }
    if !time.is_finite() || time.abs() > MAX_FLOW_TIME {
        return Err(Error::Precondition(format!("flow time {time} exceeds the cap {MAX_FLOW_TIME}")));
    }
    if !direction.iter().all(|v| v.is_finite()) {
        return Err(Error::Precondition("direction has non-finite entries".into()));
    }

    let c = center.clone();
    let d = direction.clone();
    let field = Arc::new(move |_: f64, x: &DVector<f64>| &d * bump((x - &c).norm() / radius));
    // One notch under the advertised flow tolerance, so forward-then-back
    // round trips stay within it even for multi-unit times.
    let opts = OdeOptions { tol: 1e-11, ..OdeOptions::default() };

    let flow = |sign: f64| -> MapFn {
        let field = field.clone();
        Arc::new(move |p: &Point| {
            integrate(|t, y| field(t, y), 0.0, sign * time, p, &opts)
                .expect("bump-field flow stays within the integrator step cap")
        })
    };
    let forward = flow(1.0);
    let inverse = flow(-1.0);

    // Construction-time probe: the two directions must invert each other.
    let probe = center.clone();
    let gap = (inverse(&forward(&probe)) - &probe).amax();
    if !gap.is_finite() || gap > 1e-8 {
        return Err(Error::Integration(format!(
            "flow round trip misses by {gap}; tolerance not met"
        )));
    }

    Ok(CDiffeo::from_parts(dim, forward, inverse, Some(SupportBox::ball(center, radius)?)))
}

/// Closed-form twist: rotate the first two coordinates about `center` by
/// angle * bump(|x - center|/radius). The bump argument is invariant under
/// the rotation, so the map with the opposite angle is an exact inverse.
pub fn make_twist(center: &Point, radius: f64, angle: f64) -> Result<CDiffeo> {
    let dim = center.len();
    if dim < 2 {
        return Err(Error::Dimension("twists need at least two coordinates".into()));
    }
    if radius <= 0.0 {
        return Err(Error::Precondition(format!("radius {radius} must be positive")));
    }
    let rotate = |sign: f64| -> MapFn {
        let c = center.clone();
        Arc::new(move |p: &Point| {
            let b = bump((p - &c).norm() / radius);
            if b == 0.0 {
                return p.clone();
            }
            let phi = sign * angle * b;
            let (sin, cos) = phi.sin_cos();
            let (u, v) = (p[0] - c[0], p[1] - c[1]);
            let mut out = p.clone();
            out[0] = c[0] + cos * u - sin * v;
            out[1] = c[1] + sin * u + cos * v;
            out
        })
    };
    Ok(CDiffeo::from_parts(dim, rotate(1.0), rotate(-1.0), Some(SupportBox::ball(center, radius)?)))
}

/// Operator norm of the displacement Jacobian of a displacement bump,
/// in closed form (the Jacobian is rank one).
pub fn displacement_bump_norm(radius: f64, amplitude: &Point) -> f64 {
    amplitude.norm() * bump_derivative_max() / radius
}

/// Invert x + e(x) by fixed-point iteration; valid while sup|de| < 1.
fn picard_inverse(
    displacement: Arc<dyn Fn(&Point) -> Point + Send + Sync>,
) -> MapFn {
    Arc::new(move |y: &Point| {
        let mut x = y.clone();
        for _ in 0..PICARD_CAP {
            let next = y - displacement(&x);
            let gap = (&next - &x).amax();
            x = next;
            if gap <= PICARD_TOL {
                break;
            }
        }
        x
    })
}

/// The map x + bump(|x - center|/radius) * amplitude, with a fixed-point
/// inverse. Errors when the closed-form displacement norm reaches the
/// invertibility budget.
pub fn make_displacement_bump(center: &Point, radius: f64, amplitude: &Point) -> Result<CDiffeo> {
    let dim = center.len();
    check_dim(amplitude, "amplitude", dim)?;
    if radius <= 0.0 {
        return Err(Error::Precondition(format!("radius {radius} must be positive")));
    }
    let norm = displacement_bump_norm(radius, amplitude);
    if norm >= MAX_DISPLACEMENT_NORM {
        return Err(Error::Precondition(format!(
            "displacement norm {norm:.3} reaches the invertibility budget {MAX_DISPLACEMENT_NORM}"
        )));
    }
    let (c, a) = (center.clone(), amplitude.clone());
    let displacement: Arc<dyn Fn(&Point) -> Point + Send + Sync> =
        Arc::new(move |x: &Point| &a * bump((x - &c).norm() / radius));
    let fwd_disp = displacement.clone();
    let forward: MapFn = Arc::new(move |p: &Point| p + fwd_disp(p));
    Ok(CDiffeo::from_parts(
        dim,
        forward,
        picard_inverse(displacement),
        Some(SupportBox::ball(center, radius)?),
    ))
}

/// One-dimensional plateau: one on [lo, hi], smoothstep ramps of width
/// `ramp` on both sides, zero beyond.
fn plateau_1d(x: f64, lo: f64, hi: f64, ramp: f64) -> f64 {
    if x <= lo - ramp || x >= hi + ramp {
        0.0
    } else if x < lo {
        smoothstep((x - (lo - ramp)) / ramp)
    } else if x > hi {
        smoothstep(((hi + ramp) - x) / ramp)
    } else {
        1.0
    }
}

/// The map x + s(x) * shift where s is a product of coordinate plateaus
/// equal to one on `shield` and zero beyond `ramp` outside it. Points of
/// the shield translate exactly by `shift`; the inverse is fixed-point.
/// Errors when the displacement-norm bound reaches the invertibility
/// budget (grow `ramp` to fix).
pub fn make_plateau_translation(shield: &SupportBox, ramp: f64, shift: &Point) -> Result<CDiffeo> {
    let dim = shield.dim();
    check_dim(shift, "shift", dim)?;
    if ramp <= 0.0 {
        return Err(Error::Precondition(format!("ramp {ramp} must be positive")));
    }
    let bound = shift.norm() * (dim as f64).sqrt() * smoothstep_derivative_max() / ramp;
    if bound >= MAX_DISPLACEMENT_NORM {
        return Err(Error::Precondition(format!(
            "translation norm bound {bound:.3} reaches the invertibility budget; widen the ramp"
        )));
    }
    let (lo, hi, s) = (shield.lo.clone(), shield.hi.clone(), shift.clone());
    let displacement: Arc<dyn Fn(&Point) -> Point + Send + Sync> = Arc::new(move |x: &Point| {
        let mut weight = 1.0;
        for i in 0..x.len() {
            weight *= plateau_1d(x[i], lo[i], hi[i], ramp);
            if weight == 0.0 {
                break;
            }
        }
        &s * weight
    });
    let fwd_disp = displacement.clone();
    let forward: MapFn = Arc::new(move |p: &Point| p + fwd_disp(p));
    Ok(CDiffeo::from_parts(
        dim,
        forward,
        picard_inverse(displacement),
        Some(shield.pad(ramp)),
    ))
}

/// Smooth profile on the unit disk/ball of chart coordinates.
pub type DiskProfile = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;

/// Tubular chart around the unit circle in the first two coordinates:
/// a point with planar radius s and remaining coordinates y sits at chart
/// position z = ((s - 1)/halfwidth, y/halfwidth) in the open unit ball,
/// with the angle of the planar part as circle coordinate.
#[derive(Debug, Clone, Copy)]
pub struct TubeChart {
    pub dim: usize,
    pub halfwidth: f64,
}

impl TubeChart {
    pub fn new(dim: usize, halfwidth: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Dimension("the tube needs at least two coordinates".into()));
        }
        if !(0.0..1.0).contains(&halfwidth) || halfwidth == 0.0 {
            return Err(Error::Precondition(format!(
                "halfwidth {halfwidth} must lie strictly between 0 and 1"
            )));
        }
        Ok(TubeChart { dim, halfwidth })
    }

    /// Disk coordinates of an ambient point, or None outside the open tube.
    pub fn disk_coords(&self, p: &Point) -> Option<DVector<f64>> {
        let s = p[0].hypot(p[1]);
        if s == 0.0 {
            return None;
        }
        let mut z = DVector::zeros(self.dim - 1);
        z[0] = (s - 1.0) / self.halfwidth;
        for i in 2..self.dim {
            z[i - 1] = p[i] / self.halfwidth;
        }
        if z.norm_squared() >= 1.0 {
            return None;
        }
        Some(z)
    }

    /// Circle coordinate in [0, 1).
    pub fn angle(&self, p: &Point) -> f64 {
        let t = p[1].atan2(p[0]) / std::f64::consts::TAU;
        if t < 0.0 {
            t + 1.0
        } else {
            t
        }
    }

    /// Ambient point of chart coordinates (angle in [0, 1), disk point z).
    pub fn embed(&self, angle: f64, z: &DVector<f64>) -> Point {
        let s = 1.0 + self.halfwidth * z[0];
        let phi = std::f64::consts::TAU * angle;
        let mut p = DVector::zeros(self.dim);
        p[0] = s * phi.cos();
        p[1] = s * phi.sin();
        for i in 2..self.dim {
            p[i] = self.halfwidth * z[i - 1];
        }
        p
    }

    /// Bounding box of the closed tube.
    pub fn support(&self) -> SupportBox {
        let mut lo = DVector::from_element(self.dim, -self.halfwidth);
        let mut hi = DVector::from_element(self.dim, self.halfwidth);
        for i in 0..2 {
            lo[i] = -1.0 - self.halfwidth;
            hi[i] = 1.0 + self.halfwidth;
        }
        SupportBox { lo, hi }
    }

    /// Rotation by `amount * profile(z)` turns of the circle coordinate at
    /// fixed disk coordinate. The disk coordinate is rotation-invariant, so
    /// the opposite amount is an exact inverse. Identity outside the tube.
    pub fn rotation(&self, profile: &DiskProfile, amount: f64) -> CDiffeo {
        let build = |sign: f64| -> MapFn {
            let chart = *self;
            let f = profile.clone();
            Arc::new(move |p: &Point| match chart.disk_coords(p) {
                None => p.clone(),
                Some(z) => {
                    let level = f(&z);
                    if level == 0.0 {
                        return p.clone();
                    }
                    let phi = std::f64::consts::TAU * sign * amount * level;
                    let (sin, cos) = phi.sin_cos();
                    let mut out = p.clone();
                    out[0] = cos * p[0] - sin * p[1];
                    out[1] = sin * p[0] + cos * p[1];
                    out
                }
            })
        };
        CDiffeo::from_parts(self.dim, build(1.0), build(-1.0), Some(self.support()))
    }
}

/// Profile equal to `level` for |z| <= inner, falling smoothly to zero at
/// `outer` < 1 (so it vanishes near the disk boundary).
pub fn disk_plateau(level: f64, inner: f64, outer: f64) -> Result<DiskProfile> {
    if !(0.0..=1.0).contains(&level) {
        return Err(Error::Precondition(format!("level {level} must lie in [0, 1]")));
    }
    if !(0.0 < inner && inner < outer && outer < 1.0) {
        return Err(Error::Precondition(format!(
            "need 0 < inner ({inner}) < outer ({outer}) < 1"
        )));
    }
    Ok(Arc::new(move |z: &DVector<f64>| {
        let r = z.norm();
        if r <= inner {
            level
        } else if r >= outer {
            0.0
        } else {
            level * smoothstep((outer - r) / (outer - inner))
        }
    }))
}

/// Probe a disk profile for the rotation-family preconditions: values in
/// [0, 1] everywhere and vanishing near the disk boundary.
pub fn validate_disk_profile(profile: &DiskProfile, disk_dim: usize, seed: u64) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sample_ball = |radius_lo: f64| loop {
        let z = DVector::from_fn(disk_dim, |_, _| rng.random_range(-1.0..1.0));
        let r = z.norm();
        if r < 1.0 && r >= radius_lo {
            return z;
        }
    };
    for _ in 0..500 {
        let z = sample_ball(0.0);
        let v = profile(&z);
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Precondition(format!("profile value {v} outside [0, 1]")));
        }
    }
    for _ in 0..200 {
        let z = sample_ball(0.96);
        let v = profile(&z);
        if v.abs() > 1e-9 {
            return Err(Error::Precondition(format!(
                "profile does not vanish near the disk boundary (value {v} at radius {})",
                z.norm()
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffeo::cdiffeo::probe_points;
    use crate::diffeo::ode::integrate_rk4;

    fn e1(dim: usize) -> Point {
        let mut v = DVector::zeros(dim);
        v[0] = 1.0;
        v
    }

    #[test]
    fn zero_time_flow_is_the_identity() {
        let flow = make_bump_flow(&DVector::zeros(2), 1.0, &e1(2), 0.0).unwrap();
        let p = DVector::from_vec(vec![0.3, -0.2]);
        assert_eq!(flow.apply(&p), p);
    }

    #[test]
    fn unit_flow_matches_an_independent_integrator() {
        let flow = make_bump_flow(&DVector::zeros(2), 1.0, &e1(2), 1.0).unwrap();
        let moved = flow.apply(&DVector::zeros(2));
        // Same field integrated by the fixed-step method at high resolution.
        let oracle = integrate_rk4(
            |_, y: &DVector<f64>| e1(2) * bump(y.norm()),
            0.0,
            1.0,
            &DVector::zeros(2),
            50_000,
        );
        assert!((moved - oracle).amax() < 1e-9);
    }

    #[test]
    fn flow_fixes_points_outside_the_ball() {
        let flow = make_bump_flow(&DVector::zeros(2), 1.0, &e1(2), 1.0).unwrap();
        let p = DVector::from_vec(vec![1.5, 0.2]);
        assert_eq!(flow.apply(&p), p);
        assert!(flow.apply(&DVector::from_vec(vec![2.0, -3.0]))[0] == 2.0);
    }

    #[test]
    fn flow_round_trips_and_caps_time() {
        let flow = make_bump_flow(&DVector::zeros(2), 1.0, &e1(2), 2.0).unwrap();
        let region = flow.support().unwrap().pad(0.5);
        assert!(flow.roundtrip_gap(&probe_points(&region, 200, 3)) < 1e-9);
        assert!(make_bump_flow(&DVector::zeros(2), 1.0, &e1(2), 100.0).is_err());
    }

    #[test]
    fn twist_inverse_is_exact_and_supported() {
        let center = DVector::from_vec(vec![0.5, -0.5, 1.0]);
        let twist = make_twist(&center, 0.8, 2.0).unwrap();
        let region = twist.support().unwrap().pad(1.0);
        let probes = probe_points(&region, 500, 5);
        assert!(twist.roundtrip_gap(&probes) < 1e-13);
        let outside = DVector::from_vec(vec![2.0, 1.0, 1.0]);
        assert_eq!(twist.apply(&outside), outside);
        // It genuinely moves interior points.
        let inside = DVector::from_vec(vec![0.7, -0.5, 1.0]);
        assert!((twist.apply(&inside) - &inside).amax() > 1e-2);
    }

    #[test]
    fn disjoint_twists_commute() {
        let a = make_twist(&DVector::from_vec(vec![-2.0, 0.0]), 0.9, 2.5).unwrap();
        let b = make_twist(&DVector::from_vec(vec![2.0, 0.0]), 0.9, -1.5).unwrap();
        let comm = CDiffeo::commutator(&a, &b);
        let region = comm.support().unwrap().pad(0.5);
        assert!(comm.identity_gap(&probe_points(&region, 1000, 9)) < 1e-12);
    }

    #[test]
    fn conjugate_of_commutator_is_commutator_of_conjugates() {
        let a = make_twist(&DVector::from_vec(vec![0.2, 0.1]), 0.7, 1.2).unwrap();
        let b = make_displacement_bump(
            &DVector::from_vec(vec![-0.3, 0.2]),
            0.8,
            &DVector::from_vec(vec![0.05, -0.1]),
        )
        .unwrap();
        let g = make_twist(&DVector::from_vec(vec![0.0, -0.4]), 1.1, -0.8).unwrap();
        let lhs = CDiffeo::conjugate(&g, &CDiffeo::commutator(&a, &b));
        let rhs = CDiffeo::commutator(&CDiffeo::conjugate(&g, &a), &CDiffeo::conjugate(&g, &b));
        let region = lhs.support().unwrap().pad(0.5);
        assert!(CDiffeo::discrepancy(&lhs, &rhs, &probe_points(&region, 400, 13)) < 1e-10);
    }

    #[test]
    fn displacement_bump_norm_is_enforced_and_inverse_tight() {
        let center = DVector::zeros(2);
        let small = make_displacement_bump(&center, 1.0, &(e1(2) * 0.2)).unwrap();
        let region = small.support().unwrap().pad(0.5);
        assert!(small.roundtrip_gap(&probe_points(&region, 500, 21)) < 1e-12);
        // Amplitude at the budget: norm = |A| * max|bump'| / radius >= 0.95.
        let too_big = e1(2) * (0.96 / bump_derivative_max());
        assert!(make_displacement_bump(&center, 1.0, &too_big).is_err());
    }

    #[test]
    fn plateau_translation_is_exact_on_the_shield() {
        let shield = SupportBox::new(
            DVector::from_vec(vec![-1.0, -1.0]),
            DVector::from_vec(vec![4.0, 1.0]),
        )
        .unwrap();
        let shift = DVector::from_vec(vec![3.0, 0.0]);
        let h = make_plateau_translation(&shield, 16.0, &shift).unwrap();
        for p in probe_points(&shield, 200, 31) {
            assert_eq!(h.apply(&p), &p + &shift);
        }
        let region = h.support().unwrap().pad(1.0);
        assert!(h.roundtrip_gap(&probe_points(&region, 300, 33)) < 1e-12);
        // Too-narrow ramp is rejected.
        assert!(make_plateau_translation(&shield, 2.0, &shift).is_err());
    }

    #[test]
    fn tube_rotation_rotates_by_the_profile() {
        let chart = TubeChart::new(3, 0.25).unwrap();
        let f = disk_plateau(0.8, 0.4, 0.9).unwrap();
        let rot = chart.rotation(&f, 1.0);
        // Core circle point: profile value is the plateau level.
        let z = DVector::zeros(2);
        let p = chart.embed(0.1, &z);
        let moved = rot.apply(&p);
        let turned = chart.angle(&moved) - chart.angle(&p);
        let turned = turned - turned.round();
        assert!((turned.abs() - 0.2).abs() < 1e-12, "turn {turned}");
        assert!((chart.disk_coords(&moved).unwrap() - z).amax() < 1e-12);
        // Exact inverse and identity outside the tube.
        let region = chart.support().pad(0.5);
        assert!(rot.roundtrip_gap(&probe_points(&region, 500, 41)) < 1e-13);
        let outside = DVector::from_vec(vec![0.2, 0.1, 0.5]);
        assert_eq!(rot.apply(&outside), outside);
    }

    #[test]
    fn disk_profiles_validate() {
        let good = disk_plateau(1.0, 0.5, 0.9).unwrap();
        validate_disk_profile(&good, 2, 1).unwrap();
        let bad: DiskProfile = Arc::new(|_z: &DVector<f64>| 0.5);
        assert!(validate_disk_profile(&bad, 2, 1).is_err());
        let negative: DiskProfile = Arc::new(|z: &DVector<f64>| -0.1 * bump(z.norm()));
        assert!(validate_disk_profile(&negative, 2, 1).is_err());
    }
}
