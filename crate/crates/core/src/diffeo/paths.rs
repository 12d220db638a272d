//! Paths of compactly supported diffeomorphisms: rotation families on the
//! tubular chart, horizontality bookkeeping, smooth time reparametrization,
//! concatenation with form transport, and subdivision into small segments.

use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::geom::Point;
use crate::torus::smoothstep;

use super::cdiffeo::CDiffeo;
use super::generators::{validate_disk_profile, DiskProfile, TubeChart};
use super::norms::v_eps_norm;

/// Time-indexed family of diffeomorphisms.
pub type PathFn = Arc<dyn Fn(f64) -> CDiffeo + Send + Sync>;

/// 1-form evaluator on the suspension cylinder: (circle coordinate, fiber
/// point) to components, slot 0 along the circle direction.
pub type FormFn = Arc<dyn Fn(f64, &Point) -> DVector<f64> + Send + Sync>;

/// Central-difference step for path time derivatives.
pub const PATH_FD_STEP: f64 = 1e-5;

/// A path [0, 1] -> Diff_c, with declared constancy intervals at both ends
/// ("horizontal" pieces), a periodicity flag (the endpoint acts as a return
/// map), and a flag promising the path starts at the identity.
#[derive(Clone)]
pub struct DiffeoPath {
    dim: usize,
    at: PathFn,
    horizontal: (f64, f64),
    periodic: bool,
    starts_at_identity: bool,
}

impl std::fmt::Debug for DiffeoPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiffeoPath")
            .field("dim", &self.dim)
            .field("horizontal", &self.horizontal)
            .field("periodic", &self.periodic)
            .field("starts_at_identity", &self.starts_at_identity)
            .finish()
    }
}

impl DiffeoPath {
    /// Wrap a time-indexed family. `horizontal = (a, b)` declares the path
    /// constant on [0, a] and on [b, 1] (use (0, 1) for no declaration).
    pub fn new(
        dim: usize,
        at: PathFn,
        horizontal: (f64, f64),
        periodic: bool,
        starts_at_identity: bool,
    ) -> Result<Self> {
        let (a, b) = horizontal;
        if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) {
            return Err(Error::Precondition(format!(
                "horizontality marks ({a}, {b}) must lie in [0, 1]"
            )));
        }
        Ok(DiffeoPath { dim, at, horizontal, periodic, starts_at_identity })
    }

    /// The constant path at one diffeomorphism.
    pub fn constant(d: CDiffeo) -> Self {
        let dim = d.dim();
        let at: PathFn = Arc::new(move |_| d.clone());
        DiffeoPath {
            dim,
            at,
            horizontal: (1.0, 0.0),
            periodic: true,
            starts_at_identity: false,
        }
    }

    /// The constant identity path.
    pub fn constant_identity(dim: usize) -> Self {
        let mut p = DiffeoPath::constant(CDiffeo::identity(dim));
        p.starts_at_identity = true;
        p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizontal(&self) -> (f64, f64) {
        self.horizontal
    }

    pub fn periodic(&self) -> bool {
        self.periodic
    }

    pub fn starts_at_identity(&self) -> bool {
        self.starts_at_identity
    }

    /// The diffeomorphism at a time (clamped into [0, 1]).
    pub fn at(&self, t: f64) -> CDiffeo {
        (self.at)(t.clamp(0.0, 1.0))
    }

    /// The endpoint diffeomorphism.
    pub fn endpoint(&self) -> CDiffeo {
        self.at(1.0)
    }

    /// Starts at the identity and is constant on nonempty intervals at both
    /// ends: the shape concatenation requires.
    pub fn is_adjusted(&self) -> bool {
        let (a, b) = self.horizontal;
        self.starts_at_identity && a > 0.0 && b < 1.0
    }

    /// Probe the declared invariants: identity at time zero (when flagged)
    /// and constancy on the declared horizontality intervals.
    pub fn check_invariants(&self, probes: &[Point], tol: f64) -> Result<()> {
        if self.starts_at_identity {
            let gap = self.at(0.0).identity_gap(probes);
            if gap > tol {
                return Err(Error::Precondition(format!(
                    "path flagged as starting at the identity misses by {gap}"
                )));
            }
        }
        let (a, b) = self.horizontal;
        for (lo, hi) in [(0.0, a), (b, 1.0)] {
            if hi <= lo {
                continue;
            }
            for frac in [0.0, 0.5, 1.0] {
                let t = lo + frac * (hi - lo);
                let gap = CDiffeo::discrepancy(&self.at(t), &self.at(lo), probes);
                if gap > tol {
                    return Err(Error::Precondition(format!(
                        "path declared constant on [{lo}, {hi}] varies by {gap} at t = {t}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// The rotation family on the tubular chart: at time t, rotate the circle
/// coordinate by t * profile(z) turns. The profile is probe-validated
/// (values in [0, 1], vanishing near the disk boundary). Periodic in the
/// suspension sense: the endpoint is the return map.
pub fn make_rotation_path(chart: &TubeChart, profile: &DiskProfile) -> Result<DiffeoPath> {
    validate_disk_profile(profile, chart.dim - 1, 0x0a11ce)?;
    let chart = *chart;
    let f = profile.clone();
    let at: PathFn = Arc::new(move |t| chart.rotation(&f, t));
    DiffeoPath::new(chart.dim, at, (0.0, 1.0), true, true)
}

/// Smoothly reparametrize time so the path is constant on [0, margin] and
/// [1 - margin, 1] without changing its track or endpoint.
pub fn adjust(path: &DiffeoPath, margin: f64) -> Result<DiffeoPath> {
    if !(0.0 < margin && margin < 0.5) {
        return Err(Error::Precondition(format!("margin {margin} must lie strictly in (0, 0.5)")));
    }
    let inner = path.clone();
    let at: PathFn = Arc::new(move |t| {
        let u = smoothstep(((t - margin) / (1.0 - 2.0 * margin)).clamp(0.0, 1.0));
        inner.at(u)
    });
    DiffeoPath::new(
        path.dim,
        at,
        (margin, 1.0 - margin),
        path.periodic,
        path.starts_at_identity,
    )
}

/// Leaf velocity of the path's suspension at circle coordinate s and fiber
/// point y: the time derivative of tau -> gamma(tau)(gamma(s)^{-1}(y)).
/// Central difference in the interior; second-order one-sided stencils
/// within h of the ends. A first-order chord there would put an O(h) spur
/// normal to the motion, which integrates into a visible drift.
pub fn path_velocity(path: &DiffeoPath, s: f64, y: &Point, h: f64) -> Point {
    let x0 = path.at(s).apply_inverse(y);
    if s >= h && s + h <= 1.0 {
        (path.at(s + h).apply(&x0) - path.at(s - h).apply(&x0)) / (2.0 * h)
    } else if s < h {
        // grouped so a path that fixes y gives exactly zero
        let near = path.at(s + h).apply(&x0) - y;
        let far = path.at(s + 2.0 * h).apply(&x0) - y;
        (4.0 * near - far) / (2.0 * h)
    } else {
        let near = path.at(s - h).apply(&x0) - y;
        let far = path.at(s - 2.0 * h).apply(&x0) - y;
        (far - 4.0 * near) / (2.0 * h)
    }
}

/// A path together with a 1-form on its suspension cylinder.
#[derive(Clone)]
pub struct PairedPath {
    pub path: DiffeoPath,
    pub alpha: FormFn,
}

impl PairedPath {
    /// Pair with the form dual to the circle direction: nondegenerate on
    /// every suspension because leaf tangents always advance the circle.
    pub fn product(path: DiffeoPath) -> Self {
        let dim = path.dim();
        let alpha: FormFn = Arc::new(move |_s, _y| {
            let mut c = DVector::zeros(dim + 1);
            c[0] = 1.0;
            c
        });
        PairedPath { path, alpha }
    }

    /// Smallest |form on the leaf tangent (1, V)| over probe points: the
    /// quantitative nondegeneracy of the pairing.
    pub fn alpha_min_on_tangents(&self, probes: &[(f64, Point)]) -> f64 {
        probes.iter().fold(f64::INFINITY, |worst, (s, y)| {
            let v = path_velocity(&self.path, *s, y, PATH_FD_STEP);
            let c = (self.alpha)(*s, y);
            let mut pairing = c[0];
            for i in 0..v.len() {
                pairing += c[i + 1] * v[i];
            }
            worst.min(pairing.abs())
        })
    }
}

/// Concatenate two adjusted paired paths: run the first on [0, 1/2], then
/// the second composed onto the first endpoint. The endpoint law
/// gamma(1) = gamma2(1) . gamma1(1) holds by construction; the assembled
/// form is the pullback of each piece under its time rescaling, continuous
/// across the seam because both pieces are horizontal there.
pub fn concatenate(p1: &PairedPath, p2: &PairedPath) -> Result<PairedPath> {
    if !p1.path.is_adjusted() || !p2.path.is_adjusted() {
        return Err(Error::Precondition(
            "concatenation needs adjusted paths (identity start, horizontal ends)".into(),
        ));
    }
    if p1.path.dim() != p2.path.dim() {
        return Err(Error::Dimension(format!(
            "paths have dimensions {} and {}",
            p1.path.dim(),
            p2.path.dim()
        )));
    }
    let first = p1.path.clone();
    let second = p2.path.clone();
    let first_end = p1.path.endpoint();
    let at: PathFn = Arc::new(move |t| {
        if t <= 0.5 {
            first.at(2.0 * t)
        } else {
            CDiffeo::compose(&second.at(2.0 * t - 1.0), &first_end)
        }
    });
    let (a1, _) = p1.path.horizontal();
    let (_, b2) = p2.path.horizontal();
    let path = DiffeoPath::new(
        p1.path.dim(),
        at,
        (0.5 * a1.max(0.0), 0.5 * (1.0 + b2.min(1.0))),
        false,
        true,
    )?;
    let alpha1 = p1.alpha.clone();
    let alpha2 = p2.alpha.clone();
    let alpha: FormFn = Arc::new(move |s, y| {
        let mut c = if s <= 0.5 { alpha1(2.0 * s, y) } else { alpha2(2.0 * s - 1.0, y) };
        c[0] *= 2.0;
        c
    });
    Ok(PairedPath { path, alpha })
}

/// Split a path starting at the identity into q segments
/// t -> gamma((i + t)/q) . gamma(i/q)^{-1}, each starting at the identity;
/// their endpoints compose (last first) back to gamma(1).
pub fn subdivide_path(gamma: &DiffeoPath, q: usize) -> Result<Vec<DiffeoPath>> {
    if q == 0 {
        return Err(Error::Precondition("subdivision needs q >= 1".into()));
    }
    if !gamma.starts_at_identity() {
        return Err(Error::Precondition("subdivision needs a path starting at the identity".into()));
    }
    (0..q)
        .map(|i| {
            let inner = gamma.clone();
            let base = gamma.at(i as f64 / q as f64).inverse();
            let at: PathFn = Arc::new(move |t| {
                CDiffeo::compose(&inner.at((i as f64 + t) / q as f64), &base)
            });
            DiffeoPath::new(gamma.dim(), at, (0.0, 1.0), false, true)
        })
        .collect()
}

/// Largest segment-endpoint displacement norm for each subdivision count:
/// the sizes shrink as the subdivision refines.
pub fn subdivision_norms(
    gamma: &DiffeoPath,
    counts: &[usize],
    samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    counts
        .iter()
        .map(|&q| {
            let segments = subdivide_path(gamma, q)?;
            let mut worst = 0.0f64;
            for (i, seg) in segments.iter().enumerate() {
                worst = worst.max(v_eps_norm(&seg.endpoint(), samples, seed ^ i as u64)?);
            }
            Ok(worst)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffeo::cdiffeo::{probe_points, SupportBox};
    use crate::diffeo::generators::disk_plateau;

    fn chart() -> TubeChart {
        TubeChart::new(3, 0.25).unwrap()
    }

    fn profile() -> DiskProfile {
        disk_plateau(0.7, 0.4, 0.9).unwrap()
    }

    fn tube_probes(n: usize, seed: u64) -> Vec<Point> {
        probe_points(&chart().support().pad(0.3), n, seed)
    }

    #[test]
    fn rotation_path_starts_at_identity_and_reaches_the_turn() {
        let path = make_rotation_path(&chart(), &profile()).unwrap();
        let probes = tube_probes(200, 3);
        path.check_invariants(&probes, 1e-12).unwrap();
        // Endpoint turns the core circle by the plateau level.
        let p = chart().embed(0.2, &DVector::zeros(2));
        let turned = chart().angle(&path.endpoint().apply(&p)) - 0.2;
        let turned = turned - turned.round();
        assert!((turned - 0.7).abs().min((turned + 0.3).abs()) < 1e-12, "turn {turned}");
        // Exact pointwise inverse along the path.
        for t in [0.3, 0.8] {
            assert!(path.at(t).roundtrip_gap(&probes) < 1e-13);
        }
    }

    #[test]
    fn adjustment_freezes_the_ends_without_moving_the_endpoint() {
        let path = make_rotation_path(&chart(), &profile()).unwrap();
        assert!(!path.is_adjusted());
        let adjusted = adjust(&path, 0.1).unwrap();
        assert!(adjusted.is_adjusted());
        let probes = tube_probes(150, 5);
        adjusted.check_invariants(&probes, 1e-12).unwrap();
        assert!(CDiffeo::discrepancy(&adjusted.endpoint(), &path.endpoint(), &probes) == 0.0);
        // Constant near both ends.
        assert!(CDiffeo::discrepancy(&adjusted.at(0.05), &adjusted.at(0.0), &probes) == 0.0);
        assert!(CDiffeo::discrepancy(&adjusted.at(0.95), &adjusted.at(1.0), &probes) == 0.0);
    }

    #[test]
    fn concatenating_identity_paths_gives_the_identity_path() {
        let id_path = PairedPath::product(DiffeoPath::constant_identity(2));
        let joined = concatenate(&id_path, &id_path).unwrap();
        let probes = probe_points(
            &SupportBox::new(
                DVector::from_vec(vec![-1.0, -1.0]),
                DVector::from_vec(vec![1.0, 1.0]),
            )
            .unwrap(),
            100,
            7,
        );
        for t in [0.0, 0.3, 0.5, 0.8, 1.0] {
            assert!(joined.path.at(t).identity_gap(&probes) == 0.0);
        }
    }

    #[test]
    fn concatenation_endpoint_law_doubles_the_rotation() {
        let single = adjust(&make_rotation_path(&chart(), &profile()).unwrap(), 0.1).unwrap();
        let paired = PairedPath::product(single);
        let joined = concatenate(&paired, &paired).unwrap();
        let doubled = chart().rotation(&profile(), 2.0);
        let probes = tube_probes(300, 11);
        assert!(CDiffeo::discrepancy(&joined.path.endpoint(), &doubled, &probes) < 1e-12);
        // Unadjusted inputs are rejected.
        let raw = PairedPath::product(make_rotation_path(&chart(), &profile()).unwrap());
        assert!(concatenate(&raw, &raw).is_err());
    }

    #[test]
    fn concatenated_form_stays_nondegenerate_on_tangents() {
        let single = adjust(&make_rotation_path(&chart(), &profile()).unwrap(), 0.1).unwrap();
        let paired = PairedPath::product(single);
        let joined = concatenate(&paired, &paired).unwrap();
        let mut probes = Vec::new();
        for (i, y) in tube_probes(60, 13).into_iter().enumerate() {
            probes.push((i as f64 / 60.0, y));
        }
        let floor = joined.alpha_min_on_tangents(&probes);
        assert!(floor > 0.5, "pairing floor {floor}");
    }

    #[test]
    fn subdividing_by_two_halves_the_rotation() {
        let path = make_rotation_path(&chart(), &profile()).unwrap();
        let segments = subdivide_path(&path, 2).unwrap();
        assert_eq!(segments.len(), 2);
        let probes = tube_probes(200, 17);
        let half_profile = profile();
        for seg in &segments {
            for t in [0.25, 0.6, 1.0] {
                let expected = chart().rotation(&half_profile, 0.5 * t);
                assert!(
                    CDiffeo::discrepancy(&seg.at(t), &expected, &probes) < 1e-12,
                    "segment differs from the half-speed rotation at t = {t}"
                );
            }
        }
        // Telescoping: endpoints compose back to the original endpoint.
        let composed = CDiffeo::compose(&segments[1].endpoint(), &segments[0].endpoint());
        assert!(CDiffeo::discrepancy(&composed, &path.endpoint(), &probes) < 1e-10);
    }

    #[test]
    fn single_segment_subdivision_is_the_original_path() {
        let path = make_rotation_path(&chart(), &profile()).unwrap();
        let only = &subdivide_path(&path, 1).unwrap()[0];
        let probes = tube_probes(150, 19);
        for t in [0.0, 0.4, 1.0] {
            assert!(CDiffeo::discrepancy(&only.at(t), &path.at(t), &probes) < 1e-13);
        }
    }

    #[test]
    fn segment_norms_shrink_with_refinement() {
        let path = make_rotation_path(&chart(), &profile()).unwrap();
        let norms = subdivision_norms(&path, &[1, 2, 4, 8], 600, 23).unwrap();
        for pair in norms.windows(2) {
            assert!(pair[1] < pair[0], "norms not decreasing: {norms:?}");
        }
        // Telescoping at q = 8 to the stated tolerance.
        let segments = subdivide_path(&path, 8).unwrap();
        let mut composed = CDiffeo::identity(3);
        for seg in &segments {
            composed = CDiffeo::compose(&seg.endpoint(), &composed);
        }
        let probes = tube_probes(200, 29);
        assert!(CDiffeo::discrepancy(&composed, &path.endpoint(), &probes) < 1e-10);
    }
}
