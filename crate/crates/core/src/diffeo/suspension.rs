//! Suspension foliations: a path of compactly supported diffeomorphisms
//! induces a foliation of the cylinder (circle) x (fiber space) whose leaves
//! follow the path's time-derivative field. Tracing a leaf once around the
//! circle recovers the path endpoint as the return map.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::geom::Point;

use super::cdiffeo::SupportBox;
use super::ode::{integrate, OdeOptions};
use super::paths::{path_velocity, PairedPath, PATH_FD_STEP};

/// Integration tolerance for leaf tracing.
pub const TRACE_TOL: f64 = 1e-10;

/// Foliation of (circle) x (fiber) swept by a paired path. Outside the
/// moving set the leaves are horizontal circles, so the foliation is the
/// product there.
pub struct SuspensionFoliation {
    source: PairedPath,
    fd_step: f64,
    opts: OdeOptions,
}

/// Build the suspension of a paired path. The path must either be periodic
/// (its endpoint acts as the return map) or adjusted, so the leaves close up
/// coherently across the circle seam.
pub fn suspend(p: &PairedPath) -> Result<SuspensionFoliation> {
    if !(p.path.periodic() || p.path.is_adjusted()) {
        return Err(Error::Precondition(
            "suspension needs a periodic or adjusted path".into(),
        ));
    }
    Ok(SuspensionFoliation {
        source: p.clone(),
        fd_step: PATH_FD_STEP,
        opts: OdeOptions { tol: TRACE_TOL, ..OdeOptions::default() },
    })
}

impl SuspensionFoliation {
    /// Fiber dimension.
    pub fn dim(&self) -> usize {
        self.source.path.dim()
    }

    pub fn source(&self) -> &PairedPath {
        &self.source
    }

    /// The moving set: a box containing every point any time slice moves,
    /// from the union of time-slice support boxes on a sample grid. None
    /// means no slice declares support (the path is identity everywhere).
    pub fn support(&self) -> Option<SupportBox> {
        let mut acc: Option<SupportBox> = None;
        for i in 0..=8 {
            let t = i as f64 / 8.0;
            acc = SupportBox::union_opt(acc.as_ref(), self.source.path.at(t).support());
        }
        acc
    }

    /// Leaf velocity in the fiber at circle coordinate s and fiber point y.
    pub fn leaf_velocity(&self, s: f64, y: &Point) -> Point {
        path_velocity(&self.source.path, s, y, self.fd_step)
    }

    /// Trace the leaf through (s0, y0) to circle coordinate s1.
    pub fn trace(&self, s0: f64, s1: f64, y0: &Point) -> Result<Point> {
        integrate(
            |s, y| path_velocity(&self.source.path, s, y, self.fd_step),
            s0,
            s1,
            y0,
            &self.opts,
        )
    }

    /// Return map after one loop around the circle.
    pub fn holonomy(&self, y0: &Point) -> Result<Point> {
        self.trace(0.0, 1.0, y0)
    }

    /// Largest gap between the traced return map and the path endpoint over
    /// the probe set.
    pub fn holonomy_gap(&self, probes: &[Point]) -> Result<f64> {
        let end = self.source.path.endpoint();
        let mut worst = 0.0f64;
        for y in probes {
            worst = worst.max((self.holonomy(y)? - end.apply(y)).amax());
        }
        Ok(worst)
    }

    /// Largest distance a traced loop moves each probe point. Zero at points
    /// the path never touches: there the leaf is the horizontal circle.
    pub fn holonomy_displacement(&self, probes: &[Point]) -> Result<f64> {
        let mut worst = 0.0f64;
        for y in probes {
            worst = worst.max((self.holonomy(y)? - y).amax());
        }
        Ok(worst)
    }

    /// Pair the carried 1-form with the leaf tangent (1, V) at (s, y).
    pub fn alpha_on_tangent(&self, s: f64, y: &Point) -> f64 {
        let v = self.leaf_velocity(s, y);
        let c = (self.source.alpha)(s, y);
        let mut pairing = c[0];
        for i in 0..v.len() {
            pairing += c[i + 1] * v[i];
        }
        pairing
    }

    /// Smallest |form on leaf tangent| over probes: quantitative
    /// nondegeneracy of the pairing on the suspension.
    pub fn alpha_floor(&self, probes: &[(f64, Point)]) -> f64 {
        probes
            .iter()
            .fold(f64::INFINITY, |worst, (s, y)| worst.min(self.alpha_on_tangent(*s, y).abs()))
    }
}

/// The suspension tangent of a leaf, written in the solid-torus chart: the
/// circle coordinate becomes the disk angle at unit radius and the tube
/// angle becomes the core direction, both measured in turns.
pub fn torus_boundary_tangent(s: f64, turn_rate: f64) -> DVector<f64> {
    use std::f64::consts::TAU;
    let phi = TAU * s;
    DVector::from_vec(vec![-phi.sin(), phi.cos(), turn_rate])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffeo::cdiffeo::probe_points;
    use crate::diffeo::generators::{disk_plateau, TubeChart};
    use crate::diffeo::paths::{adjust, make_rotation_path, DiffeoPath};
    use crate::torus::SolidTorusModel;
    use std::f64::consts::TAU;

    fn chart() -> TubeChart {
        TubeChart::new(2, 0.3).unwrap()
    }

    fn rotation(level: f64) -> DiffeoPath {
        make_rotation_path(&chart(), &disk_plateau(level, 0.4, 0.9).unwrap()).unwrap()
    }

    #[test]
    fn constant_identity_path_suspends_to_the_product() {
        let fol = suspend(&PairedPath::product(DiffeoPath::constant_identity(2))).unwrap();
        let probes =
            probe_points(&SupportBox::ball(&DVector::zeros(2), 2.0).unwrap(), 40, 3);
        for y in &probes {
            assert_eq!(fol.holonomy(y).unwrap(), *y);
        }
        assert_eq!(fol.holonomy_gap(&probes).unwrap(), 0.0);
        assert!(fol.support().is_none());
    }

    #[test]
    fn rotation_holonomy_matches_the_endpoint_turn() {
        let fol = suspend(&PairedPath::product(rotation(0.7))).unwrap();
        let probes = probe_points(&chart().support(), 25, 5);
        let gap = fol.holonomy_gap(&probes).unwrap();
        assert!(gap < 1e-8, "holonomy gap {gap}");
        // The core circle advances by the plateau level.
        let y = chart().embed(0.1, &DVector::zeros(1));
        let out = fol.holonomy(&y).unwrap();
        let turned = chart().angle(&out) - 0.1;
        let turned = turned - turned.round();
        assert!(
            (turned - 0.7).abs().min((turned + 0.3).abs()) < 1e-8,
            "core circle turned by {turned}"
        );
    }

    #[test]
    fn leaves_outside_the_moving_set_are_horizontal_circles() {
        let fol = suspend(&PairedPath::product(rotation(0.6))).unwrap();
        let support = fol.support().unwrap();
        let mut outside = Vec::new();
        for y in probe_points(&support.pad(3.0), 200, 7) {
            if !support.contains(&y) {
                outside.push(y);
            }
        }
        assert!(outside.len() > 20);
        for y in &outside {
            assert_eq!(fol.trace(0.0, 1.0, y).unwrap(), *y);
        }
        // Points inside the tube where the profile vanishes also sit still.
        let rim = chart().embed(0.3, &DVector::from_vec(vec![0.95]));
        assert_eq!(fol.holonomy(&rim).unwrap(), rim);
    }

    #[test]
    fn adjusted_paths_suspend_and_raw_open_paths_do_not() {
        let raw = PairedPath::product(DiffeoPath::new(
            2,
            std::sync::Arc::new(|_| crate::diffeo::CDiffeo::identity(2)),
            (0.0, 1.0),
            false,
            false,
        )
        .unwrap());
        assert!(suspend(&raw).is_err());
        let adjusted = PairedPath::product(adjust(&rotation(0.5), 0.1).unwrap());
        assert!(suspend(&adjusted).is_ok());
    }

    #[test]
    fn torus_boundary_form_pairs_positively_with_suspension_tangents() {
        // The boundary of the foliated solid torus carries the form
        // omega(radial, -): pairing it with suspension leaf tangents of the
        // matching rotation path must stay away from zero, and on the core
        // circle it equals 1 + a^2.
        let a = 0.5;
        let model = SolidTorusModel::standard(a).unwrap();
        let fol = suspend(&PairedPath::product(rotation(a))).unwrap();
        let chart = chart();
        let mut floor = f64::INFINITY;
        for i in 0..12 {
            for j in 0..12 {
                let s = i as f64 / 12.0;
                let tube_angle = j as f64 / 12.0;
                for z in [0.0, 0.3, 0.8] {
                    let y = chart.embed(tube_angle, &DVector::from_vec(vec![z]));
                    let v = fol.leaf_velocity(s, &y);
                    // Angular speed of the tube coordinate, in turns.
                    let rr = y[0] * y[0] + y[1] * y[1];
                    let turn_rate = (-y[1] * v[0] + y[0] * v[1]) / (TAU * rr);
                    // Boundary point of the solid torus at disk angle TAU*s,
                    // core coordinate = tube angle in radians.
                    let p = DVector::from_vec(vec![
                        (TAU * s).cos(),
                        (TAU * s).sin(),
                        TAU * tube_angle,
                    ]);
                    let omega = model.omega_form(&p).unwrap();
                    let radial = DVector::from_vec(vec![p[0], p[1], 0.0]);
                    let alpha = omega.transpose() * radial;
                    let tangent = torus_boundary_tangent(s, turn_rate);
                    let value = alpha.dot(&tangent);
                    floor = floor.min(value.abs());
                    if z == 0.0 {
                        assert!(
                            (value - (1.0 + a * a)).abs() < 1e-8,
                            "core pairing {value}"
                        );
                    }
                }
            }
        }
        assert!(floor > 0.5, "pairing floor {floor}");
    }
}


