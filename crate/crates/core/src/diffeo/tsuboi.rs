//! Commutator identities in the compactly supported diffeomorphism group:
//! writing a commutator as a product of conjugates of a displacing map, and
//! checking a six-commutator fragmentation of a given diffeomorphism.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Point;

use super::cdiffeo::{probe_points, CDiffeo, SupportBox};
use super::generators::make_bump_flow;

/// Discrepancy below which the conjugate-product identity counts as holding.
pub const TSUBOI_TOL: f64 = 1e-9;

/// Outcome of checking the conjugate-product form of a commutator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsuboiReport {
    pub dim: usize,
    pub probes: usize,
    /// Both commutator entries are supported inside the given region.
    pub support_condition: bool,
    /// The displacing map moves the region entirely off itself.
    pub displacement_condition: bool,
    pub factor_names: Vec<String>,
    pub max_discrepancy: f64,
    pub identity_holds: bool,
    pub pass: bool,
}

fn contained(support: Option<&SupportBox>, region: &SupportBox) -> bool {
    match support {
        None => true,
        Some(b) => region.contains_box(b),
    }
}

/// Probe whether h moves the region entirely off itself: every corner and
/// net sample of the region must land outside it.
fn displaces(h: &CDiffeo, region: &SupportBox, seed: u64) -> bool {
    let dim = region.dim();
    for mask in 0..(1usize << dim) {
        let mut corner = region.lo.clone();
        for i in 0..dim {
            if mask & (1 << i) != 0 {
                corner[i] = region.hi[i];
            }
        }
        if region.contains(&h.apply(&corner)) {
            return false;
        }
    }
    probe_points(region, 200, seed)
        .iter()
        .all(|x| !region.contains(&h.apply(x)))
}

/// The four conjugates of h and its inverse whose product reproduces the
/// commutator of a and b, given the support and displacement conditions.
/// Ordered outermost first.
pub fn tsuboi_factors(a: &CDiffeo, b: &CDiffeo, h: &CDiffeo) -> Vec<(String, CDiffeo)> {
    let h_inv = h.inverse();
    let c = CDiffeo::conjugate(&h_inv, a);
    let bc = CDiffeo::compose(b, &c);
    vec![
        ("h".into(), h.clone()),
        ("c h^-1 c^-1".into(), CDiffeo::conjugate(&c, &h_inv)),
        ("(bc) h (bc)^-1".into(), CDiffeo::conjugate(&bc, h)),
        ("b h^-1 b^-1".into(), CDiffeo::conjugate(b, &h_inv)),
    ]
}

fn probe_region(parts: &[&CDiffeo], region: &SupportBox) -> SupportBox {
    let mut acc = region.clone();
    for d in parts {
        if let Some(s) = d.support() {
            acc = acc.union(s);
        }
    }
    acc.pad(0.5)
}

fn max_gap(lhs: &CDiffeo, rhs: &CDiffeo, probes: &[Point]) -> f64 {
    let mut worst = 0.0f64;
    for x in probes {
        worst = worst.max((lhs.apply(x) - rhs.apply(x)).amax());
    }
    worst
}

/// Check the conjugate-product form of one commutator. Precondition
/// violations are flagged in the report and the comparison still runs, so
/// broken setups act as negative controls.
pub fn tsuboi_verify(
    a: &CDiffeo,
    b: &CDiffeo,
    h: &CDiffeo,
    region: &SupportBox,
    probes: usize,
    seed: u64,
) -> Result<TsuboiReport> {
    let dim = a.dim();
    if b.dim() != dim || h.dim() != dim || region.dim() != dim {
        return Err(Error::Dimension(format!(
            "mixed dimensions: a {}, b {}, h {}, region {}",
            dim,
            b.dim(),
            h.dim(),
            region.dim()
        )));
    }
    let support_condition =
        contained(a.support(), region) && contained(b.support(), region);
    let displacement_condition = displaces(h, region, seed ^ 0x5eed);

    let factors = tsuboi_factors(a, b, h);
    let mut rhs = CDiffeo::identity(dim);
    for (_, f) in factors.iter().rev() {
        rhs = CDiffeo::compose(f, &rhs);
    }
    let lhs = CDiffeo::commutator(a, b);

    let sample_box = probe_region(&[a, b, h], region);
    let points = probe_points(&sample_box, probes, seed);
    let max_discrepancy = max_gap(&lhs, &rhs, &points);
    if !max_discrepancy.is_finite() {
        return Err(Error::Degenerate("non-finite commutator discrepancy".into()));
    }
    let identity_holds = max_discrepancy < TSUBOI_TOL;
    Ok(TsuboiReport {
        dim,
        probes: points.len(),
        support_condition,
        displacement_condition,
        factor_names: factors.into_iter().map(|(n, _)| n).collect(),
        max_discrepancy,
        identity_holds,
        pass: support_condition && displacement_condition && identity_holds,
    })
}

/// Check the product form for a product of commutators: each pair
/// contributes its four conjugate factors, so r pairs give 4r factors.
pub fn tsuboi_corollary_verify(
    pairs: &[(CDiffeo, CDiffeo)],
    h: &CDiffeo,
    region: &SupportBox,
    probes: usize,
    seed: u64,
) -> Result<TsuboiReport> {
    if pairs.is_empty() {
        return Err(Error::Precondition("need at least one commutator pair".into()));
    }
    let dim = h.dim();
    let mut support_condition = true;
    let mut factor_names = Vec::new();
    let mut rhs = CDiffeo::identity(dim);
    let mut lhs = CDiffeo::identity(dim);
    let mut parts: Vec<&CDiffeo> = vec![h];
    for (a, b) in pairs {
        if a.dim() != dim || b.dim() != dim {
            return Err(Error::Dimension("mixed dimensions in commutator pairs".into()));
        }
        support_condition =
            support_condition && contained(a.support(), region) && contained(b.support(), region);
        parts.push(a);
        parts.push(b);
    }
    // lhs = product of commutators, leftmost applied last
    for (a, b) in pairs.iter().rev() {
        lhs = CDiffeo::compose(&CDiffeo::commutator(a, b), &lhs);
    }
    let mut all_factors = Vec::new();
    for (a, b) in pairs {
        all_factors.extend(tsuboi_factors(a, b, h));
    }
    for (name, f) in all_factors.iter().rev() {
        rhs = CDiffeo::compose(f, &rhs);
        factor_names.push(name.clone());
    }
    factor_names.reverse();
    let displacement_condition = displaces(h, region, seed ^ 0x5eed);
    let points = probe_points(&probe_region(&parts, region), probes, seed);
    let max_discrepancy = max_gap(&lhs, &rhs, &points);
    if !max_discrepancy.is_finite() {
        return Err(Error::Degenerate("non-finite commutator discrepancy".into()));
    }
    let identity_holds = max_discrepancy < TSUBOI_TOL;
    Ok(TsuboiReport {
        dim,
        probes: points.len(),
        support_condition,
        displacement_condition,
        factor_names,
        max_discrepancy,
        identity_holds,
        pass: support_condition && displacement_condition && identity_holds,
    })
}

/// Recipe for a bump-field flow, the shape of vector field used as a
/// commutator witness. Zero time or a zero direction realizes the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpFieldSpec {
    pub center: Vec<f64>,
    pub radius: f64,
    pub direction: Vec<f64>,
    pub time: f64,
}

impl BumpFieldSpec {
    pub fn identity(dim: usize) -> Self {
        BumpFieldSpec {
            center: vec![0.0; dim],
            radius: 1.0,
            direction: vec![0.0; dim],
            time: 0.0,
        }
    }

    pub fn realize(&self) -> Result<CDiffeo> {
        let dim = self.center.len();
        if self.direction.len() != dim {
            return Err(Error::Dimension("field direction has the wrong length".into()));
        }
        let direction = Point::from_vec(self.direction.clone());
        if self.time == 0.0 || direction.norm() == 0.0 {
            return Ok(CDiffeo::identity(dim));
        }
        make_bump_flow(
            &Point::from_vec(self.center.clone()),
            self.radius,
            &direction,
            self.time,
        )
    }
}

/// Outcome of checking a six-commutator fragmentation of a diffeomorphism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FragmentationReport {
    pub dim: usize,
    pub probes: usize,
    pub max_discrepancy: f64,
    pub matches: bool,
}

/// Number of commutator slots in the fragmentation form.
pub const FRAGMENTATION_SLOTS: usize = 6;

/// Compare g against the product of six commutators built from the supplied
/// witnesses. A discrepancy is reported, never raised: mismatched witnesses
/// are a finding.
pub fn fragmentation_verify(
    g: &CDiffeo,
    sigmas: &[CDiffeo],
    fields: &[BumpFieldSpec],
    probes: usize,
    seed: u64,
) -> Result<FragmentationReport> {
    if sigmas.len() != FRAGMENTATION_SLOTS || fields.len() != FRAGMENTATION_SLOTS {
        return Err(Error::Precondition(format!(
            "fragmentation form takes exactly {FRAGMENTATION_SLOTS} witness slots"
        )));
    }
    let dim = g.dim();
    let mut product = CDiffeo::identity(dim);
    let mut parts: Vec<CDiffeo> = vec![g.clone()];
    for (sigma, field) in sigmas.iter().zip(fields).rev() {
        if sigma.dim() != dim {
            return Err(Error::Dimension("witness dimension mismatch".into()));
        }
        let flow = field.realize()?;
        let bracket = CDiffeo::commutator(sigma, &flow);
        parts.push(sigma.clone());
        parts.push(flow);
        product = CDiffeo::compose(&bracket, &product);
    }
    let region = {
        let mut acc: Option<SupportBox> = g.support().cloned();
        for d in &parts {
            acc = SupportBox::union_opt(acc.as_ref(), d.support());
        }
        match acc {
            Some(b) => b.pad(0.5),
            None => SupportBox::ball(&Point::zeros(dim), 1.0)?,
        }
    };
    let points = probe_points(&region, probes, seed);
    let max_discrepancy = max_gap(g, &product, &points);
    if !max_discrepancy.is_finite() {
        return Err(Error::Degenerate("non-finite fragmentation discrepancy".into()));
    }
    Ok(FragmentationReport {
        dim,
        probes: points.len(),
        max_discrepancy,
        matches: max_discrepancy < TSUBOI_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffeo::generators::{make_plateau_translation, make_twist};
    use nalgebra::DVector;

    fn unit_region() -> SupportBox {
        SupportBox::new(
            DVector::from_vec(vec![-0.25, -0.25]),
            DVector::from_vec(vec![0.25, 0.25]),
        )
        .unwrap()
    }

    fn twist_a() -> CDiffeo {
        make_twist(&DVector::from_vec(vec![0.05, 0.0]), 0.18, 1.2).unwrap()
    }

    fn twist_b() -> CDiffeo {
        make_twist(&DVector::from_vec(vec![-0.04, 0.03]), 0.2, -0.9).unwrap()
    }

    fn displacing_h() -> CDiffeo {
        let shield = SupportBox::new(
            DVector::from_vec(vec![-0.3, -0.3]),
            DVector::from_vec(vec![1.1, 0.3]),
        )
        .unwrap();
        make_plateau_translation(&shield, 2.6, &DVector::from_vec(vec![0.8, 0.0])).unwrap()
    }

    #[test]
    fn identity_entries_give_zero_discrepancy() {
        let id = CDiffeo::identity(2);
        let report =
            tsuboi_verify(&id, &id, &displacing_h(), &unit_region(), 500, 11).unwrap();
        assert!(report.support_condition);
        assert!(report.displacement_condition);
        // both sides reduce to h round trips, exact up to the iterative
        // inverse tolerance of the displacing map
        assert!(report.max_discrepancy < 1e-12, "{}", report.max_discrepancy);
        assert!(report.pass);
        assert_eq!(report.factor_names.len(), 4);
    }

    #[test]
    fn commutator_equals_product_of_four_conjugates() {
        let report = tsuboi_verify(
            &twist_a(),
            &twist_b(),
            &displacing_h(),
            &unit_region(),
            2000,
            17,
        )
        .unwrap();
        assert!(report.support_condition, "{report:?}");
        assert!(report.displacement_condition, "{report:?}");
        assert!(
            report.max_discrepancy < TSUBOI_TOL,
            "discrepancy {}",
            report.max_discrepancy
        );
        assert!(report.pass);
    }

    #[test]
    fn overlapping_displacement_is_flagged_and_identity_breaks() {
        let shield = SupportBox::new(
            DVector::from_vec(vec![-0.4, -0.4]),
            DVector::from_vec(vec![0.7, 0.4]),
        )
        .unwrap();
        let h_small =
            make_plateau_translation(&shield, 2.0, &DVector::from_vec(vec![0.3, 0.0]))
                .unwrap();
        let report = tsuboi_verify(
            &twist_a(),
            &twist_b(),
            &h_small,
            &unit_region(),
            2000,
            19,
        )
        .unwrap();
        assert!(!report.displacement_condition);
        assert!(!report.pass);
        assert!(
            report.max_discrepancy > 1e-3,
            "expected a visible break, got {}",
            report.max_discrepancy
        );
    }

    #[test]
    fn two_pair_product_uses_eight_factors() {
        let c = make_twist(&DVector::from_vec(vec![0.0, -0.06]), 0.16, 0.7).unwrap();
        let d = make_twist(&DVector::from_vec(vec![0.02, 0.06]), 0.17, -1.1).unwrap();
        let report = tsuboi_corollary_verify(
            &[(twist_a(), twist_b()), (c, d)],
            &displacing_h(),
            &unit_region(),
            2000,
            23,
        )
        .unwrap();
        assert_eq!(report.factor_names.len(), 8);
        assert!(report.support_condition);
        assert!(report.displacement_condition);
        assert!(
            report.max_discrepancy < TSUBOI_TOL,
            "discrepancy {}",
            report.max_discrepancy
        );
    }

    #[test]
    fn composition_of_flow_elements_is_associative_on_probes() {
        let f = BumpFieldSpec {
            center: vec![0.0, 0.0],
            radius: 1.0,
            direction: vec![0.4, 0.1],
            time: 1.0,
        }
        .realize()
        .unwrap();
        let g = twist_a();
        let h = displacing_h();
        let left = CDiffeo::compose(&CDiffeo::compose(&f, &g), &h);
        let right = CDiffeo::compose(&f, &CDiffeo::compose(&g, &h));
        let probes = probe_points(&unit_region().pad(1.5), 300, 29);
        assert_eq!(max_gap(&left, &right, &probes), 0.0);
    }

    #[test]
    fn fragmentation_identity_case_is_exact() {
        let id = CDiffeo::identity(2);
        let sigmas = vec![id.clone(); 6];
        let fields = vec![BumpFieldSpec::identity(2); 6];
        let report = fragmentation_verify(&id, &sigmas, &fields, 500, 31).unwrap();
        assert_eq!(report.max_discrepancy, 0.0);
        assert!(report.matches);
    }

    #[test]
    fn fragmentation_single_slot_witness_matches() {
        let sigma = twist_a();
        let field = BumpFieldSpec {
            center: vec![0.1, -0.05],
            radius: 0.5,
            direction: vec![0.2, 0.3],
            time: 1.0,
        };
        let g = CDiffeo::commutator(&sigma, &field.realize().unwrap());
        let mut sigmas = vec![CDiffeo::identity(2); 6];
        let mut fields = vec![BumpFieldSpec::identity(2); 6];
        sigmas[0] = sigma;
        fields[0] = field;
        let report = fragmentation_verify(&g, &sigmas, &fields, 1500, 37).unwrap();
        assert!(
            report.max_discrepancy < 1e-9,
            "discrepancy {}",
            report.max_discrepancy
        );
        assert!(report.matches);
    }

    #[test]
    fn fragmentation_mismatched_witnesses_report_large_discrepancy() {
        let g = CDiffeo::identity(2);
        let mut sigmas = vec![CDiffeo::identity(2); 6];
        sigmas[2] = twist_a();
        let mut fields = vec![BumpFieldSpec::identity(2); 6];
        fields[2] = BumpFieldSpec {
            center: vec![0.0, 0.0],
            radius: 0.4,
            direction: vec![0.5, 0.0],
            time: 1.0,
        };
        let report = fragmentation_verify(&g, &sigmas, &fields, 1000, 41).unwrap();
        assert!(!report.matches);
        assert!(report.max_discrepancy > 0.01, "{}", report.max_discrepancy);
    }
}
