//! Text scenarios for the diffeomorphism toolkit: a small line-based format
//! that names generator constructions, builds composites with a postfix
//! stack program, and lists checks to run. Runners turn each check into a
//! serializable outcome for report files.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Point;

use super::cdiffeo::{probe_points, CDiffeo, SupportBox};
use super::generators::{
    disk_plateau, make_bump_flow, make_displacement_bump, make_plateau_translation, make_twist,
    TubeChart,
};
use super::norms::{compose_72_check, in_v_eps, v_eps_norm, Compose72Report};
use super::paths::{adjust, concatenate, make_rotation_path, DiffeoPath, PairedPath};
use super::suspension::suspend;
use super::tsuboi::{
    fragmentation_verify, tsuboi_corollary_verify, tsuboi_verify, BumpFieldSpec,
    FragmentationReport, TsuboiReport, FRAGMENTATION_SLOTS,
};

/// One check requested by a scenario file.
#[derive(Debug, Clone, PartialEq)]
pub enum CheckSpec {
    Tsuboi { a: String, b: String, h: String },
    Corollary { h: String, pairs: Vec<(String, String)> },
    Concat { first: String, second: String },
    Suspend { path: String },
    Veps { target: String },
    Frag { g: String, sigmas: Vec<String>, fields: Vec<String> },
    Frag72,
}

impl CheckSpec {
    /// The subcommand family the check belongs to.
    pub fn kind(&self) -> &'static str {
        match self {
            CheckSpec::Tsuboi { .. } | CheckSpec::Corollary { .. } => "tsuboi",
            CheckSpec::Concat { .. } => "concat",
            CheckSpec::Suspend { .. } => "suspend",
            CheckSpec::Veps { .. } => "veps",
            CheckSpec::Frag { .. } | CheckSpec::Frag72 => "frag72",
        }
    }
}

/// Concatenation outcome: the endpoint law and the nondegeneracy floor of
/// the assembled form on suspension tangents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcatReport {
    pub dim: usize,
    pub probes: usize,
    pub endpoint_law_gap: f64,
    pub alpha_floor: f64,
    pub pass: bool,
}

/// Suspension outcome: traced return map against the path endpoint, leaves
/// outside the moving set, and the form pairing floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuspendReport {
    pub dim: usize,
    pub probes: usize,
    pub holonomy_gap: f64,
    pub outside_displacement: f64,
    pub alpha_floor: f64,
    pub pass: bool,
}

/// Perturbation-norm outcome for one diffeomorphism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VepsReport {
    pub dim: usize,
    pub samples: usize,
    pub epsilon: f64,
    pub norm: f64,
    pub member: bool,
}

/// Result of one scenario check, tagged by kind for report files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check")]
pub enum CheckOutcome {
    #[serde(rename = "tsuboi")]
    Tsuboi(TsuboiReport),
    #[serde(rename = "concat")]
    Concat(ConcatReport),
    #[serde(rename = "suspend")]
    Suspend(SuspendReport),
    #[serde(rename = "veps")]
    Veps(VepsReport),
    #[serde(rename = "frag")]
    Frag(FragmentationReport),
    #[serde(rename = "frag72")]
    Frag72(Compose72Report),
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        match self {
            CheckOutcome::Tsuboi(r) => r.pass,
            CheckOutcome::Concat(r) => r.pass,
            CheckOutcome::Suspend(r) => r.pass,
            CheckOutcome::Veps(r) => r.member,
            CheckOutcome::Frag(r) => r.matches,
            CheckOutcome::Frag72(r) => r.all_in_unit_ball,
        }
    }
}

/// A parsed scenario: settings, named constructions, and checks.
pub struct Scenario {
    pub seed: u64,
    pub dim: usize,
    pub probes: usize,
    pub epsilon: f64,
    pub trials: usize,
    pub margin: f64,
    pub region: Option<SupportBox>,
    pub diffeos: BTreeMap<String, CDiffeo>,
    pub paths: BTreeMap<String, DiffeoPath>,
    pub fields: BTreeMap<String, BumpFieldSpec>,
    pub checks: Vec<CheckSpec>,
}

fn parse_floats(words: &[&str], line: usize) -> Result<Vec<f64>> {
    words
        .iter()
        .map(|w| {
            w.parse::<f64>()
                .map_err(|_| Error::Parse(format!("line {line}: bad number '{w}'")))
        })
        .collect()
}

fn name_token(word: &str, line: usize) -> Result<String> {
    if word.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        && word.chars().next().is_some_and(|c| c.is_ascii_alphabetic())
    {
        Ok(word.to_string())
    } else {
        Err(Error::Parse(format!("line {line}: bad name '{word}'")))
    }
}

impl Scenario {
    /// Parse scenario text. Constructor lines need `dim` declared first.
    pub fn parse(text: &str) -> Result<Scenario> {
        let mut sc = Scenario {
            seed: 42,
            dim: 0,
            probes: 2000,
            epsilon: 0.005,
            trials: 3,
            margin: 0.1,
            region: None,
            diffeos: BTreeMap::new(),
            paths: BTreeMap::new(),
            fields: BTreeMap::new(),
            checks: Vec::new(),
        };
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let words: Vec<&str> = body.split_whitespace().collect();
            let (head, rest) = (words[0], &words[1..]);
            match head {
                "seed" | "dim" | "probes" | "trials" => {
                    let v: u64 = rest
                        .first()
                        .and_then(|w| w.parse().ok())
                        .ok_or_else(|| Error::Parse(format!("line {line}: {head} needs an integer")))?;
                    match head {
                        "seed" => sc.seed = v,
                        "dim" => sc.dim = v as usize,
                        "probes" => sc.probes = v as usize,
                        _ => sc.trials = v as usize,
                    }
                }
                "epsilon" | "margin" => {
                    let v = parse_floats(rest, line)?;
                    let v = *v
                        .first()
                        .ok_or_else(|| Error::Parse(format!("line {line}: {head} needs a value")))?;
                    if head == "epsilon" {
                        sc.epsilon = v;
                    } else {
                        sc.margin = v;
                    }
                }
                "region" => {
                    let d = sc.require_dim(line)?;
                    let v = parse_floats(rest, line)?;
                    if v.len() != 2 * d {
                        return Err(Error::Parse(format!(
                            "line {line}: region needs {} numbers",
                            2 * d
                        )));
                    }
                    sc.region = Some(SupportBox::new(
                        Point::from_vec(v[..d].to_vec()),
                        Point::from_vec(v[d..].to_vec()),
                    )?);
                }
                "twist" => {
                    let d = sc.require_dim(line)?;
                    let name = sc.fresh_name(rest, line)?;
                    let v = parse_floats(&rest[1..], line)?;
                    if v.len() != d + 2 {
                        return Err(Error::Parse(format!(
                            "line {line}: twist needs center ({d}), radius, angle"
                        )));
                    }
                    let diffeo =
                        make_twist(&Point::from_vec(v[..d].to_vec()), v[d], v[d + 1])?;
                    sc.diffeos.insert(name, diffeo);
                }
                "translate" => {
                    let d = sc.require_dim(line)?;
                    let name = sc.fresh_name(rest, line)?;
                    let v = parse_floats(&rest[1..], line)?;
                    if v.len() != 3 * d + 1 {
                        return Err(Error::Parse(format!(
                            "line {line}: translate needs shield lo/hi (2x{d}), ramp, shift ({d})"
                        )));
                    }
                    let shield = SupportBox::new(
                        Point::from_vec(v[..d].to_vec()),
                        Point::from_vec(v[d..2 * d].to_vec()),
                    )?;
                    let diffeo = make_plateau_translation(
                        &shield,
                        v[2 * d],
                        &Point::from_vec(v[2 * d + 1..].to_vec()),
                    )?;
                    sc.diffeos.insert(name, diffeo);
                }
                "bumpflow" => {
                    let d = sc.require_dim(line)?;
                    let name = sc.fresh_name(rest, line)?;
                    let v = parse_floats(&rest[1..], line)?;
                    if v.len() != 2 * d + 2 {
                        return Err(Error::Parse(format!(
                            "line {line}: bumpflow needs center ({d}), radius, direction ({d}), time"
                        )));
                    }
                    let diffeo = make_bump_flow(
                        &Point::from_vec(v[..d].to_vec()),
                        v[d],
                        &Point::from_vec(v[d + 1..2 * d + 1].to_vec()),
                        v[2 * d + 1],
                    )?;
                    sc.diffeos.insert(name, diffeo);
                }
                "dispbump" => {
                    let d = sc.require_dim(line)?;
                    let name = sc.fresh_name(rest, line)?;
                    let v = parse_floats(&rest[1..], line)?;
                    if v.len() != 2 * d + 1 {
                        return Err(Error::Parse(format!(
                            "line {line}: dispbump needs center ({d}), radius, amplitude ({d})"
                        )));
                    }
                    let diffeo = make_displacement_bump(
                        &Point::from_vec(v[..d].to_vec()),
                        v[d],
                        &Point::from_vec(v[d + 1..].to_vec()),
                    )?;
                    sc.diffeos.insert(name, diffeo);
                }
                "field" => {
                    let d = sc.require_dim(line)?;
                    let name = sc.fresh_name(rest, line)?;
                    let v = parse_floats(&rest[1..], line)?;
                    if v.len() != 2 * d + 2 {
                        return Err(Error::Parse(format!(
                            "line {line}: field needs center ({d}), radius, direction ({d}), time"
                        )));
                    }
                    sc.fields.insert(
                        name,
                        BumpFieldSpec {
                            center: v[..d].to_vec(),
                            radius: v[d],
                            direction: v[d + 1..2 * d + 1].to_vec(),
                            time: v[2 * d + 1],
                        },
                    );
                }
                "rotpath" => {
                    let d = sc.require_dim(line)?;
                    let name = sc.fresh_name(rest, line)?;
                    let v = parse_floats(&rest[1..], line)?;
                    if v.len() != 4 {
                        return Err(Error::Parse(format!(
                            "line {line}: rotpath needs halfwidth, level, inner, outer"
                        )));
                    }
                    let chart = TubeChart::new(d, v[0])?;
                    let profile = disk_plateau(v[1], v[2], v[3])?;
                    sc.paths.insert(name, make_rotation_path(&chart, &profile)?);
                }
                "program" => {
                    let name = sc.fresh_name(rest, line)?;
                    let diffeo = sc.run_program(&rest[1..], line)?;
                    sc.diffeos.insert(name, diffeo);
                }
                "check" => sc.parse_check(rest, line)?,
                other => {
                    return Err(Error::Parse(format!("line {line}: unknown directive '{other}'")))
                }
            }
        }
        Ok(sc)
    }

    fn require_dim(&self, line: usize) -> Result<usize> {
        if self.dim == 0 {
            Err(Error::Parse(format!("line {line}: dim must be declared first")))
        } else {
            Ok(self.dim)
        }
    }

    fn fresh_name(&self, rest: &[&str], line: usize) -> Result<String> {
        let word = rest
            .first()
            .ok_or_else(|| Error::Parse(format!("line {line}: missing name")))?;
        let name = name_token(word, line)?;
        if name == "id"
            || self.diffeos.contains_key(&name)
            || self.paths.contains_key(&name)
            || self.fields.contains_key(&name)
        {
            return Err(Error::Parse(format!("line {line}: name '{name}' already taken")));
        }
        Ok(name)
    }

    fn lookup(&self, name: &str, line: usize) -> Result<CDiffeo> {
        if name == "id" {
            return Ok(CDiffeo::identity(self.dim));
        }
        self.diffeos.get(name).cloned().ok_or_else(|| {
            let at = if line > 0 { format!("line {line}: ") } else { String::new() };
            Error::Parse(format!("{at}unknown diffeo '{name}'"))
        })
    }

    /// Postfix stack program: names push; `inv` inverts the top; `mul` pops
    /// y then x and pushes x after y; `conj` pops a then g and pushes g a
    /// g^-1; `comm` pops b then a and pushes the commutator of a and b.
    fn run_program(&self, tokens: &[&str], line: usize) -> Result<CDiffeo> {
        let mut stack: Vec<CDiffeo> = Vec::new();
        let pop = |stack: &mut Vec<CDiffeo>, op: &str| {
            stack.pop().ok_or_else(|| {
                Error::Parse(format!("line {line}: '{op}' on an empty stack"))
            })
        };
        for tok in tokens {
            match *tok {
                "inv" => {
                    let t = pop(&mut stack, tok)?;
                    stack.push(t.inverse());
                }
                "mul" => {
                    let y = pop(&mut stack, tok)?;
                    let x = pop(&mut stack, tok)?;
                    stack.push(CDiffeo::compose(&x, &y));
                }
                "conj" => {
                    let a = pop(&mut stack, tok)?;
                    let g = pop(&mut stack, tok)?;
                    stack.push(CDiffeo::conjugate(&g, &a));
                }
                "comm" => {
                    let b = pop(&mut stack, tok)?;
                    let a = pop(&mut stack, tok)?;
                    stack.push(CDiffeo::commutator(&a, &b));
                }
                name => stack.push(self.lookup(name, line)?),
            }
        }
        if stack.len() != 1 {
            return Err(Error::Parse(format!(
                "line {line}: program must leave exactly one element, left {}",
                stack.len()
            )));
        }
        Ok(stack.pop().unwrap())
    }

    fn parse_check(&mut self, rest: &[&str], line: usize) -> Result<()> {
        let kind = rest
            .first()
            .ok_or_else(|| Error::Parse(format!("line {line}: check needs a kind")))?;
        let args = &rest[1..];
        let spec = match *kind {
            "tsuboi" => {
                if args.len() != 3 {
                    return Err(Error::Parse(format!("line {line}: check tsuboi A B H")));
                }
                CheckSpec::Tsuboi {
                    a: args[0].into(),
                    b: args[1].into(),
                    h: args[2].into(),
                }
            }
            "corollary" => {
                if args.len() < 3 || (args.len() - 1) % 2 != 0 {
                    return Err(Error::Parse(format!(
                        "line {line}: check corollary H A1 B1 [A2 B2 ...]"
                    )));
                }
                CheckSpec::Corollary {
                    h: args[0].into(),
                    pairs: args[1..]
                        .chunks(2)
                        .map(|c| (c[0].into(), c[1].into()))
                        .collect(),
                }
            }
            "concat" => {
                if args.len() != 2 {
                    return Err(Error::Parse(format!("line {line}: check concat P Q")));
                }
                CheckSpec::Concat { first: args[0].into(), second: args[1].into() }
            }
            "suspend" => {
                if args.len() != 1 {
                    return Err(Error::Parse(format!("line {line}: check suspend P")));
                }
                CheckSpec::Suspend { path: args[0].into() }
            }
            "veps" => {
                if args.len() != 1 {
                    return Err(Error::Parse(format!("line {line}: check veps D")));
                }
                CheckSpec::Veps { target: args[0].into() }
            }
            "frag" => {
                if args.len() != 1 + 2 * FRAGMENTATION_SLOTS {
                    return Err(Error::Parse(format!(
                        "line {line}: check frag G S1..S6 F1..F6"
                    )));
                }
                CheckSpec::Frag {
                    g: args[0].into(),
                    sigmas: args[1..=FRAGMENTATION_SLOTS].iter().map(|s| s.to_string()).collect(),
                    fields: args[FRAGMENTATION_SLOTS + 1..]
                        .iter()
                        .map(|s| s.to_string())
                        .collect(),
                }
            }
            "frag72" => {
                if !args.is_empty() {
                    return Err(Error::Parse(format!("line {line}: check frag72 takes no names")));
                }
                CheckSpec::Frag72
            }
            other => {
                return Err(Error::Parse(format!("line {line}: unknown check kind '{other}'")))
            }
        };
        self.checks.push(spec);
        Ok(())
    }

    fn paired_rotation(&self, name: &str) -> Result<PairedPath> {
        let path = self
            .paths
            .get(name)
            .ok_or_else(|| Error::Parse(format!("unknown path '{name}'")))?;
        Ok(PairedPath::product(path.clone()))
    }

    fn run_check(&self, spec: &CheckSpec) -> Result<CheckOutcome> {
        match spec {
            CheckSpec::Tsuboi { a, b, h } => {
                let region = self
                    .region
                    .as_ref()
                    .ok_or_else(|| Error::Precondition("tsuboi check needs a region".into()))?;
                let report = tsuboi_verify(
                    &self.lookup(a, 0)?,
                    &self.lookup(b, 0)?,
                    &self.lookup(h, 0)?,
                    region,
                    self.probes,
                    self.seed,
                )?;
                Ok(CheckOutcome::Tsuboi(report))
            }
            CheckSpec::Corollary { h, pairs } => {
                let region = self
                    .region
                    .as_ref()
                    .ok_or_else(|| Error::Precondition("corollary check needs a region".into()))?;
                let built: Result<Vec<_>> = pairs
                    .iter()
                    .map(|(a, b)| Ok((self.lookup(a, 0)?, self.lookup(b, 0)?)))
                    .collect();
                let report = tsuboi_corollary_verify(
                    &built?,
                    &self.lookup(h, 0)?,
                    region,
                    self.probes,
                    self.seed,
                )?;
                Ok(CheckOutcome::Tsuboi(report))
            }
            CheckSpec::Concat { first, second } => {
                let p1 = adjust(&self.paired_rotation(first)?.path, self.margin)?;
                let p2 = adjust(&self.paired_rotation(second)?.path, self.margin)?;
                let joined =
                    concatenate(&PairedPath::product(p1.clone()), &PairedPath::product(p2.clone()))?;
                let dim = joined.path.dim();
                let sample_box = joined
                    .path
                    .endpoint()
                    .support()
                    .cloned()
                    .unwrap_or(SupportBox::ball(&Point::zeros(dim), 1.0)?)
                    .pad(0.3);
                let points = probe_points(&sample_box, self.probes, self.seed);
                let reference =
                    CDiffeo::compose(&p2.endpoint(), &p1.endpoint());
                let endpoint_law_gap =
                    CDiffeo::discrepancy(&joined.path.endpoint(), &reference, &points);
                let tangent_probes: Vec<(f64, Point)> = points
                    .iter()
                    .take(200)
                    .enumerate()
                    .map(|(i, y)| (i as f64 / 200.0, y.clone()))
                    .collect();
                let alpha_floor = joined.alpha_min_on_tangents(&tangent_probes);
                Ok(CheckOutcome::Concat(ConcatReport {
                    dim,
                    probes: points.len(),
                    endpoint_law_gap,
                    alpha_floor,
                    pass: endpoint_law_gap < 1e-12 && alpha_floor > 0.0,
                }))
            }
            CheckSpec::Suspend { path } => {
                let paired = self.paired_rotation(path)?;
                let fol = suspend(&paired)?;
                let dim = fol.dim();
                let support = fol
                    .support()
                    .unwrap_or(SupportBox::ball(&Point::zeros(dim), 1.0)?);
                let points = probe_points(&support, self.probes.min(200), self.seed);
                let holonomy_gap = fol.holonomy_gap(&points)?;
                let outside: Vec<Point> = probe_points(&support.pad(2.0), 4 * self.probes.min(200), self.seed ^ 1)
                    .into_iter()
                    .filter(|y| !support.contains(y))
                    .collect();
                let outside_displacement = fol.holonomy_displacement(&outside)?;
                let tangent_probes: Vec<(f64, Point)> = points
                    .iter()
                    .enumerate()
                    .map(|(i, y)| (i as f64 / points.len() as f64, y.clone()))
                    .collect();
                let alpha_floor = fol.alpha_floor(&tangent_probes);
                Ok(CheckOutcome::Suspend(SuspendReport {
                    dim,
                    probes: points.len(),
                    holonomy_gap,
                    outside_displacement,
                    alpha_floor,
                    pass: holonomy_gap < 1e-8
                        && outside_displacement == 0.0
                        && alpha_floor > 0.0,
                }))
            }
            CheckSpec::Veps { target } => {
                let d = self.lookup(target, 0)?;
                let samples = self.probes.max(100);
                let norm = v_eps_norm(&d, samples, self.seed)?;
                let member = in_v_eps(&d, self.epsilon, samples, self.seed)?;
                Ok(CheckOutcome::Veps(VepsReport {
                    dim: d.dim(),
                    samples,
                    epsilon: self.epsilon,
                    norm,
                    member,
                }))
            }
            CheckSpec::Frag { g, sigmas, fields } => {
                let sig: Result<Vec<_>> = sigmas.iter().map(|n| self.lookup(n, 0)).collect();
                let fld: Result<Vec<_>> = fields
                    .iter()
                    .map(|n| {
                        self.fields
                            .get(n)
                            .cloned()
                            .ok_or_else(|| Error::Parse(format!("unknown field '{n}'")))
                    })
                    .collect();
                let report = fragmentation_verify(
                    &self.lookup(g, 0)?,
                    &sig?,
                    &fld?,
                    self.probes,
                    self.seed,
                )?;
                Ok(CheckOutcome::Frag(report))
            }
            CheckSpec::Frag72 => Ok(CheckOutcome::Frag72(compose_72_check(
                self.epsilon,
                self.seed,
                self.trials,
            )?)),
        }
    }

    /// Run the checks matching a subcommand kind (all checks when None).
    pub fn run(&self, kind: Option<&str>) -> Result<Vec<CheckOutcome>> {
        let selected: Vec<&CheckSpec> = self
            .checks
            .iter()
            .filter(|c| kind.is_none_or(|k| c.kind() == k))
            .collect();
        if selected.is_empty() {
            return Err(Error::Precondition(match kind {
                Some(k) => format!("scenario has no '{k}' checks"),
                None => "scenario has no checks".into(),
            }));
        }
        selected.into_iter().map(|c| self.run_check(c)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TSUBOI_SCENARIO: &str = "
# conjugate-product identity on a pair of twists
seed 42
dim 2
probes 1500
region -0.25 -0.25 0.25 0.25
twist a 0.05 0.0 0.18 1.2
twist b -0.04 0.03 0.2 -0.9
translate h -0.3 -0.3 1.1 0.3 2.6 0.8 0.0
check tsuboi a b h
";

    #[test]
    fn tsuboi_scenario_parses_and_passes() {
        let sc = Scenario::parse(TSUBOI_SCENARIO).unwrap();
        assert_eq!(sc.seed, 42);
        assert_eq!(sc.dim, 2);
        let outcomes = sc.run(Some("tsuboi")).unwrap();
        assert_eq!(outcomes.len(), 1);
        assert!(outcomes[0].passed(), "{outcomes:?}");
        // kind filter excludes everything else
        assert!(sc.run(Some("veps")).is_err());
    }

    #[test]
    fn postfix_programs_build_composites() {
        let text = "
dim 2
twist a 0.1 0.0 0.3 0.8
twist b -0.1 0.0 0.3 -0.5
program c a b comm
program d a inv
program e a b mul
check veps c
";
        let sc = Scenario::parse(text).unwrap();
        let c = &sc.diffeos["c"];
        let reference = CDiffeo::commutator(&sc.diffeos["a"], &sc.diffeos["b"]);
        let probes = probe_points(
            &SupportBox::ball(&Point::zeros(2), 0.8).unwrap(),
            200,
            9,
        );
        assert_eq!(CDiffeo::discrepancy(c, &reference, &probes), 0.0);
        let d_ref = sc.diffeos["a"].inverse();
        assert_eq!(CDiffeo::discrepancy(&sc.diffeos["d"], &d_ref, &probes), 0.0);
        let e_ref = CDiffeo::compose(&sc.diffeos["a"], &sc.diffeos["b"]);
        assert_eq!(CDiffeo::discrepancy(&sc.diffeos["e"], &e_ref, &probes), 0.0);
    }

    #[test]
    fn suspend_and_concat_checks_run_from_text() {
        let text = "
dim 3
probes 300
margin 0.1
rotpath p 0.25 0.7 0.4 0.9
check suspend p
check concat p p
";
        let sc = Scenario::parse(text).unwrap();
        let outcomes = sc.run(None).unwrap();
        assert_eq!(outcomes.len(), 2);
        for o in &outcomes {
            assert!(o.passed(), "{o:?}");
        }
        match &outcomes[0] {
            CheckOutcome::Suspend(r) => {
                assert!(r.holonomy_gap < 1e-8);
                assert_eq!(r.outside_displacement, 0.0);
                assert!(r.alpha_floor > 0.5);
            }
            other => panic!("expected a suspend outcome, got {other:?}"),
        }
        match &outcomes[1] {
            CheckOutcome::Concat(r) => {
                assert_eq!(r.endpoint_law_gap, 0.0);
                assert!(r.alpha_floor > 0.5);
            }
            other => panic!("expected a concat outcome, got {other:?}"),
        }
    }

    #[test]
    fn veps_and_frag72_checks_run_from_text() {
        let text = "
dim 2
probes 400
epsilon 0.01
trials 2
dispbump d 0.0 0.0 1.0 0.002 0.001
check veps d
check frag72
";
        let sc = Scenario::parse(text).unwrap();
        let outcomes = sc.run(Some("veps")).unwrap();
        match &outcomes[0] {
            CheckOutcome::Veps(r) => {
                assert!(r.member, "{r:?}");
                assert!(r.norm > 0.0 && r.norm < 0.01);
            }
            other => panic!("expected a veps outcome, got {other:?}"),
        }
        let outcomes = sc.run(Some("frag72")).unwrap();
        match &outcomes[0] {
            CheckOutcome::Frag72(r) => assert!(r.all_in_unit_ball, "{r:?}"),
            other => panic!("expected a frag72 outcome, got {other:?}"),
        }
    }

    #[test]
    fn fragmentation_check_runs_from_text() {
        let text = "
dim 2
probes 600
twist s 0.1 -0.05 0.3 0.9
field f 0.1 -0.05 0.5 0.2 0.3 1.0
program g s  # placeholder, replaced below by the commutator program
check frag gg s id id id id id f z z z z z
";
        // build the real text with a zero field named z and g = [s, exp f]
        let text = text.replace(
            "program g s  # placeholder, replaced below by the commutator program",
            "field z 0.0 0.0 1.0 0.0 0.0 0.0\nbumpflow e 0.1 -0.05 0.5 0.2 0.3 1.0\nprogram gg s e comm",
        );
        let sc = Scenario::parse(&text).unwrap();
        let outcomes = sc.run(Some("frag72")).unwrap();
        match &outcomes[0] {
            CheckOutcome::Frag(r) => {
                assert!(r.matches, "discrepancy {}", r.max_discrepancy);
            }
            other => panic!("expected a frag outcome, got {other:?}"),
        }
    }

    #[test]
    fn parse_errors_name_the_line() {
        let bad = "dim 2\ntwist a 0.0 0.0 0.3\n";
        let err = Scenario::parse(bad).map(|_| ()).unwrap_err();
        match err {
            Error::Parse(msg) => assert!(msg.contains("line 2"), "{msg}"),
            other => panic!("expected a parse error, got {other:?}"),
        }
        assert!(Scenario::parse("twist a 0.0 0.0 0.3 1.0\n").is_err());
        assert!(Scenario::parse("dim 2\ntwist a 0 0 0.3 1\ntwist a 0 0 0.3 1\n").is_err());
        assert!(Scenario::parse("dim 2\nprogram p a b mul\n").is_err());
        assert!(Scenario::parse("dim 2\nwhatever 3\n").is_err());
    }
}
