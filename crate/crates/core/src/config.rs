//! Flat key=value run configuration and the plane-field preset registry.
//!
//! Config files are plain text: one `key = value` per line, `#` starts a
//! comment line, blank lines are ignored. Keys are fixed; unknown or
//! duplicate keys are errors so a typo cannot silently fall back to a
//! default. Every field is echoed back into reports as text, which keeps
//! reruns comparable byte for byte.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geom::PairedDistribution;

/// Everything a full pipeline run needs, with defaults chosen so that the
/// golden configuration stays small enough to rerun routinely.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// One-line name echoed into the report.
    pub label: String,
    /// Ambient dimension.
    pub dim: usize,
    /// Plane-field preset name; see [`pair_preset`].
    pub preset: String,
    /// Numeric parameter for presets that take one (rotation rate, slope).
    pub preset_rate: f64,
    /// Base seed for jiggling attempts and sampling.
    pub seed: u64,
    /// Displacement bound for jiggling, as a fraction of lattice spacing.
    pub eps_fraction: f64,
    /// Largest refinement (cells per unit) the lattice stages may try.
    pub max_l: u32,
    /// Jiggling attempts per refinement.
    pub attempts_per_l: u32,
    /// Subdivision depth for transversality sampling.
    pub depth: usize,
    /// Transversality margins below this fail the general-position check.
    pub margin_floor: f64,
    /// Wedge-value margins below this fail the membership audit.
    pub nondegeneracy_floor: f64,
    /// Grid step for the membership audit over the doubled box.
    pub audit_step: f64,
    /// How many skeleton levels to deform (1 = vertices only).
    pub civilize_levels: usize,
    /// Per-level simplex cap for the structural condition checks.
    pub check_max_simplices: usize,
    /// Meridian slope for the solid-torus verification.
    pub torus_a: f64,
    /// Grid resolution per axis for the torus integrability scan.
    pub torus_grid: usize,
    /// Boundary probe count for the torus identities.
    pub torus_boundary_probes: usize,
    /// Leafwise nondegeneracy floor for the torus scan.
    pub torus_margin_floor: f64,
    /// Probes on the shell outside the deformation support.
    pub support_probes: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            label: "run".into(),
            dim: 4,
            preset: "constant".into(),
            preset_rate: 0.0,
            seed: 7,
            eps_fraction: 0.1,
            max_l: 6,
            attempts_per_l: 50,
            depth: 2,
            margin_floor: 1e-6,
            nondegeneracy_floor: 1e-9,
            audit_step: 0.5,
            civilize_levels: 1,
            check_max_simplices: 24,
            torus_a: 0.5,
            torus_grid: 16,
            torus_boundary_probes: 128,
            torus_margin_floor: 0.2,
            support_probes: 64,
        }
    }
}

impl RunConfig {
    /// Parses a config file's text. Missing keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_map(&parse_kv_text(text)?)
    }

    /// Builds a config from an already parsed key→value map.
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        let mut cfg = Self::default();
        for (key, value) in map {
            match key.as_str() {
                "label" => cfg.label = value.clone(),
                "dim" => cfg.dim = parse_field(key, value)?,
                "preset" => cfg.preset = value.clone(),
                "preset_rate" => cfg.preset_rate = parse_field(key, value)?,
                "seed" => cfg.seed = parse_field(key, value)?,
                "eps_fraction" => cfg.eps_fraction = parse_field(key, value)?,
                "max_l" => cfg.max_l = parse_field(key, value)?,
                "attempts_per_l" => cfg.attempts_per_l = parse_field(key, value)?,
                "depth" => cfg.depth = parse_field(key, value)?,
                "margin_floor" => cfg.margin_floor = parse_field(key, value)?,
                "nondegeneracy_floor" => {
                    cfg.nondegeneracy_floor = parse_field(key, value)?
                }
                "audit_step" => cfg.audit_step = parse_field(key, value)?,
                "civilize_levels" => cfg.civilize_levels = parse_field(key, value)?,
                "check_max_simplices" => {
                    cfg.check_max_simplices = parse_field(key, value)?
                }
                "torus_a" => cfg.torus_a = parse_field(key, value)?,
                "torus_grid" => cfg.torus_grid = parse_field(key, value)?,
                "torus_boundary_probes" => {
                    cfg.torus_boundary_probes = parse_field(key, value)?
                }
                "torus_margin_floor" => {
                    cfg.torus_margin_floor = parse_field(key, value)?
                }
                "support_probes" => cfg.support_probes = parse_field(key, value)?,
                other => {
                    return Err(Error::Parse(format!("unknown config key `{other}`")))
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::Precondition("dim must be at least 2".into()));
        }
        if self.label.trim().is_empty() || self.label.contains('\n') {
            return Err(Error::Precondition(
                "label must be a single nonempty line".into(),
            ));
        }
        for (name, v) in [
            ("eps_fraction", self.eps_fraction),
            ("margin_floor", self.margin_floor),
            ("nondegeneracy_floor", self.nondegeneracy_floor),
            ("audit_step", self.audit_step),
            ("torus_margin_floor", self.torus_margin_floor),
        ] {
            if !(v > 0.0) {
                return Err(Error::Precondition(format!("{name} must be positive")));
            }
        }
        if self.max_l == 0 || self.attempts_per_l == 0 {
            return Err(Error::Precondition("lattice budget must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.torus_a) {
            return Err(Error::Precondition("torus_a must lie in [0, 1]".into()));
        }
        if self.torus_grid < 2 || self.torus_boundary_probes == 0 {
            return Err(Error::Precondition(
                "torus sampling resolutions must be at least 2 and 1".into(),
            ));
        }
        Ok(())
    }

    /// Every effective setting as text, for the report's config echo.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("label".into(), self.label.clone());
        m.insert("dim".into(), self.dim.to_string());
        m.insert("preset".into(), self.preset.clone());
        m.insert("preset_rate".into(), self.preset_rate.to_string());
        m.insert("seed".into(), self.seed.to_string());
        m.insert("eps_fraction".into(), self.eps_fraction.to_string());
        m.insert("max_l".into(), self.max_l.to_string());
        m.insert("attempts_per_l".into(), self.attempts_per_l.to_string());
        m.insert("depth".into(), self.depth.to_string());
        m.insert("margin_floor".into(), self.margin_floor.to_string());
        m.insert(
            "nondegeneracy_floor".into(),
            self.nondegeneracy_floor.to_string(),
        );
        m.insert("audit_step".into(), self.audit_step.to_string());
        m.insert("civilize_levels".into(), self.civilize_levels.to_string());
        m.insert(
            "check_max_simplices".into(),
            self.check_max_simplices.to_string(),
        );
        m.insert("torus_a".into(), self.torus_a.to_string());
        m.insert("torus_grid".into(), self.torus_grid.to_string());
        m.insert(
            "torus_boundary_probes".into(),
            self.torus_boundary_probes.to_string(),
        );
        m.insert(
            "torus_margin_floor".into(),
            self.torus_margin_floor.to_string(),
        );
        m.insert("support_probes".into(), self.support_probes.to_string());
        m
    }
}

/// Parses flat `key = value` text: `#` comment lines, blank lines ignored,
/// duplicate keys rejected.
pub fn parse_kv_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Parse(format!(
                "line {}: expected `key = value`, got `{line}`",
                i + 1
            )));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() {
            return Err(Error::Parse(format!("line {}: empty key", i + 1)));
        }
        if map.insert(key.clone(), value).is_some() {
            return Err(Error::Parse(format!(
                "line {}: duplicate key `{key}`",
                i + 1
            )));
        }
    }
    Ok(map)
}

fn parse_field<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| {
        Error::Parse(format!("config key `{key}`: cannot parse `{value}`"))
    })
}

/// Builds the named plane-field pair in dimension `dim`. `rate` feeds the
/// presets that take a parameter and is ignored by the constant ones.
///
/// Available presets: `constant` (coordinate plane, split form),
/// `rotating` (plane tilting with the third coordinate at `rate` per
/// unit), `linear-omega` (constant plane, form scaling linearly at slope
/// `rate`), and `zero-omega` (vanishing form, degenerate everywhere; the
/// negative control for the membership audit).
pub fn pair_preset(name: &str, dim: usize, rate: f64) -> Result<PairedDistribution> {
    if dim < 2 {
        return Err(Error::Precondition(
            "presets need an ambient dimension of at least 2".into(),
        ));
    }
    match name {
        "constant" => Ok(PairedDistribution::constant(dim)),
        "rotating" => {
            if dim < 3 {
                return Err(Error::Precondition(
                    "the rotating preset needs dimension at least 3".into(),
                ));
            }
            Ok(PairedDistribution::rotating(dim, rate))
        }
        "linear-omega" => Ok(PairedDistribution::linear_omega(dim, rate)),
        "zero-omega" => Ok(PairedDistribution::zero_omega(dim)),
        other => Err(Error::Parse(format!("unknown plane-field preset `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_blanks_and_values() {
        let text = "# golden\nlabel = gold\n\ndim = 3\nseed= 11\n torus_a =0.25\n";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.label, "gold");
        assert_eq!(cfg.dim, 3);
        assert_eq!(cfg.seed, 11);
        assert_eq!(cfg.torus_a, 0.25);
        assert_eq!(cfg.max_l, RunConfig::default().max_l);
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        assert!(matches!(
            RunConfig::parse("dimension = 4\n"),
            Err(Error::Parse(m)) if m.contains("unknown config key")
        ));
        assert!(matches!(
            RunConfig::parse("dim = 4\ndim = 3\n"),
            Err(Error::Parse(m)) if m.contains("duplicate")
        ));
        assert!(matches!(
            RunConfig::parse("dim four\n"),
            Err(Error::Parse(m)) if m.contains("key = value")
        ));
    }

    #[test]
    fn rejects_bad_numbers_and_ranges() {
        assert!(RunConfig::parse("dim = x\n").is_err());
        assert!(RunConfig::parse("dim = 1\n").is_err());
        assert!(RunConfig::parse("eps_fraction = -0.5\n").is_err());
        assert!(RunConfig::parse("torus_a = 1.5\n").is_err());
        assert!(RunConfig::parse("max_l = 0\n").is_err());
    }

    #[test]
    fn echo_round_trips_through_from_map() {
        let cfg = RunConfig::parse("dim = 3\nseed = 99\npreset = rotating\npreset_rate = 0.125\n")
            .unwrap();
        let echoed = RunConfig::from_map(&cfg.echo()).unwrap();
        assert_eq!(cfg, echoed);
    }

    #[test]
    fn presets_build_and_unknown_names_fail() {
        for name in ["constant", "rotating", "linear-omega", "zero-omega"] {
            let pair = pair_preset(name, 4, 0.1).unwrap();
            assert_eq!(pair.dim(), 4);
        }
        assert!(pair_preset("mystery", 4, 0.0).is_err());
        assert!(pair_preset("rotating", 2, 0.0).is_err());
    }
}
