//! Run configuration: a TOML document with the sections `[space]`, `[base]`,
//! `[init]`, `[solver]`, `[stop]` and `[output]`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tubeflow_core::{
    catalog_lookup, BaseDensity, Curvature, FlowConfig, LapMode, RadialProfile, RootMult, Scheme,
    SignMode, SpaceParams,
};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },

    #[error("{}{key}: {message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Invalid { key: String, line: Option<usize>, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSection {
    /// Catalog name, e.g. `RH3/RH1`. Mutually exclusive with explicit parameters.
    pub name: Option<String>,
    pub epsilon: Option<i32>,
    /// Root scale; overrides the catalog default when given with `name`.
    pub b: Option<f64>,
    pub mv1: Option<u32>,
    pub mv2: Option<u32>,
    pub mh: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseSection {
    pub rb: f64,
    /// Multiplicities `(k = 1, k = 2)` of the base density; catalog default.
    pub density: Option<[u32; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    Const,
    #[default]
    Cosine,
    /// Final profile of an earlier run, read from its `summary.json`.
    Reload,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSection {
    #[serde(default)]
    pub kind: InitKind,
    #[serde(default)]
    pub r0: f64,
    #[serde(default)]
    pub amplitude: f64,
    /// Summary file for `kind = "reload"`.
    pub from: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub n: usize,
    pub cfl: f64,
    pub scheme: Scheme,
    pub lap: LapMode,
    pub sign: SignMode,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection { n: 200, cfl: 0.2, scheme: Scheme::Rk4, lap: LapMode::Paper61, sign: SignMode::Eq250 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StopSection {
    pub t_max: f64,
    pub r_stop: Option<f64>,
    pub tol_cmc: f64,
}

impl Default for StopSection {
    fn default() -> Self {
        StopSection { t_max: 1.0, r_stop: None, tol_cmc: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub stride: usize,
    pub formats: Vec<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: PathBuf::from("out"), stride: 100, formats: vec![Format::Csv, Format::Json] }
    }
}

/// A validated run configuration with defaults filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub space: SpaceSection,
    pub base: BaseSection,
    pub init: InitSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub stop: StopSection,
    #[serde(default)]
    pub output: OutputSection,
    /// Space parameters resolved from `[space]`.
    #[serde(skip)]
    pub params: Option<SpaceParams>,
    #[serde(skip)]
    density: Option<BaseDensity>,
    /// Source text, kept to attach line numbers to validation errors.
    #[serde(skip)]
    source: String,
}

/// Line (1-based) of `key = ...` inside `[section]`, if present.
fn line_of(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.split(']').next()) {
            current = name.trim().to_string();
            continue;
        }
        let Some((lhs, _)) = line.split_once('=') else { continue };
        let lhs = lhs.trim();
        if lhs == key && current == section || lhs == format!("{section}.{key}") && current.is_empty() {
            return Some(idx + 1);
        }
    }
    None
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |p| p + 1) + 1;
    (line, column)
}

impl RunConfig {
    fn invalid(&self, section: &str, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::Invalid {
            key: format!("{section} {key}"),
            line: line_of(&self.source, section, key),
            message: message.into(),
        }
    }

    pub fn space(&self) -> &SpaceParams {
        self.params.as_ref().expect("validated config")
    }

    pub fn density(&self) -> BaseDensity {
        self.density.expect("validated config")
    }

    pub fn flow_config(&self) -> FlowConfig {
        let mut cfg = FlowConfig::new(self.space().clone(), self.density());
        cfg.lap_mode = self.solver.lap;
        cfg.sign_mode = self.solver.sign;
        cfg.scheme = self.solver.scheme;
        cfg.cfl = self.solver.cfl;
        cfg.t_max = self.stop.t_max;
        cfg.r_stop = self.stop.r_stop;
        cfg.tol_cmc = self.stop.tol_cmc;
        cfg.stride = self.output.stride;
        cfg
    }

    /// Initial profile on the configured grid.
    pub fn initial_profile(&self) -> Result<RadialProfile, ConfigError> {
        let (rb, n) = (self.base.rb, self.solver.n);
        let profile = match self.init.kind {
            InitKind::Const => RadialProfile::constant(rb, n, self.init.r0),
            InitKind::Cosine => RadialProfile::cosine(rb, n, self.init.r0, self.init.amplitude),
            InitKind::Reload => {
                let path = self.init.from.as_deref().ok_or_else(|| self.invalid("init", "from", "required for kind = \"reload\""))?;
                let p = load_final_profile(path).map_err(|e| self.invalid("init", "from", e))?;
                if p.rb != rb || p.n() != n {
                    return Err(self.invalid(
                        "init",
                        "from",
                        format!("stored profile has rb = {}, N = {}; config has rb = {rb}, N = {n}", p.rb, p.n()),
                    ));
                }
                Ok(p)
            }
        };
        profile.map_err(|e| self.invalid("init", "r0", e.to_string()))
    }

    /// Re-runs validation after a field was changed programmatically. Line
    /// numbers are dropped since values may no longer come from the text.
    pub fn revalidate(mut self) -> Result<Self, ConfigError> {
        self.source.clear();
        self.params = None;
        self.density = None;
        self.validate()?;
        Ok(self)
    }

    fn resolve_space(&self) -> Result<(SpaceParams, BaseDensity), ConfigError> {
        let s = &self.space;
        let explicit = s.epsilon.is_some() || s.mv1.is_some() || s.mv2.is_some() || s.mh.is_some();
        let (mut params, density) = match (&s.name, explicit) {
            (Some(_), true) => {
                return Err(self.invalid("space", "name", "give either a catalog name or explicit parameters, not both"))
            }
            (Some(name), false) => {
                let entry = catalog_lookup(name).map_err(|e| self.invalid("space", "name", e.to_string()))?;
                if entry.informational {
                    return Err(self.invalid("space", "name", format!("`{name}` is informational only and cannot drive a flow")));
                }
                let mut params = entry.params;
                params.b = entry.b_default;
                (params, BaseDensity { mult: entry.density_mult })
            }
            (None, _) => {
                let eps = s.epsilon.ok_or_else(|| self.invalid("space", "epsilon", "required without `name`"))?;
                let curvature = Curvature::from_sign(eps).map_err(|e| self.invalid("space", "epsilon", e.to_string()))?;
                let mh = s.mh.ok_or_else(|| self.invalid("space", "mh", "required without `name`"))?;
                let params = SpaceParams {
                    curvature,
                    b: 1.0,
                    mv: [s.mv1.unwrap_or(0), s.mv2.unwrap_or(0)],
                    mh: vec![RootMult { k: 1.0, mult: mh }],
                    k0: 1.0,
                };
                (params, BaseDensity { mult: [mh, 0] })
            }
        };
        if let Some(b) = s.b {
            params.b = b;
        }
        params.validate().map_err(|e| {
            let key = if params.b > 0.0 && params.b.is_finite() { if s.name.is_some() { "name" } else { "mv1" } } else { "b" };
            self.invalid("space", key, e.to_string())
        })?;
        Ok((params, self.base.density.map_or(density, |mult| BaseDensity { mult })))
    }

    fn validate(&mut self) -> Result<(), ConfigError> {
        let (params, density) = self.resolve_space()?;
        if !(self.base.rb > 0.0 && self.base.rb.is_finite()) {
            return Err(self.invalid("base", "rb", format!("must be positive, got {}", self.base.rb)));
        }
        if self.init.kind != InitKind::Reload {
            let (r0, a) = (self.init.r0, self.init.amplitude);
            if !(r0 > 0.0 && r0.is_finite()) {
                return Err(self.invalid("init", "r0", format!("must be positive, got {r0}")));
            }
            if !a.is_finite() || a.abs() >= r0 {
                return Err(self.invalid("init", "amplitude", format!("|amplitude| must be below r0 = {r0}, got {a}")));
            }
            if self.init.kind == InitKind::Const && a != 0.0 {
                return Err(self.invalid("init", "amplitude", "must be 0 for kind = \"const\""));
            }
            let focal = params.focal_radius();
            if r0 + a.abs() >= focal {
                return Err(self.invalid(
                    "init",
                    "amplitude",
                    format!("r0 + |amplitude| = {} reaches the focal radius r_F = {focal}", r0 + a.abs()),
                ));
            }
        }
        if self.solver.n < tubeflow_core::profile::MIN_CELLS || !self.solver.n.is_multiple_of(2) {
            return Err(self.invalid(
                "solver",
                "n",
                format!("must be even and at least {}, got {}", tubeflow_core::profile::MIN_CELLS, self.solver.n),
            ));
        }
        if !(self.solver.cfl > 0.0 && self.solver.cfl <= 0.5) {
            return Err(self.invalid("solver", "cfl", format!("must lie in (0, 0.5], got {}", self.solver.cfl)));
        }
        if !(self.stop.t_max >= 0.0 && self.stop.t_max.is_finite()) {
            return Err(self.invalid("stop", "t_max", format!("must be finite and >= 0, got {}", self.stop.t_max)));
        }
        if let Some(r_stop) = self.stop.r_stop {
            if !(r_stop > 0.0) {
                return Err(self.invalid("stop", "r_stop", format!("must be positive, got {r_stop}")));
            }
        }
        if !(self.stop.tol_cmc > 0.0) {
            return Err(self.invalid("stop", "tol_cmc", format!("must be positive, got {}", self.stop.tol_cmc)));
        }
        if self.output.stride == 0 {
            return Err(self.invalid("output", "stride", "must be at least 1"));
        }
        let mut flow = FlowConfig::new(params.clone(), density);
        flow.lap_mode = self.solver.lap;
        if let Err(e) = flow.validate() {
            return Err(self.invalid("space", "name", e.to_string()));
        }
        self.params = Some(params);
        self.density = Some(density);
        Ok(())
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg: RunConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |span| line_col(text, span.start));
        ConfigError::Parse { line, column, message: e.message().to_string() }
    })?;
    cfg.source = text.to_string();
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> anyhow::Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("reading {}: {e}", path.display()))?;
    parse_config(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}

fn load_final_profile(path: &Path) -> Result<RadialProfile, String> {
    #[derive(Deserialize)]
    struct Stored {
        final_profile: RadialProfile,
    }
    let text = std::fs::read_to_string(path).map_err(|e| format!("reading {}: {e}", path.display()))?;
    let stored: Stored = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    RadialProfile::new(stored.final_profile.rb, stored.final_profile.r).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[space]\nname = \"RH3/RH1\"\n[base]\nrb = 1.0\n[init]\nr0 = 0.5\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.solver, SolverSection::default());
        assert_eq!(cfg.solver.n, 200);
        assert_eq!(cfg.solver.cfl, 0.2);
        assert_eq!(cfg.solver.scheme, Scheme::Rk4);
        assert_eq!(cfg.solver.lap, LapMode::Paper61);
        assert_eq!(cfg.solver.sign, SignMode::Eq250);
        assert_eq!(cfg.init.kind, InitKind::Cosine);
        assert_eq!(cfg.density(), BaseDensity { mult: [1, 0] });
    }

    #[test]
    fn amplitude_at_r0_names_the_key() {
        let text = format!("{MINIMAL}amplitude = 0.5\n");
        match parse_config(&text).unwrap_err() {
            ConfigError::Invalid { key, line, .. } => {
                assert_eq!(key, "init amplitude");
                assert_eq!(line, Some(7));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn compact_range_guard_mentions_focal_radius() {
        let text = "[space]\nname = \"CP2/CP1\"\n[base]\nrb = 1.0\n[init]\nr0 = 1.5\namplitude = 0.1\n";
        let err = parse_config(text).unwrap_err().to_string();
        assert!(err.contains("init amplitude") && err.contains("focal radius"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected_with_line() {
        let text = format!("{MINIMAL}[solver]\nsteps = 3\n");
        match parse_config(&text).unwrap_err() {
            ConfigError::Parse { line, message, .. } => {
                assert_eq!(line, 8);
                assert!(message.contains("steps"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn explicit_parameters() {
        let text = "[space]\nepsilon = -1\nb = 0.5\nmv1 = 2\nmv2 = 1\nmh = 2\n[base]\nrb = 1.0\n[init]\nkind = \"const\"\nr0 = 0.5\n";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.space().mv, [2, 1]);
        assert_eq!(cfg.space().b, 0.5);
        assert_eq!(cfg.density(), BaseDensity { mult: [2, 0] });
    }

    #[test]
    fn name_and_explicit_conflict() {
        let text = "[space]\nname = \"RH3/RH1\"\nmv1 = 2\n[base]\nrb = 1.0\n[init]\nr0 = 0.5\n";
        assert!(parse_config(text).unwrap_err().to_string().contains("space name"));
    }

    #[test]
    fn odd_grid_is_rejected() {
        let text = format!("{MINIMAL}[solver]\nn = 33\n");
        assert!(parse_config(&text).unwrap_err().to_string().contains("solver n"));
    }
}
