//! Run configuration: a TOML file, then `--section.key value` overrides,
//! then the scene's own values for whatever is still unset.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

/// Bad input: unknown key, unparsable value, missing file, out-of-range
/// number. Exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Bundled scene; ignored when `paths.pattern` is set.
    pub scene: String,
    pub output: PathBuf,
    pub seed: u64,
    pub paths: Paths,
    pub sim: SimSection,
    pub material: MaterialSection,
    pub body: BodySection,
    pub loss: LossSection,
    pub optim: OptimSection,
    pub drape: DrapeSection,
    pub gradcheck: GradcheckSection,
    pub synth: SynthSection,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    /// Pattern OBJ (`vt` rest coordinates, `v` initial embedding).
    pub pattern: Option<PathBuf>,
    /// Seam / pin / boundary sidecar of the pattern.
    pub seams: Option<PathBuf>,
    /// Body OBJ and its JSON sidecar.
    pub body: Option<PathBuf>,
    pub body_sidecar: Option<PathBuf>,
    /// Target interior points (OBJ) and boundary polylines.
    pub target_points: Option<PathBuf>,
    pub target_polylines: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub dt: Option<f64>,
    pub iterations: Option<usize>,
    pub max_steps: Option<usize>,
    pub v_tol: Option<f64>,
    pub damping: Option<f64>,
    /// Fixed step count of every drape inside the optimizer.
    pub steps: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaterialSection {
    pub bend: Option<f64>,
    pub stretch: Option<[f64; 3]>,
    pub density: Option<f64>,
    pub thickness: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BodySection {
    pub nu: Option<Vec<f64>>,
    pub psi: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossSection {
    pub boundary: f64,
    pub interior: f64,
    pub seam: f64,
    pub curvature: f64,
}

impl Default for LossSection {
    fn default() -> Self {
        let d = drapefit::loss::LossConfig::default();
        LossSection { boundary: d.boundary, interior: d.interior, seam: d.seam, curvature: d.curvature }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSpec {
    pub groups: String,
    pub iters: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimSection {
    pub groups: String,
    /// `cage` or `direct`.
    pub mode: String,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub min_step: f64,
    pub warm_start: bool,
    pub stages: Vec<StageSpec>,
    pub rates: Rates,
}

impl Default for OptimSection {
    fn default() -> Self {
        let d = drapefit::optim::OptimConfig::default();
        OptimSection {
            groups: "all".into(),
            mode: "cage".into(),
            max_iters: d.max_iters,
            grad_tol: d.grad_tol,
            min_step: d.min_step,
            warm_start: d.warm_start,
            stages: Vec::new(),
            rates: Rates::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Rates {
    pub zeta: f64,
    pub rest: f64,
    pub bend: f64,
    pub stretch: f64,
    pub nu: f64,
    pub psi: f64,
}

impl Default for Rates {
    fn default() -> Self {
        use drapefit::optim::Group;
        Rates {
            zeta: Group::Zeta.default_rate(),
            rest: Group::Rest.default_rate(),
            bend: Group::Bend.default_rate(),
            stretch: Group::Stretch.default_rate(),
            nu: Group::Nu.default_rate(),
            psi: Group::Psi.default_rate(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DrapeSection {
    /// Fixed step count; unset drapes to equilibrium.
    pub steps: Option<usize>,
    /// Failure (exit 1) when the final max Green strain exceeds this.
    pub max_strain: f64,
    /// Write every state as `trajectory/frame_NNNN.obj`.
    pub export_frames: bool,
}

impl Default for DrapeSection {
    fn default() -> Self {
        DrapeSection { steps: None, max_strain: 0.1, export_frames: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GradcheckSection {
    pub groups: String,
    pub steps: usize,
    pub tolerance: f64,
    /// Test hook: scales the analytic gradient by `1 + corrupt_jacobian`.
    pub corrupt_jacobian: f64,
}

impl Default for GradcheckSection {
    fn default() -> Self {
        GradcheckSection { groups: "all".into(), steps: 30, tolerance: 1e-3, corrupt_jacobian: 0.0 }
    }
}

/// Ground-truth overrides and sampling of a synthetic target.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
    /// Every panel scaled about its pins by this factor (1 when unset).
    pub panel_scale: Option<f64>,
    pub bend: Option<f64>,
    pub stretch: Option<[f64; 3]>,
    pub nu: Option<Vec<f64>>,
    pub psi: Option<Vec<f64>>,
    pub noise: f64,
    pub dropout: f64,
}

/// Short flags accepted besides the dotted keys; `--groups` goes to
/// `groups_key`, the section of the running command.
fn alias(key: &str, groups_key: &str) -> Option<String> {
    let k = match key {
        "steps" => "drape.steps",
        "groups" => groups_key,
        "corrupt-jacobian" => "gradcheck.corrupt_jacobian",
        "out" => "output",
        _ => return None,
    };
    Some(k.to_string())
}

/// Split `--key value` pairs; `--config`/`-c` may appear among them.
pub fn parse_overrides(args: &[String], groups_key: &str) -> Result<(Option<PathBuf>, Vec<(String, String)>), ConfigError> {
    let mut config = None;
    let mut pairs = Vec::new();
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let (key, inline) = match a.strip_prefix("--") {
            Some(k) => match k.split_once('=') {
                Some((k, v)) => (k.to_string(), Some(v.to_string())),
                None => (k.to_string(), None),
            },
            None if a == "-c" => ("config".to_string(), None),
            None => return Err(err(format!("unexpected argument {a:?}; overrides look like --section.key value"))),
        };
        let value = match inline {
            Some(v) => v,
            None => it.next().cloned().ok_or_else(|| err(format!("--{key} needs a value")))?,
        };
        if key == "config" {
            config = Some(PathBuf::from(value));
            continue;
        }
        let key = alias(&key, groups_key).unwrap_or(key);
        pairs.push((key, value));
    }
    Ok((config, pairs))
}

/// TOML literal if it parses as one, else a bare string.
fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_key(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), ConfigError> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| err(format!("empty config key {key:?}")))?;
    let mut t = table;
    for p in parts {
        let entry = t.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        t = entry.as_table_mut().ok_or_else(|| err(format!("{key}: {p} is not a section")))?;
    }
    t.insert(last.to_string(), value);
    Ok(())
}

impl RunConfig {
    pub fn load(file: Option<&Path>, overrides: &[(String, String)]) -> Result<RunConfig, ConfigError> {
        let mut table = match file {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| err(format!("config {}: {e}", p.display())))?;
                toml::from_str::<toml::Table>(&text).map_err(|e| err(format!("config {}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for (k, v) in overrides {
            set_key(&mut table, k, parse_value(v))?;
        }
        let mut cfg: RunConfig =
            toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| err(format!("config: {}", e.message())))?;
        if cfg.scene.is_empty() && cfg.paths.pattern.is_none() {
            cfg.scene = "skirt".into();
        }
        if cfg.output.as_os_str().is_empty() {
            cfg.output = PathBuf::from("out");
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let p = &self.paths;
        for (key, path) in [
            ("paths.pattern", &p.pattern),
            ("paths.seams", &p.seams),
            ("paths.body", &p.body),
            ("paths.body_sidecar", &p.body_sidecar),
            ("paths.target_points", &p.target_points),
            ("paths.target_polylines", &p.target_polylines),
        ] {
            if let Some(path) = path {
                if !path.is_file() {
                    return Err(err(format!("{key}: no such file {}", path.display())));
                }
            }
        }
        if p.body.is_some() != p.body_sidecar.is_some() {
            return Err(err("paths.body and paths.body_sidecar must be given together"));
        }
        if p.target_points.is_some() != p.target_polylines.is_some() {
            return Err(err("paths.target_points and paths.target_polylines must be given together"));
        }
        let positive = |key: &str, v: Option<f64>| match v {
            Some(x) if !(x > 0.0 && x.is_finite()) => Err(err(format!("{key} must be > 0, got {x}"))),
            _ => Ok(()),
        };
        positive("sim.dt", self.sim.dt)?;
        positive("sim.v_tol", self.sim.v_tol)?;
        positive("material.density", self.material.density)?;
        positive("synth.panel_scale", self.synth.panel_scale)?;
        if let Some(d) = self.sim.damping {
            if !(d > 0.0 && d <= 1.0) {
                return Err(err(format!("sim.damping must be in (0, 1], got {d}")));
            }
        }
        if self.sim.iterations == Some(0) || self.sim.max_steps == Some(0) {
            return Err(err("sim.iterations and sim.max_steps must be >= 1"));
        }
        let l = &self.loss;
        for (key, w) in [("loss.boundary", l.boundary), ("loss.interior", l.interior), ("loss.seam", l.seam), ("loss.curvature", l.curvature)] {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(err(format!("{key} must be >= 0, got {w}")));
            }
        }
        if !["cage", "direct"].contains(&self.optim.mode.as_str()) {
            return Err(err(format!("optim.mode must be cage or direct, got {:?}", self.optim.mode)));
        }
        if !(0.0..1.0).contains(&self.synth.dropout) || !(self.synth.noise >= 0.0) {
            return Err(err("synth.dropout must be in [0, 1) and synth.noise >= 0"));
        }
        for (key, g) in [("optim.groups", &self.optim.groups), ("gradcheck.groups", &self.gradcheck.groups)] {
            drapefit::optim::parse_groups(g).map_err(|e| err(format!("{key}: {e}")))?;
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn dotted_overrides_and_aliases() {
        let (c, pairs) = parse_overrides(&args("--sim.dt 0.005 --steps 1 -c run.toml --loss.seam=2"), "optim.groups").unwrap();
        assert_eq!(c, Some(PathBuf::from("run.toml")));
        let cfg = RunConfig::load(None, &pairs).unwrap();
        assert_eq!(cfg.sim.dt, Some(0.005));
        assert_eq!(cfg.drape.steps, Some(1));
        assert_eq!(cfg.loss.seam, 2.0);
        assert_eq!(cfg.scene, "skirt");
    }

    #[test]
    fn unknown_keys_are_named() {
        let (_, pairs) = parse_overrides(&args("--sim.dtt 0.1"), "optim.groups").unwrap();
        let e = RunConfig::load(None, &pairs).unwrap_err();
        assert!(e.0.contains("dtt"), "{e}");
        assert!(parse_overrides(&args("--sim.dt"), "optim.groups").is_err());
        assert!(parse_overrides(&args("stray"), "optim.groups").is_err());
    }

    #[test]
    fn ranges_are_checked() {
        for bad in ["--sim.dt -1", "--loss.seam -0.5", "--optim.mode sideways", "--synth.dropout 1.5", "--optim.groups mass"] {
            let (_, pairs) = parse_overrides(&args(bad), "optim.groups").unwrap();
            assert!(RunConfig::load(None, &pairs).is_err(), "{bad}");
        }
    }

    #[test]
    fn missing_pattern_names_the_key() {
        let (_, pairs) = parse_overrides(&args("--paths.pattern /nonexistent/p.obj"), "optim.groups").unwrap();
        let e = RunConfig::load(None, &pairs).unwrap_err();
        assert!(e.0.contains("paths.pattern"), "{e}");
    }

    #[test]
    fn echoed_config_round_trips() {
        let (_, pairs) = parse_overrides(&args("--scene strip --sim.steps 7 --optim.rates.bend 0.3 --material.stretch [1e-3,2e-3,3e-3]"), "optim.groups").unwrap();
        let cfg = RunConfig::load(None, &pairs).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, cfg.to_toml()).unwrap();
        assert_eq!(RunConfig::load(Some(&p), &[]).unwrap(), cfg);
    }
}
