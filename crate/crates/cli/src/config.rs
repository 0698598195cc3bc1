//! Flat key=value experiment configuration with section prefixes.
//!
//! The format is intentionally primitive so run manifests diff cleanly:
//! one `section.key = value` pair per line, `#` comments, no nesting.
//! Parsing is strict: unknown keys and keys that do not apply to the
//! chosen experiment are rejected.

use std::collections::BTreeMap;
use std::path::PathBuf;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

type Result<T> = std::result::Result<T, ConfigError>;

fn err<T>(msg: impl Into<String>) -> Result<T> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    DetDecay,
    ConstantAttractor,
    SelfSimilar,
    StochEnergy,
    GirsanovCheck,
    MomentOracle,
    CorrectorSweep,
}

impl ExperimentKind {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "det_decay" => Self::DetDecay,
            "constant_attractor" => Self::ConstantAttractor,
            "self_similar" => Self::SelfSimilar,
            "stoch_energy" => Self::StochEnergy,
            "girsanov_check" => Self::GirsanovCheck,
            "moment_oracle" => Self::MomentOracle,
            "corrector_sweep" => Self::CorrectorSweep,
            other => return err(format!("unknown experiment kind '{other}'")),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::DetDecay => "det_decay",
            Self::ConstantAttractor => "constant_attractor",
            Self::SelfSimilar => "self_similar",
            Self::StochEnergy => "stoch_energy",
            Self::GirsanovCheck => "girsanov_check",
            Self::MomentOracle => "moment_oracle",
            Self::CorrectorSweep => "corrector_sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelChoice {
    Dn,
    Kp,
    Rcm,
}

impl ModelChoice {
    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "dn" => Self::Dn,
            "kp" => Self::Kp,
            "rcm" => Self::Rcm,
            other => return err(format!("unknown model kind '{other}'")),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Dn => "dn",
            Self::Kp => "kp",
            Self::Rcm => "rcm",
        }
    }
}

/// Fully resolved experiment configuration (defaults applied).
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub model: ModelChoice,
    pub d: u32,
    pub depth: u32,
    pub alpha: f64,
    pub gamma: f64,
    pub nu: f64,
    pub forcing: f64,
    pub log_bound: f64,
    pub deltas: Option<Vec<f64>>,
    pub dt: f64,
    pub t_end: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub stride: usize,
    pub store_states: bool,
    pub record_nodes: bool,
    pub a0: f64,
    pub a1: Option<f64>,
    pub t0: f64,
    pub decaying: bool,
    pub n_initial: usize,
    pub shells: Vec<u32>,
    pub nu_target: f64,
    pub field_m_max: u32,
    pub n_fields: usize,
    pub out_dir: PathBuf,
}

/// Keys applicable to every experiment.
const COMMON_KEYS: &[&str] = &["experiment.kind", "numerics.seed", "output.dir"];

fn allowed_keys(kind: ExperimentKind) -> &'static [&'static str] {
    use ExperimentKind::*;
    match kind {
        DetDecay => &[
            "model.kind",
            "topology.d",
            "topology.depth",
            "scheme.alpha",
            "scheme.gamma",
            "scheme.nu",
            "scheme.f",
            "scheme.deltas",
            "scheme.log_bound",
            "numerics.dt",
            "numerics.t_end",
            "numerics.stride",
            "numerics.store_states",
        ],
        ConstantAttractor => &[
            "topology.depth",
            "scheme.alpha",
            "scheme.gamma",
            "scheme.nu",
            "scheme.f",
            "numerics.dt",
            "numerics.t_end",
            "numerics.stride",
            "attractor.n_initial",
        ],
        SelfSimilar => &[
            "topology.depth",
            "scheme.alpha",
            "scheme.gamma",
            "numerics.dt",
            "numerics.t_end",
            "numerics.stride",
            "profile.a0",
            "profile.a1",
            "profile.t0",
            "profile.decaying",
        ],
        StochEnergy => &[
            "model.kind",
            "topology.d",
            "topology.depth",
            "scheme.alpha",
            "scheme.gamma",
            "scheme.f",
            "scheme.deltas",
            "scheme.log_bound",
            "numerics.dt",
            "numerics.t_end",
            "numerics.n_paths",
            "numerics.stride",
            "numerics.record_nodes",
        ],
        GirsanovCheck => &[
            "topology.depth",
            "scheme.alpha",
            "scheme.gamma",
            "scheme.f",
            "numerics.dt",
            "numerics.t_end",
            "numerics.n_paths",
            "numerics.stride",
        ],
        MomentOracle => &[
            "model.kind",
            "topology.d",
            "topology.depth",
            "scheme.alpha",
            "scheme.gamma",
            "scheme.f",
            "scheme.deltas",
            "scheme.log_bound",
            "numerics.dt",
            "numerics.t_end",
            "numerics.n_paths",
        ],
        CorrectorSweep => &[
            "corrector.shells",
            "corrector.nu_target",
            "corrector.field_m_max",
            "corrector.n_fields",
        ],
    }
}

/// Parse the flat text into key/value pairs; duplicate keys are rejected.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut pairs = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return err(format!("line {}: expected 'key = value', got '{raw}'", lineno + 1));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if value.is_empty() {
            return err(format!("line {}: empty value for '{key}'", lineno + 1));
        }
        if pairs.insert(key.clone(), value).is_some() {
            return err(format!("line {}: duplicate key '{key}'", lineno + 1));
        }
    }
    Ok(pairs)
}

struct Getter<'a> {
    pairs: &'a BTreeMap<String, String>,
}

impl<'a> Getter<'a> {
    fn f64(&self, key: &str, default: f64) -> Result<f64> {
        match self.pairs.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| ConfigError(format!("'{key}': bad float '{v}'"))),
        }
    }

    fn usize(&self, key: &str, default: usize) -> Result<usize> {
        match self.pairs.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| ConfigError(format!("'{key}': bad integer '{v}'"))),
        }
    }

    fn u32(&self, key: &str, default: u32) -> Result<u32> {
        match self.pairs.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| ConfigError(format!("'{key}': bad integer '{v}'"))),
        }
    }

    fn u64(&self, key: &str, default: u64) -> Result<u64> {
        match self.pairs.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| ConfigError(format!("'{key}': bad integer '{v}'"))),
        }
    }

    fn bool(&self, key: &str, default: bool) -> Result<bool> {
        match self.pairs.get(key).map(String::as_str) {
            None => Ok(default),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(v) => err(format!("'{key}': expected true/false, got '{v}'")),
        }
    }

    fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.pairs.get(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|p| p.trim().parse().map_err(|_| ConfigError(format!("'{key}': bad float '{p}'"))))
                .collect::<Result<Vec<f64>>>()
                .map(Some),
        }
    }

    fn u32_list(&self, key: &str, default: &[u32]) -> Result<Vec<u32>> {
        match self.pairs.get(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|p| p.trim().parse().map_err(|_| ConfigError(format!("'{key}': bad integer '{p}'"))))
                .collect(),
        }
    }
}

/// Resolve raw pairs into a full configuration, applying per-experiment
/// defaults and rejecting inapplicable keys.
pub fn resolve(pairs: &BTreeMap<String, String>) -> Result<ExperimentConfig> {
    let kind_str = pairs
        .get("experiment.kind")
        .ok_or_else(|| ConfigError("missing required key 'experiment.kind'".into()))?;
    let kind = ExperimentKind::parse(kind_str)?;
    let allowed = allowed_keys(kind);
    for key in pairs.keys() {
        if !COMMON_KEYS.contains(&key.as_str()) && !allowed.contains(&key.as_str()) {
            return err(format!(
                "key '{key}' is not recognised for experiment '{}'",
                kind.name()
            ));
        }
    }
    let g = Getter { pairs };
    use ExperimentKind::*;

    let model = match pairs.get("model.kind") {
        Some(v) => ModelChoice::parse(v)?,
        None => match kind {
            MomentOracle => ModelChoice::Kp,
            _ => ModelChoice::Dn,
        },
    };
    let default_depth = match kind {
        DetDecay | ConstantAttractor => 10,
        SelfSimilar => 12,
        StochEnergy => 6,
        GirsanovCheck => 3,
        MomentOracle => 4,
        CorrectorSweep => 1,
    };
    let default_alpha = match kind {
        DetDecay | ConstantAttractor | SelfSimilar => 1.0,
        MomentOracle => 0.25,
        _ => 0.5,
    };
    let default_nu = if kind == ConstantAttractor { 1e-3 } else { 0.0 };
    let default_f = if kind == ConstantAttractor { 1.0 } else { 0.0 };
    let default_dt = match kind {
        DetDecay | ConstantAttractor | SelfSimilar => 1e-3,
        StochEnergy => 1e-4,
        GirsanovCheck | MomentOracle => 2.5e-4,
        CorrectorSweep => 0.0,
    };
    let default_t_end = match kind {
        DetDecay => 10.0,
        ConstantAttractor => 200.0,
        SelfSimilar => 5.0,
        StochEnergy => 1.0,
        GirsanovCheck => 0.25,
        MomentOracle => 0.5,
        CorrectorSweep => 0.0,
    };
    let default_paths = match kind {
        StochEnergy => 100,
        GirsanovCheck | MomentOracle => 10_000,
        _ => 1,
    };
    let default_stride = match kind {
        ConstantAttractor => 1000,
        StochEnergy => 100,
        _ => 10,
    };

    let config = ExperimentConfig {
        kind,
        model,
        d: g.u32("topology.d", 1)?,
        depth: g.u32("topology.depth", default_depth)?,
        alpha: g.f64("scheme.alpha", default_alpha)?,
        gamma: g.f64("scheme.gamma", 1.0)?,
        nu: g.f64("scheme.nu", default_nu)?,
        forcing: g.f64("scheme.f", default_f)?,
        log_bound: g.f64("scheme.log_bound", dyadic_core::scheme::DEFAULT_LOG_BOUND)?,
        deltas: g.f64_list("scheme.deltas")?,
        dt: g.f64("numerics.dt", default_dt)?,
        t_end: g.f64("numerics.t_end", default_t_end)?,
        n_paths: g.usize("numerics.n_paths", default_paths)?,
        seed: g.u64("numerics.seed", 42)?,
        stride: g.usize("numerics.stride", default_stride)?,
        store_states: g.bool("numerics.store_states", true)?,
        record_nodes: g.bool("numerics.record_nodes", false)?,
        a0: g.f64("profile.a0", 1.0)?,
        a1: g.f64("profile.a1", f64::NAN).map(|v| if v.is_nan() { None } else { Some(v) })?,
        t0: g.f64("profile.t0", -1.0)?,
        decaying: g.bool("profile.decaying", true)?,
        n_initial: g.usize("attractor.n_initial", 20)?,
        shells: g.u32_list("corrector.shells", &[2, 4, 8])?,
        nu_target: g.f64("corrector.nu_target", 1.0)?,
        field_m_max: g.u32("corrector.field_m_max", 2)?,
        n_fields: g.usize("corrector.n_fields", 4)?,
        out_dir: PathBuf::from(
            pairs
                .get("output.dir")
                .cloned()
                .unwrap_or_else(|| format!("out/{}", kind.name())),
        ),
    };
    Ok(config)
}

pub fn load(text: &str) -> Result<ExperimentConfig> {
    resolve(&parse_pairs(text)?)
}

impl ExperimentConfig {
    /// Canonical sorted echo of the resolved configuration; floats carry
    /// 17 significant digits so the echo reparses to the same run. Only
    /// keys the strict parser accepts for this experiment appear, and
    /// execution details (thread count) are deliberately absent.
    pub fn canonical_echo(&self) -> String {
        use dyadic_core::io::fmt_f64 as f;
        let deltas_joined = self
            .deltas
            .as_ref()
            .map(|d| d.iter().map(|v| f(*v)).collect::<Vec<_>>().join(","));
        let shells_joined = self.shells.iter().map(u32::to_string).collect::<Vec<_>>().join(",");
        let candidates: Vec<(&str, Option<String>)> = vec![
            ("experiment.kind", Some(self.kind.name().to_string())),
            ("model.kind", Some(self.model.name().to_string())),
            ("topology.d", Some(self.d.to_string())),
            ("topology.depth", Some(self.depth.to_string())),
            ("scheme.alpha", Some(f(self.alpha))),
            ("scheme.gamma", Some(f(self.gamma))),
            ("scheme.nu", Some(f(self.nu))),
            ("scheme.f", Some(f(self.forcing))),
            ("scheme.log_bound", Some(f(self.log_bound))),
            ("scheme.deltas", deltas_joined),
            ("numerics.dt", Some(f(self.dt))),
            ("numerics.t_end", Some(f(self.t_end))),
            ("numerics.n_paths", Some(self.n_paths.to_string())),
            ("numerics.seed", Some(self.seed.to_string())),
            ("numerics.stride", Some(self.stride.to_string())),
            ("numerics.store_states", Some(self.store_states.to_string())),
            ("numerics.record_nodes", Some(self.record_nodes.to_string())),
            ("profile.a0", Some(f(self.a0))),
            ("profile.a1", self.a1.map(f)),
            ("profile.t0", Some(f(self.t0))),
            ("profile.decaying", Some(self.decaying.to_string())),
            ("attractor.n_initial", Some(self.n_initial.to_string())),
            ("corrector.shells", Some(shells_joined)),
            ("corrector.nu_target", Some(f(self.nu_target))),
            ("corrector.field_m_max", Some(self.field_m_max.to_string())),
            ("corrector.n_fields", Some(self.n_fields.to_string())),
            ("output.dir", Some(self.out_dir.display().to_string())),
        ];
        let allowed = allowed_keys(self.kind);
        let mut lines: Vec<String> = candidates
            .into_iter()
            .filter(|(key, _)| COMMON_KEYS.contains(key) || allowed.contains(key))
            .filter_map(|(key, value)| value.map(|v| format!("{key} = {v}")))
            .collect();
        lines.sort();
        let mut out = String::new();
        for l in lines {
            out.push_str(&l);
            out.push('\n');
        }
        out
    }
}
