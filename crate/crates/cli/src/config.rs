use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use ncfolner::group::{parse_q, GroupModel, Schedule, Q};
use serde::{Deserialize, Serialize};

/// Which verification suites `verify` runs.
#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Suites {
    #[serde(default)]
    pub regularity: bool,
    #[serde(default)]
    pub cz: bool,
    #[serde(default)]
    pub cancellation: bool,
    #[serde(default)]
    pub local: bool,
    #[serde(default)]
    pub l2: bool,
    #[serde(default)]
    pub weak11: bool,
    #[serde(default)]
    pub maximal: bool,
    #[serde(default)]
    pub split: bool,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TileSection {
    /// Side length of the window shape.
    pub window: i64,
    /// Side lengths of the tile shapes, increasing.
    pub scales: Vec<i64>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSection {
    pub window: i64,
    /// Side length of the template `B`.
    pub template: i64,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, tag = "action", rename_all = "lowercase")]
pub enum ErgodicSection {
    /// Z acting by conjugation with a unitary; `theta` gives `u = diag(e^{iθ})`,
    /// otherwise a seeded generic unitary of dimension `dim`.
    Conjugation {
        #[serde(default)]
        theta: Option<Vec<f64>>,
        #[serde(default = "default_dim")]
        dim: usize,
        #[serde(default = "default_threshold")]
        threshold: f64,
    },
    /// Zᵈ translating functions on a discrete torus; `x` is a delta at the origin.
    Translation {
        periods: Vec<usize>,
        #[serde(default)]
        threshold: f64,
    },
}

fn default_dim() -> usize {
    3
}

fn default_threshold() -> f64 {
    1e-2
}

fn default_c() -> String {
    "1/2".into()
}

fn default_d() -> usize {
    2
}

fn default_density() -> f64 {
    0.3
}

fn default_ceiling() -> f64 {
    64.0
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub group: String,
    #[serde(default)]
    pub schedule: Schedule,
    /// Exact rational, e.g. `"1/4"`.
    pub eps: String,
    #[serde(default = "default_c")]
    pub c: String,
    #[serde(default)]
    pub depth: usize,
    #[serde(default)]
    pub lambdas: Vec<f64>,
    /// Matrix dimension of generated functions.
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Density of generated functions on the admissible region.
    #[serde(default = "default_density")]
    pub density: f64,
    /// Function file to use instead of a generated one.
    #[serde(default)]
    pub function: Option<PathBuf>,
    /// Replaces the built `Fₙ` by the canonical sets of this schedule before validation.
    #[serde(default)]
    pub override_folner: Option<Schedule>,
    #[serde(default = "default_ceiling")]
    pub weak_ceiling: f64,
    #[serde(default)]
    pub suites: Suites,
    #[serde(default)]
    pub tile: Option<TileSection>,
    #[serde(default)]
    pub partition: Option<PartitionSection>,
    #[serde(default)]
    pub ergodic: Option<ErgodicSection>,
}

/// Parsed numeric view of a [`RunConfig`].
pub struct Resolved {
    pub model: GroupModel,
    pub eps: Q,
    pub c: Q,
    pub output: PathBuf,
    pub function: Option<PathBuf>,
}

fn rational(field: &str, s: &str) -> Result<Q> {
    let v = parse_q(s).ok_or_else(|| anyhow!("field `{field}`: cannot parse {s:?} as a rational"))?;
    if v <= Q::from_integer(0.into()) {
        bail!("field `{field}`: must be positive, got {s}");
    }
    Ok(v)
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<(RunConfig, Resolved)> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: RunConfig = toml::from_str(&text).map_err(|e| anyhow!("{}: {e}", path.display()))?;
        let model = GroupModel::parse(&cfg.group).ok_or_else(|| anyhow!("field `group`: unknown group {:?}", cfg.group))?;
        let eps = rational("eps", &cfg.eps)?;
        let c = rational("c", &cfg.c)?;
        if !cfg.schedule.is_monotone(cfg.depth) {
            bail!("field `schedule`: side lengths must be positive and nondecreasing up to depth {}", cfg.depth);
        }
        if cfg.lambdas.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            bail!("field `lambdas`: values must be positive and finite");
        }
        if cfg.d == 0 || cfg.d > 16 {
            bail!("field `d`: must be in 1..=16");
        }
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        let output = rebase(&cfg.output);
        let function = cfg.function.as_deref().map(rebase);
        Ok((cfg, Resolved { model, eps, c, output, function }))
    }

    pub fn require_seed(&self, what: &str) -> Result<u64> {
        self.seed.ok_or_else(|| anyhow!("field `seed`: required for {what}"))
    }
}
