use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::engine::FeedbackModel;
use crate::env::{
    BernoulliTreeEnv, CostEnvironment, DeadlineLatencyEnv, LatencyDefaults, LowerBoundChainEnv, ProcessingProfile,
    ReplayEnv,
};
use crate::error::{Error, Result};
use crate::policy::{PolicyKind, PolicyOverrides, PolicySpec};
use crate::topology::{NodeId, TreeTopology};

/// Master seed used when neither the config nor the command line sets one.
pub const DEFAULT_MASTER_SEED: u64 = 0x5eed_2024;

/// One experiment: a scenario, the policies to compare, a grid of horizons
/// and a seed batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    #[serde(default)]
    pub description: String,
    pub topology: TopologyConfig,
    pub environment: EnvironmentConfig,
    pub policies: Vec<PolicyConfig>,
    pub horizon: HorizonConfig,
    #[serde(default)]
    pub seeds: SeedConfig,
    #[serde(default)]
    pub trace: TraceConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Directory that relative paths inside the config resolve against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TopologyConfig {
    Uniform { fanout: usize, depth: usize },
    Chain { depth: usize },
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EnvironmentConfig {
    /// Bernoulli leaves. Either explicit `means` or the staircase layout
    /// with `p_min`; the leaf `shift_leaf` (a leaf index) drops to 0 at
    /// round `round(shift_fraction * T)`.
    Bernoulli {
        p_min: Option<f64>,
        means: Option<Vec<f64>>,
        #[serde(default = "default_shift_fraction")]
        shift_fraction: f64,
        #[serde(default)]
        shift_leaf: usize,
        #[serde(default = "yes")]
        shift: bool,
    },
    /// Chain tree whose leaf means form the ladder; `delta` defaults to
    /// `2^-(L+1)`.
    LowerBound {
        delta: Option<f64>,
        #[serde(default = "yes")]
        best_last_leaf: bool,
    },
    EdgeComputing {
        #[serde(default)]
        latency: LatencyConfig,
    },
    MultiHop {
        #[serde(default)]
        latency: LatencyConfig,
    },
    Csv { path: PathBuf },
}

fn default_shift_fraction() -> f64 {
    0.01
}

fn yes() -> bool {
    true
}

/// Overrides for [`LatencyDefaults`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencyConfig {
    pub constant_rate: Option<f64>,
    pub ramp_start: Option<f64>,
    pub ramp_end: Option<f64>,
    pub precise_time: Option<f64>,
    pub precise_miss_rate: Option<f64>,
    pub fast_time: Option<f64>,
    pub fast_miss_rate: Option<f64>,
    pub deadline: Option<f64>,
}

impl LatencyConfig {
    pub fn resolve(&self) -> LatencyDefaults {
        let d = LatencyDefaults::default();
        LatencyDefaults {
            constant_rate: self.constant_rate.unwrap_or(d.constant_rate),
            ramp_start: self.ramp_start.unwrap_or(d.ramp_start),
            ramp_end: self.ramp_end.unwrap_or(d.ramp_end),
            precise: ProcessingProfile {
                time: self.precise_time.unwrap_or(d.precise.time),
                miss_rate: self.precise_miss_rate.unwrap_or(d.precise.miss_rate),
            },
            fast: ProcessingProfile {
                time: self.fast_time.unwrap_or(d.fast.time),
                miss_rate: self.fast_miss_rate.unwrap_or(d.fast.miss_rate),
            },
            deadline: self.deadline.unwrap_or(d.deadline),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    /// Name used in output rows; defaults to the policy kind.
    pub label: Option<String>,
    /// Defaults to the policy's natural feedback model.
    pub feedback: Option<FeedbackModel>,
    #[serde(default)]
    pub overrides: PolicyOverrides,
}

impl PolicyConfig {
    pub fn new(kind: PolicyKind) -> Self {
        Self {
            kind,
            label: None,
            feedback: None,
            overrides: PolicyOverrides::default(),
        }
    }

    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or(self.kind.as_str())
    }

    pub fn feedback(&self) -> FeedbackModel {
        self.feedback.unwrap_or(self.kind.natural_feedback())
    }

    pub fn spec(&self) -> PolicySpec {
        PolicySpec::with_overrides(self.kind, self.overrides.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizonConfig {
    pub grid: Vec<u64>,
    /// Horizon the asymptotic trend is anchored at; defaults to the middle
    /// of the sorted grid.
    pub anchor: Option<u64>,
}

impl HorizonConfig {
    pub fn sorted_grid(&self) -> Vec<u64> {
        let mut g = self.grid.clone();
        g.sort_unstable();
        g.dedup();
        g
    }

    pub fn anchor(&self) -> Option<u64> {
        self.anchor.or_else(|| {
            let g = self.sorted_grid();
            g.get(g.len() / 2).copied()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedConfig {
    #[serde(default = "default_seed_count")]
    pub count: usize,
    #[serde(default = "default_master")]
    pub master: u64,
}

fn default_seed_count() -> usize {
    20
}

fn default_master() -> u64 {
    DEFAULT_MASTER_SEED
}

impl Default for SeedConfig {
    fn default() -> Self {
        Self {
            count: default_seed_count(),
            master: DEFAULT_MASTER_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceConfig {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_window")]
    pub window: u64,
    /// `[node id, child node id]` pairs.
    #[serde(default)]
    pub watch: Vec<[usize; 2]>,
}

fn default_window() -> u64 {
    1000
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            window: default_window(),
            watch: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub per_seed: bool,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("results")
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_out_dir(),
            per_seed: false,
        }
    }
}

impl ExperimentConfig {
    /// Parses TOML without validating.
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(vec![e.to_string().trim_end().to_owned()]))
    }

    /// Reads a config file; relative paths inside it resolve against its
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msgs) => Error::Config(msgs.into_iter().map(|m| format!("{}: {m}", path.display())).collect()),
            other => other,
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(base) if p.is_relative() => base.join(p),
            _ => p.to_path_buf(),
        }
    }

    /// Builds the tree.
    pub fn build_topology(&self) -> Result<TreeTopology> {
        match &self.topology {
            TopologyConfig::Uniform { fanout, depth } => TreeTopology::uniform(*fanout, *depth),
            TopologyConfig::Chain { depth } => TreeTopology::chain(*depth),
            TopologyConfig::File { path } => TreeTopology::load(&self.resolve(path)),
        }
    }

    /// Builds a fresh environment for a run of `horizon` rounds.
    pub fn build_environment(&self, tree: &TreeTopology, horizon: u64) -> Result<Box<dyn CostEnvironment>> {
        Ok(match &self.environment {
            EnvironmentConfig::Bernoulli {
                p_min,
                means,
                shift_fraction,
                shift_leaf,
                shift,
            } => {
                let shift_round = shift.then(|| shift_round(horizon, *shift_fraction));
                let env = match (means, p_min) {
                    (Some(m), _) => BernoulliTreeEnv::new(m.clone(), shift_round, *shift_leaf)?,
                    (None, Some(p)) => BernoulliTreeEnv::staircase(tree.leaf_count(), *p, shift_round, *shift_leaf)?,
                    (None, None) => return Err(Error::param("environment", "needs `p_min` or `means`")),
                };
                Box::new(env)
            }
            EnvironmentConfig::LowerBound { delta, best_last_leaf } => {
                let l = tree.depth();
                let delta = delta.unwrap_or_else(|| default_delta(l));
                Box::new(LowerBoundChainEnv::new(l, delta, *best_last_leaf)?)
            }
            EnvironmentConfig::EdgeComputing { latency } => Box::new(DeadlineLatencyEnv::edge_computing(
                tree.max_fanout(),
                horizon,
                &latency.resolve(),
            )?),
            EnvironmentConfig::MultiHop { latency } => {
                Box::new(DeadlineLatencyEnv::multi_hop(tree, horizon, &latency.resolve())?)
            }
            EnvironmentConfig::Csv { path } => Box::new(ReplayEnv::from_csv_path(&self.resolve(path), tree)?),
        })
    }

    /// Watched pairs as `(node, child position)`.
    pub fn trace_watch(&self, tree: &TreeTopology) -> Result<Vec<(NodeId, usize)>> {
        self.trace
            .watch
            .iter()
            .map(|&[node, child]| {
                let n = NodeId(node);
                if !tree.contains(n) {
                    return Err(Error::param("trace.watch", format!("node {node} is not in the tree")));
                }
                tree.children(n)
                    .iter()
                    .position(|c| c.0 == child)
                    .map(|pos| (n, pos))
                    .ok_or_else(|| Error::param("trace.watch", format!("{child} is not a child of node {node}")))
            })
            .collect()
    }

    /// Checks everything that can be checked before running and reports
    /// every problem at once.
    pub fn validate(&self) -> Result<()> {
        let mut errs: Vec<String> = Vec::new();
        if self.scenario.trim().is_empty() {
            errs.push("scenario: must not be empty".into());
        }

        match &self.topology {
            TopologyConfig::Uniform { fanout, depth } => {
                if *fanout < 2 {
                    errs.push(format!("topology.fanout: must be at least 2, got {fanout}"));
                }
                if *depth < 1 {
                    errs.push(format!("topology.depth: must be at least 1, got {depth}"));
                }
            }
            TopologyConfig::Chain { depth } => {
                if *depth < 2 {
                    errs.push(format!("topology.depth: chain needs depth at least 2, got {depth}"));
                }
            }
            TopologyConfig::File { .. } => {}
        }
        let tree = if errs.is_empty() {
            match self.build_topology() {
                Ok(t) => Some(t),
                Err(e) => {
                    errs.push(format!("topology: {e}"));
                    None
                }
            }
        } else {
            None
        };

        if self.horizon.grid.is_empty() {
            errs.push("horizon.grid: must list at least one horizon".into());
        }
        if let Some(t) = self.horizon.grid.iter().find(|&&t| t < 1) {
            errs.push(format!("horizon.grid: every horizon must be at least 1, got {t}"));
        }
        if let Some(a) = self.horizon.anchor {
            if !self.horizon.grid.contains(&a) {
                errs.push(format!("horizon.anchor: {a} is not in the grid"));
            }
        }
        if self.seeds.count < 1 {
            errs.push("seeds.count: must be at least 1".into());
        }
        if self.trace.window < 1 {
            errs.push("trace.window: must be at least 1".into());
        }

        match &self.environment {
            EnvironmentConfig::Bernoulli {
                p_min,
                means,
                shift_fraction,
                ..
            } => {
                if means.is_none() && p_min.is_none() {
                    errs.push("environment: bernoulli needs `p_min` or `means`".into());
                }
                if let Some(p) = p_min {
                    if !(0.0..1.0).contains(p) {
                        errs.push(format!("environment.p_min: must be in [0, 1), got {p}"));
                    }
                }
                if !(0.0..=1.0).contains(shift_fraction) {
                    errs.push(format!("environment.shift_fraction: must be in [0, 1], got {shift_fraction}"));
                }
            }
            EnvironmentConfig::LowerBound { delta, .. } => {
                if !matches!(self.topology, TopologyConfig::Chain { .. }) {
                    errs.push("environment: lower-bound needs a chain topology".into());
                }
                if let (Some(d), TopologyConfig::Chain { depth }) = (delta, &self.topology) {
                    let cap = 0.5f64.powi(*depth as i32);
                    if !(*d > 0.0 && *d < cap) {
                        errs.push(format!("environment.delta: must be in (0, {cap}), got {d}"));
                    }
                }
            }
            EnvironmentConfig::EdgeComputing { .. } => {
                if let Some(t) = &tree {
                    if !(t.depth() == 2 && t.is_uniform_depth() && t.internal_nodes().all(|n| t.children(n).len() == t.max_fanout())) {
                        errs.push("environment: edge-computing needs a complete uniform tree of depth 2".into());
                    }
                }
            }
            EnvironmentConfig::MultiHop { .. } | EnvironmentConfig::Csv { .. } => {}
        }
        if let (Some(t), Some(&h)) = (&tree, self.horizon.grid.iter().min()) {
            if errs.is_empty() {
                match self.build_environment(t, h) {
                    Ok(env) => {
                        if env.leaf_count() != t.leaf_count() {
                            errs.push(format!(
                                "environment: provides {} leaf costs, tree has {} leaves",
                                env.leaf_count(),
                                t.leaf_count()
                            ));
                        }
                    }
                    Err(e) => errs.push(format!("environment: {e}")),
                }
            }
        }

        if self.policies.is_empty() {
            errs.push("policies: list at least one policy".into());
        }
        let mut labels = HashSet::new();
        for (k, p) in self.policies.iter().enumerate() {
            if !labels.insert(p.label()) {
                errs.push(format!("policies[{k}].label: `{}` used twice", p.label()));
            }
            if !p.kind.supports(p.feedback()) {
                errs.push(format!("policies[{k}].feedback: {} cannot run under {}", p.kind, p.feedback()));
            }
            if let (Some(t), Some(&h)) = (&tree, self.horizon.grid.iter().min()) {
                if let Err(e) = p.spec().build(t, h) {
                    errs.push(format!("policies[{k}]: {e}"));
                }
            }
        }

        if let Some(t) = &tree {
            if let Err(e) = self.trace_watch(t) {
                errs.push(e.to_string());
            }
        }

        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    /// Tree plus the shared handle the runner uses.
    pub(crate) fn shared_topology(&self) -> Result<Arc<TreeTopology>> {
        self.build_topology().map(Arc::new)
    }
}

/// Round at which a fraction `frac` of the horizon has elapsed, at least 1.
pub fn shift_round(horizon: u64, frac: f64) -> u64 {
    ((horizon as f64 * frac).round() as u64).max(1)
}

/// `2^-(L+1)`.
pub fn default_delta(depth: usize) -> f64 {
    0.5f64.powi(depth as i32 + 1)
}
