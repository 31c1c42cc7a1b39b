//! Experiment orchestration: seed batches over a grid of horizons, exact
//! aggregation, trend curves, slope fits and CSV output.

mod bundled;
mod config;
mod output;
mod stats;

pub use bundled::{bundled, bundled_names, BundledScenario, BUNDLED};
pub use config::{
    default_delta, shift_round, EnvironmentConfig, ExperimentConfig, HorizonConfig, LatencyConfig, OutputConfig,
    PolicyConfig, SeedConfig, TopologyConfig, TraceConfig, DEFAULT_MASTER_SEED,
};
pub use output::write_outputs;
pub use stats::{
    asymptotic_trend, fit_loglog_slope, fit_loglog_slope_floored, mean_and_stddev, AsymptoticTrend, REGRET_FLOOR,
};

use rayon::prelude::*;

use crate::engine::{Simulation, TraceRow};
use crate::error::Result;
use crate::policy::PolicyKind;
use crate::seeding::replication_seed;

/// One replication's end state.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedResult {
    pub policy: String,
    pub horizon: u64,
    pub seed_index: usize,
    pub seed: u64,
    pub cumulative_cost: f64,
    pub optimal_stationary_cost: f64,
    pub regret: f64,
}

impl SeedResult {
    pub fn time_average_regret(&self) -> f64 {
        self.regret / self.horizon as f64
    }
}

/// Seed-batch summary for one (policy, T).
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateResult {
    pub scenario: String,
    pub policy: String,
    pub fanout: usize,
    pub depth: usize,
    pub horizon: u64,
    pub seed_count: usize,
    pub mean_time_avg_regret: f64,
    pub stddev: f64,
    pub mean_regret: f64,
}

/// Windowed selection probabilities of seed 0 for one (policy, T).
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTrace {
    pub policy: String,
    pub horizon: u64,
    pub rows: Vec<TraceRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlopeFit {
    pub policy: String,
    pub slope: f64,
    pub floored_points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrendReport {
    pub policy: String,
    pub trend: AsymptoticTrend,
}

/// Everything one experiment produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    /// Sorted by (policy, T).
    pub aggregates: Vec<AggregateResult>,
    /// Sorted by (policy, T, seed index).
    pub per_seed: Vec<SeedResult>,
    pub traces: Vec<PolicyTrace>,
    pub slopes: Vec<SlopeFit>,
    pub trend: Option<TrendReport>,
}

impl ExperimentOutput {
    pub fn aggregate(&self, policy: &str, horizon: u64) -> Option<&AggregateResult> {
        self.aggregates.iter().find(|a| a.policy == policy && a.horizon == horizon)
    }

    pub fn slope(&self, policy: &str) -> Option<f64> {
        self.slopes.iter().find(|s| s.policy == policy).map(|s| s.slope)
    }

    pub fn trace(&self, policy: &str, horizon: u64) -> Option<&PolicyTrace> {
        self.traces.iter().find(|t| t.policy == policy && t.horizon == horizon)
    }
}

struct Job {
    policy: usize,
    horizon: u64,
    seed_index: usize,
}

/// Runs every (policy, T, seed) combination. Replication `k` uses the same
/// seed under every policy and horizon, so policies face identical cost
/// draws. Configuration problems are all reported before anything runs.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let tree = cfg.shared_topology()?;
    let grid = cfg.horizon.sorted_grid();
    let watch = if cfg.trace.enabled {
        cfg.trace_watch(&tree)?
    } else {
        Vec::new()
    };

    let mut jobs = Vec::new();
    for policy in 0..cfg.policies.len() {
        for &horizon in &grid {
            for seed_index in 0..cfg.seeds.count {
                jobs.push(Job {
                    policy,
                    horizon,
                    seed_index,
                });
            }
        }
    }

    let runs: Vec<(SeedResult, Option<Vec<TraceRow>>)> = jobs
        .par_iter()
        .map(|job| {
            let pc = &cfg.policies[job.policy];
            let seed = replication_seed(cfg.seeds.master, job.seed_index as u64);
            let env = cfg.build_environment(&tree, job.horizon)?;
            let policies = pc.spec().build(&tree, job.horizon)?;
            let mut sim = Simulation::new(tree.clone(), policies, env, pc.feedback(), seed)?;
            let tracing = cfg.trace.enabled && job.seed_index == 0 && !watch.is_empty();
            if tracing {
                sim.enable_trace(watch.clone(), cfg.trace.window)?;
            }
            sim.run(job.horizon)?;
            let ledger = sim.ledger();
            let result = SeedResult {
                policy: pc.label().to_owned(),
                horizon: job.horizon,
                seed_index: job.seed_index,
                seed,
                cumulative_cost: ledger.cumulative_cost(),
                optimal_stationary_cost: ledger.optimal_stationary_cost(),
                regret: ledger.regret(),
            };
            Ok((result, tracing.then(|| sim.take_trace())))
        })
        .collect::<Result<_>>()?;

    let mut per_seed = Vec::with_capacity(runs.len());
    let mut traces = Vec::new();
    for (r, tr) in runs {
        if let Some(rows) = tr {
            traces.push(PolicyTrace {
                policy: r.policy.clone(),
                horizon: r.horizon,
                rows,
            });
        }
        per_seed.push(r);
    }
    per_seed.sort_by(|a, b| (&a.policy, a.horizon, a.seed_index).cmp(&(&b.policy, b.horizon, b.seed_index)));
    traces.sort_by(|a, b| (&a.policy, a.horizon).cmp(&(&b.policy, b.horizon)));

    let aggregates = aggregate(cfg, &per_seed, tree.max_fanout(), tree.depth());
    let slopes = fit_slopes(cfg, &aggregates, &grid)?;
    let trend = match (cfg.policies.iter().find(|p| p.kind == PolicyKind::EpsExp3), cfg.horizon.anchor()) {
        (Some(p), Some(anchor)) => {
            let measured: Vec<(u64, f64)> = aggregates
                .iter()
                .filter(|a| a.policy == p.label())
                .map(|a| (a.horizon, a.mean_time_avg_regret))
                .collect();
            Some(TrendReport {
                policy: p.label().to_owned(),
                trend: asymptotic_trend(&measured, tree.depth(), anchor)?,
            })
        }
        _ => None,
    };

    Ok(ExperimentOutput {
        config: cfg.clone(),
        aggregates,
        per_seed,
        traces,
        slopes,
        trend,
    })
}

fn aggregate(cfg: &ExperimentConfig, per_seed: &[SeedResult], fanout: usize, depth: usize) -> Vec<AggregateResult> {
    let mut out = Vec::new();
    for chunk in per_seed.chunk_by(|a, b| a.policy == b.policy && a.horizon == b.horizon) {
        let tavg: Vec<f64> = chunk.iter().map(SeedResult::time_average_regret).collect();
        let regrets: Vec<f64> = chunk.iter().map(|r| r.regret).collect();
        let (mean, stddev) = mean_and_stddev(&tavg);
        out.push(AggregateResult {
            scenario: cfg.scenario.clone(),
            policy: chunk[0].policy.clone(),
            fanout,
            depth,
            horizon: chunk[0].horizon,
            seed_count: chunk.len(),
            mean_time_avg_regret: mean,
            stddev,
            mean_regret: mean_and_stddev(&regrets).0,
        });
    }
    out
}

fn fit_slopes(cfg: &ExperimentConfig, aggregates: &[AggregateResult], grid: &[u64]) -> Result<Vec<SlopeFit>> {
    if grid.len() < 3 {
        return Ok(Vec::new());
    }
    let mut labels: Vec<&str> = cfg.policies.iter().map(PolicyConfig::label).collect();
    labels.sort_unstable();
    labels
        .into_iter()
        .map(|label| {
            let pts: Vec<(f64, f64)> = aggregates
                .iter()
                .filter(|a| a.policy == label)
                .map(|a| (a.horizon as f64, a.mean_regret))
                .collect();
            let (slope, floored) = fit_loglog_slope_floored(&pts)?;
            Ok(SlopeFit {
                policy: label.to_owned(),
                slope,
                floored_points: floored.iter().filter(|&&f| f).count(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::PolicyKind;

    fn fixed_config() -> ExperimentConfig {
        ExperimentConfig::from_toml(
            r#"
            scenario = "fixed"
            topology = { kind = "uniform", fanout = 2, depth = 1 }
            environment = { kind = "bernoulli", means = [0.0, 1.0], shift = false }
            policies = [{ kind = "stationary" }]
            horizon = { grid = [10, 100] }
            seeds = { count = 1 }
            "#,
        )
        .unwrap()
    }

    #[test]
    fn stationary_optimum_aggregates_to_zero() {
        let out = run_experiment(&fixed_config()).unwrap();
        for a in &out.aggregates {
            assert_eq!(a.mean_time_avg_regret, 0.0);
            assert_eq!(a.stddev, 0.0);
            assert_eq!(a.seed_count, 1);
        }
    }

    #[test]
    fn replication_count_in_every_row() {
        let mut cfg = fixed_config();
        cfg.seeds.count = 20;
        cfg.policies.push(PolicyConfig::new(PolicyKind::Uniform));
        let out = run_experiment(&cfg).unwrap();
        assert_eq!(out.aggregates.len(), 4);
        assert!(out.aggregates.iter().all(|a| a.seed_count == 20));
        assert_eq!(out.per_seed.len(), 80);
    }

    #[test]
    fn common_seeds_across_policies() {
        let mut cfg = fixed_config();
        cfg.seeds.count = 3;
        cfg.policies.push(PolicyConfig::new(PolicyKind::Uniform));
        let out = run_experiment(&cfg).unwrap();
        let seeds = |p: &str| -> Vec<u64> { out.per_seed.iter().filter(|r| r.policy == p && r.horizon == 10).map(|r| r.seed).collect() };
        assert_eq!(seeds("stationary"), seeds("uniform"));
    }

    #[test]
    fn invalid_config_never_runs() {
        let mut cfg = fixed_config();
        cfg.seeds.count = 0;
        assert_eq!(run_experiment(&cfg).unwrap_err().exit_code(), 1);
    }
}
