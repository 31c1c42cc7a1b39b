//! Command-line front end over the harness.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::harness::{self, ExperimentConfig, ExperimentOutput, PolicyConfig};
use crate::policy::PolicyKind;
use crate::topology::NodeId;

#[derive(Debug, Parser)]
#[command(name = "multistage", version, about = "Distributed online learning on multi-stage trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment and write its CSV files.
    Run(RunArgs),
    /// Run with windowed selection-probability traces enabled.
    Trace(RunArgs),
    /// Check a config (after overrides) without running or writing anything.
    Validate(RunArgs),
    /// List the bundled scenarios.
    Scenarios,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Path to a TOML config, or the name of a bundled scenario.
    config: String,
    /// Replace the horizon grid (comma separated).
    #[arg(long = "t", value_delimiter = ',')]
    horizons: Vec<u64>,
    /// Number of seeds per (policy, T).
    #[arg(long)]
    seeds: Option<usize>,
    /// Replace the policy list (comma separated).
    #[arg(long = "policy", value_delimiter = ',')]
    policies: Vec<PolicyKind>,
    /// Scenario id written to output rows and file names.
    #[arg(long)]
    scenario: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    master_seed: Option<u64>,
    #[arg(long)]
    trace_window: Option<u64>,
    /// Also write one row per seed.
    #[arg(long)]
    per_seed: bool,
}

impl RunArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let path = Path::new(&self.config);
        let mut cfg = if path.is_file() {
            ExperimentConfig::load(path)?
        } else {
            harness::bundled(&self.config)?
        };
        if !self.horizons.is_empty() {
            cfg.horizon.grid = self.horizons.clone();
            if cfg.horizon.anchor.is_some_and(|a| !self.horizons.contains(&a)) {
                cfg.horizon.anchor = None;
            }
        }
        if let Some(n) = self.seeds {
            cfg.seeds.count = n;
        }
        if !self.policies.is_empty() {
            let old = std::mem::take(&mut cfg.policies);
            cfg.policies = self
                .policies
                .iter()
                .map(|&k| {
                    old.iter()
                        .find(|p| p.kind == k)
                        .cloned()
                        .unwrap_or_else(|| PolicyConfig::new(k))
                })
                .collect();
        }
        if let Some(s) = &self.scenario {
            cfg.scenario = s.clone();
        }
        if let Some(o) = &self.out {
            cfg.output.dir = o.clone();
        }
        if let Some(m) = self.master_seed {
            cfg.seeds.master = m;
        }
        if let Some(w) = self.trace_window {
            cfg.trace.window = w;
        }
        if self.per_seed {
            cfg.output.per_seed = true;
        }
        Ok(cfg)
    }
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Scenarios => {
            let mut stdout = std::io::stdout().lock();
            for s in harness::BUNDLED {
                let cfg = s.config()?;
                writeln!(stdout, "{:<18} {}", s.name, cfg.description).map_err(|e| Error::io("<stdout>", e))?;
            }
            Ok(())
        }
        Command::Validate(args) => {
            let cfg = args.load()?;
            cfg.validate()?;
            eprintln!(
                "{}: ok ({} policies x {} horizons x {} seeds)",
                cfg.scenario,
                cfg.policies.len(),
                cfg.horizon.sorted_grid().len(),
                cfg.seeds.count
            );
            Ok(())
        }
        Command::Run(args) => execute(args.load()?),
        Command::Trace(args) => {
            let mut cfg = args.load()?;
            cfg.trace.enabled = true;
            if cfg.trace.watch.is_empty() {
                // every edge out of the root
                let tree = cfg.build_topology()?;
                cfg.trace.watch = tree.children(NodeId::ROOT).iter().map(|c| [0, c.0]).collect();
            }
            execute(cfg)
        }
    }
}

fn execute(cfg: ExperimentConfig) -> Result<()> {
    let out = harness::run_experiment(&cfg)?;
    summarize(&out);
    for p in harness::write_outputs(&out, &cfg.output.dir)? {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn summarize(out: &ExperimentOutput) {
    for a in &out.aggregates {
        eprintln!(
            "{} {} T={} seeds={} time_avg_regret={:.5} stddev={:.5}",
            a.scenario, a.policy, a.horizon, a.seed_count, a.mean_time_avg_regret, a.stddev
        );
    }
    for s in &out.slopes {
        eprintln!("{} {} loglog_slope={:.3}", out.config.scenario, s.policy, s.slope);
    }
}
