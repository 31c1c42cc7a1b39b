use std::path::{Path, PathBuf};

use super::ExperimentOutput;
use crate::error::{Error, Result};

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Numerical(format!("{}: {other:?}", path.display())),
    })
}

/// Writes the experiment's CSV files into `dir` (created if missing) and
/// returns their paths. File names are prefixed with the scenario id.
pub fn write_outputs(out: &ExperimentOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let scenario = &out.config.scenario;
    let mut written = Vec::new();

    let path = dir.join(format!("{scenario}_results.csv"));
    let mut w = writer(&path)?;
    w.write_record([
        "scenario",
        "policy",
        "D",
        "L",
        "T",
        "seed_count",
        "mean_time_avg_regret",
        "stddev",
    ])?;
    for a in &out.aggregates {
        w.write_record([
            a.scenario.clone(),
            a.policy.clone(),
            a.fanout.to_string(),
            a.depth.to_string(),
            a.horizon.to_string(),
            a.seed_count.to_string(),
            a.mean_time_avg_regret.to_string(),
            a.stddev.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    written.push(path);

    if out.config.output.per_seed {
        let path = dir.join(format!("{scenario}_per_seed.csv"));
        let mut w = writer(&path)?;
        w.write_record([
            "scenario",
            "policy",
            "T",
            "seed",
            "cumulative_cost",
            "optimal_stationary_cost",
            "regret",
        ])?;
        for r in &out.per_seed {
            w.write_record([
                scenario.clone(),
                r.policy.clone(),
                r.horizon.to_string(),
                r.seed.to_string(),
                r.cumulative_cost.to_string(),
                r.optimal_stationary_cost.to_string(),
                r.regret.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }

    if !out.slopes.is_empty() {
        let path = dir.join(format!("{scenario}_slopes.csv"));
        let mut w = writer(&path)?;
        w.write_record(["scenario", "policy", "loglog_slope", "floored_points"])?;
        for s in &out.slopes {
            w.write_record([
                scenario.clone(),
                s.policy.clone(),
                s.slope.to_string(),
                s.floored_points.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }

    if let Some(tr) = &out.trend {
        let path = dir.join(format!("{scenario}_trend.csv"));
        let mut w = writer(&path)?;
        w.write_record(["scenario", "policy", "L", "T", "anchor_T", "coefficient", "trend_time_avg_regret"])?;
        for &(t, v) in &tr.trend.points {
            w.write_record([
                scenario.clone(),
                tr.policy.clone(),
                tr.trend.depth.to_string(),
                t.to_string(),
                tr.trend.anchor.to_string(),
                tr.trend.coefficient.to_string(),
                v.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }

    for trace in &out.traces {
        let path = dir.join(format!("{scenario}_trace_{}_T{}.csv", trace.policy, trace.horizon));
        let mut w = writer(&path)?;
        w.write_record(["round_window_end", "node_id", "child_id", "mean_selection_probability"])?;
        for r in &trace.rows {
            w.write_record([
                r.round_window_end.to_string(),
                r.node.0.to_string(),
                r.child.0.to_string(),
                r.mean_selection_probability.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
