use std::path::Path;

use super::{CostEnvironment, EnvRng};
use crate::error::{Error, Result};
use crate::topology::{NodeId, TreeTopology};

/// Replays a fixed cost matrix: row `t - 1` holds the costs of round `t`.
#[derive(Debug, Clone)]
pub struct ReplayEnv {
    rows: Vec<Vec<f64>>,
}

impl ReplayEnv {
    pub fn new(rows: Vec<Vec<f64>>, leaf_count: usize) -> Result<Self> {
        let mut errors = Vec::new();
        for (r, row) in rows.iter().enumerate() {
            if row.len() != leaf_count {
                errors.push(format!("row {}: {} entries, expected {leaf_count}", r + 1, row.len()));
            }
            for &v in row {
                if !(0.0..=1.0).contains(&v) {
                    errors.push(format!("row {}: cost {v} outside [0, 1]", r + 1));
                }
            }
        }
        if rows.is_empty() {
            errors.push("cost matrix has no rows".into());
        }
        if errors.is_empty() {
            Ok(Self { rows })
        } else {
            Err(Error::Config(errors))
        }
    }

    /// Reads a CSV whose header names the leaf node ids; columns may appear
    /// in any order but must cover every leaf of `tree` exactly once.
    pub fn from_csv_reader<R: std::io::Read>(reader: R, tree: &TreeTopology) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers()?.clone();
        let mut column_leaf = Vec::with_capacity(header.len());
        let mut seen = vec![false; tree.leaf_count()];
        let mut errors = Vec::new();
        for name in header.iter() {
            match name.parse::<usize>().ok().and_then(|id| tree.leaf_index(NodeId(id))) {
                Some(k) if !seen[k] => {
                    seen[k] = true;
                    column_leaf.push(k);
                }
                Some(_) => errors.push(format!("leaf column `{name}` repeated")),
                None => errors.push(format!("header `{name}` is not a leaf id")),
            }
        }
        for (k, s) in seen.iter().enumerate() {
            if !s {
                errors.push(format!("no column for leaf {}", tree.leaves()[k]));
            }
        }
        if !errors.is_empty() {
            return Err(Error::Config(errors));
        }
        let mut rows = Vec::new();
        for (r, record) in rdr.records().enumerate() {
            let record = record?;
            let mut row = vec![f64::NAN; tree.leaf_count()];
            for (col, field) in record.iter().enumerate() {
                let v: f64 = field.parse().map_err(|_| {
                    Error::Config(vec![format!("row {}: `{field}` is not a number", r + 1)])
                })?;
                if let Some(&k) = column_leaf.get(col) {
                    row[k] = v;
                }
            }
            rows.push(row);
        }
        Self::new(rows, tree.leaf_count())
    }

    pub fn from_csv_path(path: &Path, tree: &TreeTopology) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(file, tree)
    }

    pub fn rounds(&self) -> usize {
        self.rows.len()
    }

    fn row(&self, t: u64) -> &[f64] {
        let idx = (t.max(1) - 1) as usize;
        &self.rows[idx.min(self.rows.len() - 1)]
    }
}

impl CostEnvironment for ReplayEnv {
    fn leaf_count(&self) -> usize {
        self.rows[0].len()
    }

    /// Rounds past the end of the matrix repeat its last row; the harness
    /// rejects horizons longer than the matrix before a run starts.
    fn draw(&mut self, t: u64, _rng: &mut EnvRng, out: &mut [f64]) {
        out.copy_from_slice(self.row(t));
    }

    fn expected_costs(&self, t: u64) -> Option<Vec<f64>> {
        Some(self.row(t).to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::RoundStreams;

    #[test]
    fn reads_columns_in_any_order() {
        let tree = TreeTopology::uniform(2, 1).unwrap();
        let csv = "2,1\n0.5,0.25\n1,0\n";
        let mut env = ReplayEnv::from_csv_reader(csv.as_bytes(), &tree).unwrap();
        assert_eq!(env.rounds(), 2);
        let mut s = RoundStreams::new(0);
        assert_eq!(env.costs(1, s.for_round(1)), vec![0.25, 0.5]);
        assert_eq!(env.costs(2, s.for_round(2)), vec![0.0, 1.0]);
    }

    #[test]
    fn rejects_bad_files() {
        let tree = TreeTopology::uniform(2, 1).unwrap();
        for csv in ["1,0\n0,0\n", "1,1\n0,0\n", "1\n0\n", "1,2\n0,2\n", "1,2\n0,x\n", "1,2\n"] {
            assert!(
                ReplayEnv::from_csv_reader(csv.as_bytes(), &tree).is_err(),
                "accepted {csv:?}"
            );
        }
    }
}
