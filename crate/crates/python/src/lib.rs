//! Python bindings for the `multistage` simulator.

use std::sync::Arc;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use multistage::harness::{self, ExperimentConfig};
use multistage::policy::{default_params, PolicyKind, PolicySpec};
use multistage::{Error, NodeId, Simulation, TreeTopology};

fn to_py(e: Error) -> PyErr {
    match e.exit_code() {
        1 => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Immutable rooted tree; ids are breadth first with the root at 0.
#[pyclass(name = "Tree", frozen)]
struct PyTree {
    inner: Arc<TreeTopology>,
}

#[pymethods]
impl PyTree {
    #[staticmethod]
    fn uniform(fanout: usize, depth: usize) -> PyResult<Self> {
        Ok(Self {
            inner: Arc::new(TreeTopology::uniform(fanout, depth).map_err(to_py)?),
        })
    }

    #[staticmethod]
    fn chain(depth: usize) -> PyResult<Self> {
        Ok(Self {
            inner: Arc::new(TreeTopology::chain(depth).map_err(to_py)?),
        })
    }

    #[staticmethod]
    fn from_adjacency(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: Arc::new(TreeTopology::parse_adjacency(text).map_err(to_py)?),
        })
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    #[getter]
    fn depth(&self) -> usize {
        self.inner.depth()
    }

    #[getter]
    fn leaves(&self) -> Vec<usize> {
        self.inner.leaves().iter().map(|n| n.0).collect()
    }

    fn children(&self, node: usize) -> PyResult<Vec<usize>> {
        if !self.inner.contains(NodeId(node)) {
            return Err(to_py(Error::UnknownNode(NodeId(node))));
        }
        Ok(self.inner.children(NodeId(node)).iter().map(|n| n.0).collect())
    }

    fn hops_from_root(&self, node: usize) -> PyResult<usize> {
        self.inner.hops_from_root(NodeId(node)).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "Tree(nodes={}, leaves={}, depth={})",
            self.inner.node_count(),
            self.inner.leaf_count(),
            self.inner.depth()
        )
    }
}

/// One replication of a config's scenario under one policy.
#[pyclass(name = "Simulation", unsendable)]
struct PySimulation {
    inner: Simulation,
    horizon: u64,
}

#[pymethods]
impl PySimulation {
    /// `config` is a TOML string or the name of a bundled scenario.
    #[new]
    #[pyo3(signature = (config, policy, horizon, seed = 0))]
    fn new(config: &str, policy: &str, horizon: u64, seed: u64) -> PyResult<Self> {
        let cfg = load_config(config)?;
        let kind: PolicyKind = policy.parse().map_err(to_py)?;
        let pc = cfg
            .policies
            .iter()
            .find(|p| p.kind == kind)
            .cloned()
            .unwrap_or_else(|| harness::PolicyConfig::new(kind));
        let tree = Arc::new(cfg.build_topology().map_err(to_py)?);
        let env = cfg.build_environment(&tree, horizon).map_err(to_py)?;
        let policies = PolicySpec::with_overrides(kind, pc.overrides.clone())
            .build(&tree, horizon)
            .map_err(to_py)?;
        let inner = Simulation::new(tree, policies, env, pc.feedback(), seed).map_err(to_py)?;
        Ok(Self { inner, horizon })
    }

    /// Plays one round; returns path, realized cost and receive probabilities.
    fn step<'py>(&mut self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let out = self.inner.run_round().map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("round", out.round)?;
        d.set_item("path", out.path.iter().map(|n| n.0).collect::<Vec<_>>())?;
        d.set_item("realized_cost", out.realized_cost)?;
        d.set_item("receive_probs", out.receive_probs)?;
        Ok(d)
    }

    /// Plays `rounds` rounds, or the rest of the horizon when omitted.
    #[pyo3(signature = (rounds = None))]
    fn run(&mut self, py: Python<'_>, rounds: Option<u64>) -> PyResult<f64> {
        let n = rounds.unwrap_or(self.horizon.saturating_sub(self.inner.round()));
        let sim = &mut self.inner;
        py.detach(|| sim.run(n).map(|l| l.regret())).map_err(to_py)
    }

    fn distribution(&self, node: usize) -> PyResult<Vec<f64>> {
        self.inner.selection_distribution(NodeId(node)).map_err(to_py)
    }

    #[getter]
    fn round(&self) -> u64 {
        self.inner.round()
    }

    #[getter]
    fn regret(&self) -> f64 {
        self.inner.ledger().regret()
    }

    #[getter]
    fn time_average_regret(&self) -> f64 {
        self.inner.ledger().time_average_regret()
    }

    #[getter]
    fn cumulative_cost(&self) -> f64 {
        self.inner.ledger().cumulative_cost()
    }
}

fn load_config(config: &str) -> PyResult<ExperimentConfig> {
    if harness::bundled_names().any(|n| n == config) {
        harness::bundled(config)
    } else {
        ExperimentConfig::from_toml(config)
    }
    .map_err(to_py)
}

/// `(eta, epsilon)` for ε-EXP3 at a node.
#[pyfunction]
fn eps_exp3_params(horizon: u64, depth: usize, fanout: usize, children_all_leaves: bool) -> (f64, f64) {
    let p = default_params(horizon, depth, fanout, children_all_leaves);
    (p.eta, p.epsilon)
}

#[pyfunction]
fn bundled_scenarios() -> Vec<&'static str> {
    harness::bundled_names().collect()
}

/// Runs a whole experiment; returns one dict per (policy, T).
#[pyfunction]
#[pyo3(signature = (config, seeds = None, horizons = None))]
fn run_experiment<'py>(
    py: Python<'py>,
    config: &str,
    seeds: Option<usize>,
    horizons: Option<Vec<u64>>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let mut cfg = load_config(config)?;
    if let Some(s) = seeds {
        cfg.seeds.count = s;
    }
    if let Some(h) = horizons {
        cfg.horizon.anchor = cfg.horizon.anchor.filter(|a| h.contains(a));
        cfg.horizon.grid = h;
    }
    let out = py.detach(|| harness::run_experiment(&cfg)).map_err(to_py)?;
    out.aggregates
        .iter()
        .map(|a| {
            let d = PyDict::new(py);
            d.set_item("scenario", &a.scenario)?;
            d.set_item("policy", &a.policy)?;
            d.set_item("T", a.horizon)?;
            d.set_item("seed_count", a.seed_count)?;
            d.set_item("mean_time_avg_regret", a.mean_time_avg_regret)?;
            d.set_item("stddev", a.stddev)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
#[pyo3(name = "multistage")]
fn multistage_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTree>()?;
    m.add_class::<PySimulation>()?;
    m.add_function(wrap_pyfunction!(eps_exp3_params, m)?)?;
    m.add_function(wrap_pyfunction!(bundled_scenarios, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
