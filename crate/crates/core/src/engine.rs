//! Round-by-round simulation of a multi-stage system.

use std::fmt;
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::CostEnvironment;
use crate::error::{Error, Result};
use crate::policy::{Mode, NodePolicy, Selection};
use crate::seeding::{node_rng, RoundStreams};
use crate::topology::{NodeId, TreeTopology};

/// What a node gets to observe after a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeedbackModel {
    /// Every node sees the would-be cost of every child every round.
    CompleteOneHop,
    /// Only nodes on the job's path see the single realized cost.
    EndToEndBandit,
}

impl fmt::Display for FeedbackModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeedbackModel::CompleteOneHop => "complete-one-hop",
            FeedbackModel::EndToEndBandit => "end-to-end-bandit",
        })
    }
}

/// What happened in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub round: u64,
    /// Root to leaf.
    pub path: Vec<NodeId>,
    pub realized_cost: f64,
    /// Receive probability of every path node, leaf included; starts at 1.
    pub receive_probs: Vec<f64>,
    /// Selection made by every non-leaf path node.
    pub selections: Vec<Selection>,
}

impl RoundOutcome {
    pub fn leaf(&self) -> NodeId {
        *self.path.last().expect("path is never empty")
    }

    /// ε-EXP3 mode of every non-leaf path node (`None` for other policies).
    pub fn modes(&self) -> Vec<Option<Mode>> {
        self.selections.iter().map(|s| s.draw.map(|d| d.mode)).collect()
    }
}

/// Cumulative costs of the policy and of every leaf over the same draws.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretLedger {
    cumulative_cost: f64,
    leaf_costs: Vec<f64>,
    rounds: u64,
}

impl RegretLedger {
    pub fn new(leaf_count: usize) -> Self {
        Self {
            cumulative_cost: 0.0,
            leaf_costs: vec![0.0; leaf_count],
            rounds: 0,
        }
    }

    pub fn record(&mut self, realized: f64, leaf_costs: &[f64]) {
        self.cumulative_cost += realized;
        for (acc, c) in self.leaf_costs.iter_mut().zip(leaf_costs) {
            *acc += c;
        }
        self.rounds += 1;
    }

    pub fn rounds(&self) -> u64 {
        self.rounds
    }

    pub fn cumulative_cost(&self) -> f64 {
        self.cumulative_cost
    }

    pub fn cumulative_leaf_costs(&self) -> &[f64] {
        &self.leaf_costs
    }

    /// Cost of the best fixed leaf in hindsight, with its leaf index.
    pub fn best_leaf(&self) -> (usize, f64) {
        self.leaf_costs
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |best, (j, c)| if c < best.1 { (j, c) } else { best })
    }

    pub fn optimal_stationary_cost(&self) -> f64 {
        if self.rounds == 0 {
            0.0
        } else {
            self.best_leaf().1
        }
    }

    pub fn regret(&self) -> f64 {
        self.cumulative_cost - self.optimal_stationary_cost()
    }

    pub fn time_average_regret(&self) -> f64 {
        if self.rounds == 0 {
            0.0
        } else {
            self.regret() / self.rounds as f64
        }
    }
}

/// One trace row: mean of `x[node, child]` over the window ending at
/// `round_window_end`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub round_window_end: u64,
    pub node: NodeId,
    pub child: NodeId,
    pub mean_selection_probability: f64,
}

#[derive(Debug, Clone)]
struct TraceRecorder {
    watch: Vec<(NodeId, usize)>,
    window: u64,
    sums: Vec<f64>,
    filled: u64,
    rows: Vec<TraceRow>,
}

/// One replication: a tree, a policy per non-leaf node, an environment, and
/// the random streams that drive them.
pub struct Simulation {
    tree: Arc<TreeTopology>,
    policies: Vec<Option<NodePolicy>>,
    rngs: Vec<ChaCha8Rng>,
    env: Box<dyn CostEnvironment>,
    streams: RoundStreams,
    model: FeedbackModel,
    ledger: RegretLedger,
    round: u64,
    costs: Vec<f64>,
    needs_expected: bool,
    trace: Option<TraceRecorder>,
    // complete one-hop scratch
    chosen: Vec<usize>,
    chosen_prob: Vec<f64>,
    would_be: Vec<f64>,
}

impl fmt::Debug for Simulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Simulation")
            .field("model", &self.model)
            .field("round", &self.round)
            .field("ledger", &self.ledger)
            .finish_non_exhaustive()
    }
}

impl Simulation {
    pub fn new(
        tree: Arc<TreeTopology>,
        policies: Vec<Option<NodePolicy>>,
        env: Box<dyn CostEnvironment>,
        model: FeedbackModel,
        seed: u64,
    ) -> Result<Self> {
        if policies.len() != tree.node_count() {
            return Err(Error::param(
                "policies",
                format!("{} entries for {} nodes", policies.len(), tree.node_count()),
            ));
        }
        for node in tree.internal_nodes() {
            let p = policies[node.0].as_ref().ok_or(Error::MissingPolicy(node))?;
            let arity = p.distribution(Some(&vec![0.0; tree.children(node).len()]))?.len();
            if arity != tree.children(node).len() {
                return Err(Error::param(
                    "policies",
                    format!("policy at node {node} has {arity} arms, node has {} children", tree.children(node).len()),
                ));
            }
            if !p.supports(model) {
                return Err(Error::IncompatibleFeedback {
                    policy: p.name().into(),
                    model: model.to_string(),
                });
            }
        }
        if env.leaf_count() != tree.leaf_count() {
            return Err(Error::param(
                "environment",
                format!("{} leaf costs for {} leaves", env.leaf_count(), tree.leaf_count()),
            ));
        }
        let n = tree.node_count();
        let needs_expected = policies.iter().flatten().any(NodePolicy::needs_expected_costs);
        Ok(Self {
            rngs: (0..n).map(|i| node_rng(seed, NodeId(i))).collect(),
            streams: RoundStreams::new(seed),
            ledger: RegretLedger::new(tree.leaf_count()),
            costs: vec![0.0; tree.leaf_count()],
            chosen: vec![0; n],
            chosen_prob: vec![1.0; n],
            would_be: vec![0.0; n],
            tree,
            policies,
            env,
            model,
            round: 0,
            needs_expected,
            trace: None,
        })
    }

    pub fn tree(&self) -> &TreeTopology {
        &self.tree
    }

    pub fn model(&self) -> FeedbackModel {
        self.model
    }

    pub fn ledger(&self) -> &RegretLedger {
        &self.ledger
    }

    /// Number of rounds played so far.
    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn policy(&self, node: NodeId) -> Option<&NodePolicy> {
        self.policies.get(node.0).and_then(Option::as_ref)
    }

    /// Leaf costs drawn in the most recent round.
    pub fn last_costs(&self) -> &[f64] {
        &self.costs
    }

    /// Records the windowed mean of `x[node, child]` for each watched pair
    /// (`child` is a child position).
    pub fn enable_trace(&mut self, watch: Vec<(NodeId, usize)>, window: u64) -> Result<()> {
        if window == 0 {
            return Err(Error::param("trace window", "must be positive"));
        }
        for &(node, pos) in &watch {
            if !self.tree.contains(node) || self.tree.is_leaf(node) || pos >= self.tree.children(node).len() {
                return Err(Error::param("trace watch", format!("({node}, child position {pos}) is not an edge")));
            }
        }
        self.trace = Some(TraceRecorder {
            sums: vec![0.0; watch.len()],
            watch,
            window,
            filled: 0,
            rows: Vec::new(),
        });
        Ok(())
    }

    /// Trace rows so far, flushing a trailing partial window.
    pub fn take_trace(&mut self) -> Vec<TraceRow> {
        let Some(tr) = self.trace.as_mut() else {
            return Vec::new();
        };
        if tr.filled > 0 {
            flush_window(tr, &self.tree, self.round);
        }
        std::mem::take(&mut tr.rows)
    }

    /// Expected cost of the job if `node` receives it this round under the
    /// current policies: the leaf mean at a leaf, and the
    /// forwarding-weighted average of the children otherwise.
    pub fn conditional_expected_cost(&self, node: NodeId) -> Result<f64> {
        if !self.tree.contains(node) {
            return Err(Error::UnknownNode(node));
        }
        let t = self.round + 1;
        let means = self.env.expected_costs(t).ok_or(Error::NoExpectedCosts)?;
        self.expected_cost_rec(node, &means)
    }

    fn expected_cost_rec(&self, node: NodeId, means: &[f64]) -> Result<f64> {
        if let Some(k) = self.tree.leaf_index(node) {
            return Ok(means[k]);
        }
        let child_w = self
            .tree
            .children(node)
            .iter()
            .map(|&c| self.expected_cost_rec(c, means))
            .collect::<Result<Vec<_>>>()?;
        let x = self.policies[node.0]
            .as_ref()
            .ok_or(Error::MissingPolicy(node))?
            .distribution(Some(&child_w))?;
        Ok(x.iter().zip(&child_w).map(|(a, b)| a * b).sum())
    }

    /// Per-node expected costs (`w`) for round `t`, bottom-up.
    fn all_expected_costs(&self, t: u64) -> Result<Vec<f64>> {
        let means = self.env.expected_costs(t).ok_or(Error::NoExpectedCosts)?;
        let mut w = vec![0.0; self.tree.node_count()];
        for (k, leaf) in self.tree.leaves().iter().enumerate() {
            w[leaf.0] = means[k];
        }
        for node in self.tree.bottom_up() {
            let kids = self.tree.children(node);
            let child_w: Vec<f64> = kids.iter().map(|c| w[c.0]).collect();
            let x = self.policies[node.0].as_ref().expect("validated").distribution(Some(&child_w))?;
            w[node.0] = x.iter().zip(&child_w).map(|(a, b)| a * b).sum();
        }
        Ok(w)
    }

    /// Current forwarding distribution of `node`.
    pub fn selection_distribution(&self, node: NodeId) -> Result<Vec<f64>> {
        let policy = self.policy(node).ok_or(Error::MissingPolicy(node))?;
        if policy.needs_expected_costs() {
            let w = self.all_expected_costs(self.round + 1)?;
            let child_w: Vec<f64> = self.tree.children(node).iter().map(|c| w[c.0]).collect();
            policy.distribution(Some(&child_w))
        } else {
            policy.distribution(None)
        }
    }

    /// Plays one round.
    pub fn run_round(&mut self) -> Result<RoundOutcome> {
        let t = self.round + 1;
        for p in self.policies.iter_mut().flatten() {
            p.begin_round(t)?;
        }
        self.env.draw(t, self.streams.for_round(t), &mut self.costs);
        for (j, &c) in self.costs.iter().enumerate() {
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::CostOutOfRange {
                    value: c,
                    context: format!("leaf {} at round {t}", self.tree.leaves()[j]),
                });
            }
        }
        let expected = if self.needs_expected {
            Some(self.all_expected_costs(t)?)
        } else {
            None
        };
        if self.trace.is_some() {
            self.record_trace(expected.as_deref())?;
        }

        let outcome = match self.model {
            FeedbackModel::EndToEndBandit => self.bandit_round(t, expected.as_deref())?,
            FeedbackModel::CompleteOneHop => self.one_hop_round(t, expected.as_deref())?,
        };
        self.ledger.record(outcome.realized_cost, &self.costs);
        self.round = t;
        Ok(outcome)
    }

    /// Plays `rounds` more rounds.
    pub fn run(&mut self, rounds: u64) -> Result<&RegretLedger> {
        for _ in 0..rounds {
            self.run_round()?;
        }
        Ok(&self.ledger)
    }

    fn child_expected(&self, node: NodeId, w: Option<&[f64]>) -> Option<Vec<f64>> {
        w.map(|w| self.tree.children(node).iter().map(|c| w[c.0]).collect())
    }

    fn bandit_round(&mut self, t: u64, w: Option<&[f64]>) -> Result<RoundOutcome> {
        let tree = Arc::clone(&self.tree);
        let mut node = NodeId::ROOT;
        let mut v = 1.0;
        let mut path = Vec::with_capacity(tree.depth() + 1);
        let mut receive_probs = Vec::with_capacity(tree.depth() + 1);
        let mut selections = Vec::with_capacity(tree.depth());
        while !tree.is_leaf(node) {
            let child_w = self.child_expected(node, w);
            let policy = self.policies[node.0].as_mut().ok_or(Error::MissingPolicy(node))?;
            let sel = policy.select(&mut self.rngs[node.0], child_w.as_deref())?;
            path.push(node);
            receive_probs.push(v);
            selections.push(sel);
            v *= sel.prob;
            node = tree.children(node)[sel.child];
        }
        path.push(node);
        receive_probs.push(v);
        let leaf = tree.leaf_index(node).expect("loop ends at a leaf");
        let cost = self.costs[leaf];

        // The cost travels back up; each path node learns from it with its
        // own receive probability.
        for k in (0..selections.len()).rev() {
            let n = path[k];
            self.policies[n.0]
                .as_mut()
                .expect("path node has a policy")
                .observe_path(&selections[k], cost, receive_probs[k])
                .map_err(|e| match e {
                    Error::Numerical(msg) => Error::Numerical(format!("round {t}, node {n}: {msg}")),
                    other => other,
                })?;
        }
        Ok(RoundOutcome {
            round: t,
            path,
            realized_cost: cost,
            receive_probs,
            selections,
        })
    }

    fn one_hop_round(&mut self, t: u64, w: Option<&[f64]>) -> Result<RoundOutcome> {
        let tree = Arc::clone(&self.tree);
        let mut selections: Vec<Option<Selection>> = vec![None; tree.node_count()];
        for node in tree.internal_nodes() {
            let child_w = self.child_expected(node, w);
            let policy = self.policies[node.0].as_mut().ok_or(Error::MissingPolicy(node))?;
            let sel = policy.select(&mut self.rngs[node.0], child_w.as_deref())?;
            self.chosen[node.0] = sel.child;
            self.chosen_prob[node.0] = sel.prob;
            selections[node.0] = Some(sel);
        }
        for (k, leaf) in tree.leaves().iter().enumerate() {
            self.would_be[leaf.0] = self.costs[k];
        }
        for node in tree.bottom_up() {
            let next = tree.children(node)[self.chosen[node.0]];
            self.would_be[node.0] = self.would_be[next.0];
        }
        let mut child_costs = Vec::new();
        for node in tree.internal_nodes() {
            child_costs.clear();
            child_costs.extend(tree.children(node).iter().map(|c| self.would_be[c.0]));
            self.policies[node.0]
                .as_mut()
                .expect("validated")
                .observe_children(&child_costs)?;
        }

        let mut node = NodeId::ROOT;
        let mut v = 1.0;
        let mut path = vec![node];
        let mut receive_probs = vec![v];
        let mut path_sel = Vec::new();
        while !tree.is_leaf(node) {
            path_sel.push(selections[node.0].expect("every non-leaf selected"));
            v *= self.chosen_prob[node.0];
            node = tree.children(node)[self.chosen[node.0]];
            path.push(node);
            receive_probs.push(v);
        }
        Ok(RoundOutcome {
            round: t,
            path,
            realized_cost: self.would_be[NodeId::ROOT.0],
            receive_probs,
            selections: path_sel,
        })
    }

    fn record_trace(&mut self, w: Option<&[f64]>) -> Result<()> {
        let tr = self.trace.as_ref().expect("checked by caller");
        let mut probs = Vec::with_capacity(tr.watch.len());
        for &(node, pos) in &tr.watch {
            let policy = self.policies[node.0].as_ref().expect("validated");
            let child_w = self.child_expected(node, w);
            probs.push(policy.distribution(child_w.as_deref())?[pos]);
        }
        let t = self.round + 1;
        let tr = self.trace.as_mut().expect("checked by caller");
        for (s, p) in tr.sums.iter_mut().zip(probs) {
            *s += p;
        }
        tr.filled += 1;
        if tr.filled == tr.window {
            flush_window(tr, &self.tree, t);
        }
        Ok(())
    }
}

fn flush_window(tr: &mut TraceRecorder, tree: &TreeTopology, end: u64) {
    for (k, &(node, pos)) in tr.watch.iter().enumerate() {
        tr.rows.push(TraceRow {
            round_window_end: end,
            node,
            child: tree.children(node)[pos],
            mean_selection_probability: tr.sums[k] / tr.filled as f64,
        });
    }
    tr.sums.iter_mut().for_each(|s| *s = 0.0);
    tr.filled = 0;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{BernoulliTreeEnv, FixedEnv};
    use crate::policy::{PolicyKind, PolicySpec};

    fn sim(tree: TreeTopology, kind: PolicyKind, env: Box<dyn CostEnvironment>, horizon: u64, seed: u64) -> Simulation {
        let tree = Arc::new(tree);
        let policies = PolicySpec::new(kind).build(&tree, horizon).unwrap();
        Simulation::new(tree, policies, env, kind.natural_feedback(), seed).unwrap()
    }

    #[test]
    fn stationary_optimum_has_zero_regret() {
        let tree = TreeTopology::uniform(2, 1).unwrap();
        let env = Box::new(FixedEnv::new(vec![0.0, 1.0]).unwrap());
        let mut s = sim(tree, PolicyKind::Stationary, env, 10, 0);
        for _ in 0..10 {
            let out = s.run_round().unwrap();
            assert_eq!(out.realized_cost, 0.0);
            assert_eq!(s.ledger().regret(), 0.0);
        }
    }

    #[test]
    fn empty_horizon() {
        let tree = TreeTopology::uniform(2, 2).unwrap();
        let env = Box::new(BernoulliTreeEnv::example_tree(0));
        let mut s = sim(tree, PolicyKind::EpsExp3, env, 0, 0);
        s.run(0).unwrap();
        assert_eq!(s.ledger().regret(), 0.0);
        assert_eq!(s.ledger().time_average_regret(), 0.0);
    }

    #[test]
    fn receive_probs_at_uniform_start() {
        let tree = TreeTopology::uniform(2, 2).unwrap();
        let env = Box::new(BernoulliTreeEnv::example_tree(1_000_000));
        let mut s = sim(tree, PolicyKind::EpsExp3, env, 1_000_000, 3);
        let out = s.run_round().unwrap();
        assert_eq!(out.receive_probs, vec![1.0, 0.5, 0.25]);
        assert_eq!(out.path.len(), 3);
    }

    #[test]
    fn bandit_updates_only_the_path() {
        let tree = TreeTopology::uniform(3, 3).unwrap();
        let env = Box::new(BernoulliTreeEnv::staircase(27, 0.2, Some(100), 0).unwrap());
        let mut s = sim(tree, PolicyKind::EpsExp3, env, 1000, 5);
        for _ in 0..200 {
            let before: Vec<Vec<f64>> = (0..s.tree().node_count())
                .map(|i| s.policy(NodeId(i)).and_then(|p| p.theta()).map(<[f64]>::to_vec).unwrap_or_default())
                .collect();
            let out = s.run_round().unwrap();
            for (i, before) in before.iter().enumerate() {
                let after = s.policy(NodeId(i)).and_then(|p| p.theta()).map(<[f64]>::to_vec).unwrap_or_default();
                let changed: Vec<usize> = (0..after.len()).filter(|&k| after[k] != before[k]).collect();
                match out.path[..out.path.len() - 1].iter().position(|&n| n == NodeId(i)) {
                    Some(k) if out.realized_cost > 0.0 => assert_eq!(changed, vec![out.selections[k].child]),
                    _ => assert!(changed.is_empty(), "off-path node {i} changed"),
                }
            }
        }
    }

    #[test]
    fn conditional_expected_cost_recursion() {
        let tree = TreeTopology::uniform(2, 2).unwrap();
        let env = Box::new(BernoulliTreeEnv::example_tree(1000));
        let s = sim(tree, PolicyKind::Uniform, env, 1000, 0);
        assert_eq!(s.conditional_expected_cost(NodeId(3)).unwrap(), 1.0);
        assert!((s.conditional_expected_cost(NodeId(1)).unwrap() - 0.8).abs() < 1e-15);
        // brute force: every leaf equally likely under uniform forwarding
        let brute = [1.0, 0.6, 0.4, 0.2].iter().sum::<f64>() / 4.0;
        assert!((s.conditional_expected_cost(NodeId::ROOT).unwrap() - brute).abs() < 1e-15);
    }

    #[test]
    fn one_hop_leaf_children_see_env_costs() {
        let tree = TreeTopology::uniform(3, 1).unwrap();
        let env = Box::new(BernoulliTreeEnv::new(vec![0.3, 0.5, 0.9], None, 0).unwrap());
        let mut s = sim(tree, PolicyKind::NormalizedEg, env, 100, 1);
        let mut acc = vec![0.0; 3];
        for _ in 0..50 {
            s.run_round().unwrap();
            for (a, c) in acc.iter_mut().zip(s.last_costs()) {
                *a -= c;
            }
            assert_eq!(s.policy(NodeId::ROOT).unwrap().theta().unwrap(), acc.as_slice());
        }
    }

    #[test]
    fn rejects_incompatible_setup() {
        let tree = Arc::new(TreeTopology::uniform(2, 2).unwrap());
        let env = || Box::new(BernoulliTreeEnv::example_tree(100)) as Box<dyn CostEnvironment>;
        let eg = PolicySpec::new(PolicyKind::NormalizedEg).build(&tree, 100).unwrap();
        assert!(matches!(
            Simulation::new(tree.clone(), eg, env(), FeedbackModel::EndToEndBandit, 0),
            Err(Error::IncompatibleFeedback { .. })
        ));
        let mut ps = PolicySpec::new(PolicyKind::EpsExp3).build(&tree, 100).unwrap();
        ps[2] = None;
        assert!(matches!(
            Simulation::new(tree.clone(), ps, env(), FeedbackModel::EndToEndBandit, 0),
            Err(Error::MissingPolicy(NodeId(2)))
        ));
        let ps = PolicySpec::new(PolicyKind::EpsExp3).build(&tree, 100).unwrap();
        let small = Box::new(FixedEnv::new(vec![0.0; 3]).unwrap());
        assert!(Simulation::new(tree, ps, small, FeedbackModel::EndToEndBandit, 0).is_err());
    }

    #[test]
    fn trace_windows() {
        let tree = TreeTopology::uniform(2, 2).unwrap();
        let env = Box::new(BernoulliTreeEnv::example_tree(250));
        let mut s = sim(tree, PolicyKind::Uniform, env, 250, 0);
        s.enable_trace(vec![(NodeId::ROOT, 0), (NodeId(1), 0)], 100).unwrap();
        s.run(250).unwrap();
        let rows = s.take_trace();
        let ends: Vec<u64> = rows.iter().map(|r| r.round_window_end).collect();
        assert_eq!(ends, vec![100, 100, 200, 200, 250, 250]);
        assert!(rows.iter().all(|r| r.mean_selection_probability == 0.5));
        assert_eq!(rows[1].child, NodeId(3));
        assert!(s.enable_trace(vec![(NodeId(3), 0)], 10).is_err());
    }
}
