//! Per-node forwarding policies.
//!
//! Every non-leaf node runs its own [`NodePolicy`]. Nodes never share state:
//! the only things crossing a hop are the job with its receive probability on
//! the way down and the realized cost on the way back.

mod anytime;
mod eexp3;
mod eg;
mod exp3;
mod oracle;
pub mod softmax;

pub use anytime::{anytime_params, segment_of, AnytimeEpsilonExp3, Segment};
pub use eexp3::{EpsilonExp3, Mode, ModeDraw, PROBABILITY_FLOOR};
pub use eg::NormalizedEg;
pub use exp3::Exp3Baseline;
pub use oracle::{ForwardProb, OraclePolicy};

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::engine::FeedbackModel;
use crate::error::{Error, Result};
use crate::topology::{NodeId, TreeTopology};

/// Learning rate and uniform-mode probability of an ε-EXP3 node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyParams {
    pub eta: f64,
    pub epsilon: f64,
}

impl PolicyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::param("eta", format!("must be positive, got {}", self.eta)));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::param(
                "epsilon",
                format!("must be in [0, 1], got {}", self.epsilon),
            ));
        }
        Ok(())
    }
}

/// Horizon-tuned ε-EXP3 parameters: `η = T^{-L/(L+1)}`, and
/// `ε = min(1, D T^{-1/(L+1)})` unless every child is a leaf, in which case
/// there is nobody to educate and `ε = 0`.
pub fn default_params(
    horizon: u64,
    depth: usize,
    max_fanout: usize,
    children_all_leaves: bool,
) -> PolicyParams {
    let t = horizon.max(1) as f64;
    let l = depth.max(1) as f64;
    let eta = t.powf(-l / (l + 1.0));
    let epsilon = if children_all_leaves {
        0.0
    } else {
        (max_fanout as f64 * t.powf(-1.0 / (l + 1.0))).min(1.0)
    };
    PolicyParams { eta, epsilon }
}

/// Policy families selectable from configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    NormalizedEg,
    EpsExp3,
    AnytimeEpsExp3,
    Exp3,
    Uniform,
    Stationary,
    Oracle,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 7] = [
        PolicyKind::NormalizedEg,
        PolicyKind::EpsExp3,
        PolicyKind::AnytimeEpsExp3,
        PolicyKind::Exp3,
        PolicyKind::Uniform,
        PolicyKind::Stationary,
        PolicyKind::Oracle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::NormalizedEg => "normalized-eg",
            PolicyKind::EpsExp3 => "eps-exp3",
            PolicyKind::AnytimeEpsExp3 => "anytime-eps-exp3",
            PolicyKind::Exp3 => "exp3",
            PolicyKind::Uniform => "uniform",
            PolicyKind::Stationary => "stationary",
            PolicyKind::Oracle => "oracle",
        }
    }

    /// Feedback model the family is designed for.
    pub fn natural_feedback(self) -> FeedbackModel {
        match self {
            PolicyKind::NormalizedEg => FeedbackModel::CompleteOneHop,
            _ => FeedbackModel::EndToEndBandit,
        }
    }

    pub fn supports(self, model: FeedbackModel) -> bool {
        match self {
            PolicyKind::NormalizedEg => model == FeedbackModel::CompleteOneHop,
            PolicyKind::EpsExp3 | PolicyKind::AnytimeEpsExp3 | PolicyKind::Exp3 | PolicyKind::Oracle => {
                model == FeedbackModel::EndToEndBandit
            }
            PolicyKind::Uniform | PolicyKind::Stationary => true,
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = PolicyKind::ALL.iter().map(|k| k.as_str()).collect();
                Error::param("policy", format!("unknown policy `{s}` (expected one of {})", names.join(", ")))
            })
    }
}

/// Optional parameter overrides applied on top of each family's defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyOverrides {
    pub eta: Option<f64>,
    pub epsilon: Option<f64>,
    /// EXP3 baseline mixing rate.
    pub gamma: Option<f64>,
    /// Horizon used to tune the EXP3 baseline when `gamma` is not given.
    pub exp3_tuning_horizon: Option<u64>,
    pub oracle_q: Option<f64>,
    /// Use `q e^{-ζ}` instead of a constant forwarding probability.
    #[serde(default)]
    pub oracle_exp_decay: bool,
    /// Leaf id the stationary policy routes to (defaults to the first leaf).
    pub stationary_leaf: Option<usize>,
}

/// Policy family plus overrides; builds one [`NodePolicy`] per non-leaf node.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    pub overrides: PolicyOverrides,
}

impl PolicySpec {
    pub fn new(kind: PolicyKind) -> Self {
        Self {
            kind,
            overrides: PolicyOverrides::default(),
        }
    }

    pub fn with_overrides(kind: PolicyKind, overrides: PolicyOverrides) -> Self {
        Self { kind, overrides }
    }

    /// Indexed by node id; `None` at leaves.
    pub fn build(&self, tree: &TreeTopology, horizon: u64) -> Result<Vec<Option<NodePolicy>>> {
        let depth = tree.depth();
        let fanout = tree.max_fanout();
        let o = &self.overrides;
        let stationary_path = if self.kind == PolicyKind::Stationary {
            let leaf = NodeId(o.stationary_leaf.unwrap_or(tree.leaves()[0].0));
            if tree.leaf_index(leaf).is_none() {
                return Err(Error::param("stationary_leaf", format!("{leaf} is not a leaf")));
            }
            tree.path_to(leaf)?
        } else {
            Vec::new()
        };

        let mut out = Vec::with_capacity(tree.node_count());
        for i in 0..tree.node_count() {
            let node = NodeId(i);
            if tree.is_leaf(node) {
                out.push(None);
                continue;
            }
            let arity = tree.children(node).len();
            let all_leaves = tree.children_all_leaves(node);
            let eps_params = || {
                let d = default_params(horizon, depth, fanout, all_leaves);
                PolicyParams {
                    eta: o.eta.unwrap_or(d.eta),
                    epsilon: o.epsilon.unwrap_or(d.epsilon),
                }
            };
            let policy = match self.kind {
                PolicyKind::NormalizedEg => NodePolicy::NormalizedEg(NormalizedEg::new(
                    arity,
                    o.eta.unwrap_or_else(|| NormalizedEg::default_eta(horizon, arity)),
                )?),
                PolicyKind::EpsExp3 => NodePolicy::EpsilonExp3(EpsilonExp3::new(arity, eps_params())?),
                PolicyKind::AnytimeEpsExp3 => NodePolicy::Anytime(AnytimeEpsilonExp3::new(
                    arity, depth, fanout, all_leaves,
                )?),
                PolicyKind::Exp3 => {
                    let tune = o.exp3_tuning_horizon.unwrap_or(horizon);
                    let gamma = o.gamma.unwrap_or_else(|| Exp3Baseline::classic_gamma(arity, tune));
                    let eta = o.eta.unwrap_or(gamma / arity as f64);
                    NodePolicy::Exp3(Exp3Baseline::new(arity, gamma, eta)?)
                }
                PolicyKind::Uniform => NodePolicy::Uniform { arity },
                PolicyKind::Stationary => {
                    let child = stationary_path
                        .iter()
                        .position(|&n| n == node)
                        .and_then(|k| stationary_path.get(k + 1))
                        .and_then(|next| tree.children(node).iter().position(|c| c == next))
                        .unwrap_or(0);
                    NodePolicy::Stationary { arity, child }
                }
                PolicyKind::Oracle => {
                    if all_leaves {
                        // The last stage has nobody to educate and learns
                        // from bandit feedback.
                        NodePolicy::EpsilonExp3(EpsilonExp3::new(arity, eps_params())?)
                    } else {
                        if arity != 2 {
                            return Err(Error::param(
                                "policy",
                                format!("oracle policy needs exactly two children at node {node}"),
                            ));
                        }
                        let q = o.oracle_q.unwrap_or_else(|| OraclePolicy::default_q(horizon, depth));
                        let f = if o.oracle_exp_decay {
                            ForwardProb::ExpDecay(q)
                        } else {
                            ForwardProb::Constant(q)
                        };
                        NodePolicy::Oracle(OraclePolicy::new(f)?)
                    }
                }
            };
            out.push(Some(policy));
        }
        Ok(out)
    }
}

/// Outcome of one node's selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    pub child: usize,
    /// Marginal probability `x[i, child]`.
    pub prob: f64,
    /// ε-EXP3 draw details, for ε-EXP3 nodes.
    pub draw: Option<ModeDraw>,
}

/// A node's forwarding policy.
#[derive(Debug, Clone)]
pub enum NodePolicy {
    NormalizedEg(NormalizedEg),
    EpsilonExp3(EpsilonExp3),
    Anytime(AnytimeEpsilonExp3),
    Exp3(Exp3Baseline),
    Oracle(OraclePolicy),
    Stationary { arity: usize, child: usize },
    Uniform { arity: usize },
}

impl NodePolicy {
    pub fn name(&self) -> &'static str {
        match self {
            NodePolicy::NormalizedEg(_) => "normalized-eg",
            NodePolicy::EpsilonExp3(_) => "eps-exp3",
            NodePolicy::Anytime(_) => "anytime-eps-exp3",
            NodePolicy::Exp3(_) => "exp3",
            NodePolicy::Oracle(_) => "oracle",
            NodePolicy::Stationary { .. } => "stationary",
            NodePolicy::Uniform { .. } => "uniform",
        }
    }

    pub fn supports(&self, model: FeedbackModel) -> bool {
        match self {
            NodePolicy::NormalizedEg(_) => model == FeedbackModel::CompleteOneHop,
            NodePolicy::EpsilonExp3(_) | NodePolicy::Anytime(_) | NodePolicy::Exp3(_) | NodePolicy::Oracle(_) => {
                model == FeedbackModel::EndToEndBandit
            }
            NodePolicy::Stationary { .. } | NodePolicy::Uniform { .. } => true,
        }
    }

    /// True when selection needs the children's expected costs.
    pub fn needs_expected_costs(&self) -> bool {
        matches!(self, NodePolicy::Oracle(_))
    }

    /// Current learner state, for learners that keep one.
    pub fn theta(&self) -> Option<&[f64]> {
        match self {
            NodePolicy::NormalizedEg(p) => Some(p.theta()),
            NodePolicy::EpsilonExp3(p) => Some(p.theta()),
            NodePolicy::Anytime(p) => Some(p.inner().theta()),
            NodePolicy::Exp3(p) => Some(p.theta()),
            _ => None,
        }
    }

    /// Start-of-round hook (segment restarts of the anytime variant).
    pub fn begin_round(&mut self, t: u64) -> Result<()> {
        if let NodePolicy::Anytime(p) = self {
            p.begin_round(t)?;
        }
        Ok(())
    }

    /// Forwarding distribution `x[i, ·]` this round.
    pub fn distribution(&self, expected_children: Option<&[f64]>) -> Result<Vec<f64>> {
        Ok(match self {
            NodePolicy::NormalizedEg(p) => p.distribution(),
            NodePolicy::EpsilonExp3(p) => p.distribution(),
            NodePolicy::Anytime(p) => p.distribution(),
            NodePolicy::Exp3(p) => p.distribution(),
            NodePolicy::Oracle(p) => p.distribution(expected_children.ok_or(Error::NoExpectedCosts)?),
            NodePolicy::Stationary { arity, child } => {
                let mut x = vec![0.0; *arity];
                x[*child] = 1.0;
                x
            }
            NodePolicy::Uniform { arity } => vec![1.0 / *arity as f64; *arity],
        })
    }

    pub fn select<R: Rng + ?Sized>(&mut self, rng: &mut R, expected_children: Option<&[f64]>) -> Result<Selection> {
        let plain = |(child, prob): (usize, f64)| Selection { child, prob, draw: None };
        Ok(match self {
            NodePolicy::NormalizedEg(p) => plain(p.select(rng)),
            NodePolicy::EpsilonExp3(p) => {
                let d = p.select(rng);
                Selection {
                    child: d.child,
                    prob: d.marginal_prob,
                    draw: Some(d),
                }
            }
            NodePolicy::Anytime(p) => {
                let d = p.select(rng);
                Selection {
                    child: d.child,
                    prob: d.marginal_prob,
                    draw: Some(d),
                }
            }
            NodePolicy::Exp3(p) => plain(p.select(rng)),
            NodePolicy::Oracle(p) => plain(p.select(expected_children.ok_or(Error::NoExpectedCosts)?, rng)),
            NodePolicy::Stationary { child, .. } => plain((*child, 1.0)),
            NodePolicy::Uniform { arity } => {
                let k = *arity;
                plain((rng.random_range(0..k), 1.0 / k as f64))
            }
        })
    }

    /// Bandit feedback: the node received the job with probability
    /// `receive_prob`, forwarded it per `sel`, and learned the end-to-end
    /// cost.
    pub fn observe_path(&mut self, sel: &Selection, cost: f64, receive_prob: f64) -> Result<()> {
        match self {
            NodePolicy::EpsilonExp3(p) => p.update(sel.draw.as_ref().expect("ε-EXP3 selection carries its draw"), cost, receive_prob),
            NodePolicy::Anytime(p) => p.update(sel.draw.as_ref().expect("ε-EXP3 selection carries its draw"), cost, receive_prob),
            NodePolicy::Exp3(p) => p.update(sel.child, sel.prob, cost),
            NodePolicy::NormalizedEg(_) => Err(Error::IncompatibleFeedback {
                policy: self.name().into(),
                model: FeedbackModel::EndToEndBandit.to_string(),
            }),
            NodePolicy::Oracle(_) | NodePolicy::Stationary { .. } | NodePolicy::Uniform { .. } => Ok(()),
        }
    }

    /// Complete one-hop feedback: the would-be cost of every child.
    pub fn observe_children(&mut self, child_costs: &[f64]) -> Result<()> {
        match self {
            NodePolicy::NormalizedEg(p) => p.update(child_costs),
            NodePolicy::Stationary { .. } | NodePolicy::Uniform { .. } => Ok(()),
            _ => Err(Error::IncompatibleFeedback {
                policy: self.name().into(),
                model: FeedbackModel::CompleteOneHop.to_string(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_params_hand_values() {
        let p = default_params(1_000_000, 2, 2, false);
        assert!((p.eta - 1e-4).abs() < 1e-16);
        assert!((p.epsilon - 0.02).abs() < 1e-14);
        assert_eq!(default_params(1_000_000, 2, 2, true).epsilon, 0.0);
        let p = default_params(16, 1, 2, true);
        assert_eq!(p.eta, 0.25);
        assert_eq!(p.epsilon, 0.0);
        // ε is clamped for tiny horizons
        assert_eq!(default_params(2, 2, 4, false).epsilon, 1.0);
    }

    #[test]
    fn kind_names_round_trip() {
        for k in PolicyKind::ALL {
            assert_eq!(k.as_str().parse::<PolicyKind>().unwrap(), k);
        }
        assert!("broad-omd".parse::<PolicyKind>().is_err());
    }

    #[test]
    fn build_assigns_education_only_above_last_stage() {
        let tree = TreeTopology::uniform(2, 2).unwrap();
        let ps = PolicySpec::new(PolicyKind::EpsExp3).build(&tree, 1_000_000).unwrap();
        let eps = |i: usize| match ps[i].as_ref().unwrap() {
            NodePolicy::EpsilonExp3(p) => p.params().epsilon,
            _ => unreachable!(),
        };
        assert!((eps(0) - 0.02).abs() < 1e-14);
        assert_eq!(eps(1), 0.0);
        assert_eq!(eps(2), 0.0);
        assert!(ps[3..].iter().all(Option::is_none));
    }

    #[test]
    fn stationary_routes_to_leaf() {
        let tree = TreeTopology::uniform(2, 2).unwrap();
        let spec = PolicySpec::with_overrides(
            PolicyKind::Stationary,
            PolicyOverrides {
                stationary_leaf: Some(6),
                ..Default::default()
            },
        );
        let ps = spec.build(&tree, 10).unwrap();
        assert!(matches!(ps[0], Some(NodePolicy::Stationary { child: 1, .. })));
        assert!(matches!(ps[2], Some(NodePolicy::Stationary { child: 1, .. })));
        let bad = PolicySpec::with_overrides(
            PolicyKind::Stationary,
            PolicyOverrides {
                stationary_leaf: Some(1),
                ..Default::default()
            },
        );
        assert!(bad.build(&tree, 10).is_err());
    }

    #[test]
    fn oracle_build_on_chain() {
        let tree = TreeTopology::chain(3).unwrap();
        let ps = PolicySpec::new(PolicyKind::Oracle).build(&tree, 1000).unwrap();
        assert!(matches!(ps[0], Some(NodePolicy::Oracle(_))));
        assert!(matches!(ps[1], Some(NodePolicy::Oracle(_))));
        assert!(matches!(ps[2], Some(NodePolicy::EpsilonExp3(_))));
        if let Some(NodePolicy::Oracle(o)) = &ps[0] {
            assert!((o.forward().q() - 0.1).abs() < 1e-12);
        }
    }
}
