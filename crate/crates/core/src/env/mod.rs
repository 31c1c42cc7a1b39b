//! Leaf cost generators.
//!
//! An environment produces the full leaf cost vector for a round. The engine
//! draws it once per round, hands the reached leaf's entry to the policies
//! and the whole vector to the regret ledger.

mod bernoulli;
mod chain;
mod deadline;
mod replay;

pub use bernoulli::BernoulliTreeEnv;
pub use chain::LowerBoundChainEnv;
pub use deadline::{DeadlineLatencyEnv, LatencyDefaults, LinkRate, ProcessingProfile};
pub use replay::ReplayEnv;

use rand_chacha::ChaCha8Rng;

use crate::error::{check_unit_cost, Result};

/// Generator handed to [`CostEnvironment::draw`].
pub type EnvRng = ChaCha8Rng;

/// Oblivious adversary: round costs never depend on the learner's choices.
pub trait CostEnvironment: Send {
    fn leaf_count(&self) -> usize;

    /// Writes `c[j, t]` for every leaf index `j` into `out`.
    fn draw(&mut self, t: u64, rng: &mut EnvRng, out: &mut [f64]);

    /// `E[c[j, t]]` for every leaf, when the environment can state it.
    fn expected_costs(&self, _t: u64) -> Option<Vec<f64>> {
        None
    }

    /// Allocating convenience over [`draw`](Self::draw).
    fn costs(&mut self, t: u64, rng: &mut EnvRng) -> Vec<f64> {
        let mut out = vec![0.0; self.leaf_count()];
        self.draw(t, rng, &mut out);
        out
    }
}

/// The same cost vector every round.
#[derive(Debug, Clone)]
pub struct FixedEnv {
    costs: Vec<f64>,
}

impl FixedEnv {
    pub fn new(costs: Vec<f64>) -> Result<Self> {
        for (j, &c) in costs.iter().enumerate() {
            check_unit_cost(c, || format!("leaf index {j}"))?;
        }
        Ok(Self { costs })
    }
}

impl CostEnvironment for FixedEnv {
    fn leaf_count(&self) -> usize {
        self.costs.len()
    }

    fn draw(&mut self, _t: u64, _rng: &mut EnvRng, out: &mut [f64]) {
        out.copy_from_slice(&self.costs);
    }

    fn expected_costs(&self, _t: u64) -> Option<Vec<f64>> {
        Some(self.costs.clone())
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_env_rejects_out_of_range() {
        assert!(FixedEnv::new(vec![0.0, 1.2]).is_err());
        assert!(FixedEnv::new(vec![0.0, -0.1]).is_err());
        let mut env = FixedEnv::new(vec![0.0, 1.0]).unwrap();
        let mut rng = crate::seeding::RoundStreams::new(0);
        assert_eq!(env.costs(3, rng.for_round(3)), vec![0.0, 1.0]);
    }
}
