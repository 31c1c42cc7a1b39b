//! Property checks shared by the property suite and the acceptance run.

#![allow(dead_code)]

use std::sync::Arc;

use multistage::env::BernoulliTreeEnv;
use multistage::policy::softmax::softmax;
use multistage::policy::{EpsilonExp3, Exp3Baseline, NormalizedEg, PolicyKind, PolicyParams, PolicySpec};
use multistage::{NodeId, Simulation, TreeTopology};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<(), TestCaseError>;

/// ε-EXP3 node state: `(theta, eta, epsilon)`.
pub fn arb_node() -> impl Strategy<Value = (Vec<f64>, f64, f64)> {
    (2usize..=6).prop_flat_map(|k| (prop::collection::vec(-50.0f64..=0.0, k), 0.001f64..2.0, 0.0f64..=1.0))
}

/// A few rounds of `(cost, receive probability)`.
pub fn arb_steps() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.0f64..=1.0, 0.01f64..=1.0), 1..20)
}

/// `(fanout, depth, seed)` for a small uniform tree.
pub fn arb_tree() -> impl Strategy<Value = (usize, usize, u64)> {
    (2usize..=4, 1usize..=3, any::<u64>())
}

fn assert_simplex(x: &[f64], floor: f64, what: &str) -> Check {
    let sum: f64 = x.iter().sum();
    prop_assert!((sum - 1.0).abs() <= 1e-12, "{what}: sum {sum}");
    for &p in x {
        prop_assert!(p >= floor - 1e-15, "{what}: entry {p} below {floor}");
    }
    Ok(())
}

/// Every policy's forwarding distribution is a probability vector after
/// every update; ε-EXP3 never drops below `ε / |C|`.
pub fn simplex(theta: Vec<f64>, eta: f64, eps: f64, steps: Vec<(f64, f64)>, seed: u64) -> Check {
    let k = theta.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut node = EpsilonExp3::with_theta(theta, PolicyParams { eta, epsilon: eps }).unwrap();
    let mut eg = NormalizedEg::new(k, eta).unwrap();
    let mut ex = Exp3Baseline::new(k, eps, eta).unwrap();
    assert_simplex(&node.distribution(), eps / k as f64, "eps-exp3")?;
    for (cost, v) in steps {
        let d = node.select(&mut rng);
        node.update(&d, cost, v).unwrap();
        assert_simplex(&node.distribution(), eps / k as f64, "eps-exp3")?;

        let costs: Vec<f64> = (0..k).map(|j| (cost + j as f64 * 0.37) % 1.0).collect();
        eg.update(&costs).unwrap();
        assert_simplex(&eg.distribution(), 0.0, "normalized-eg")?;

        let (j, p) = ex.select(&mut rng);
        ex.update(j, p, cost).unwrap();
        assert_simplex(&ex.distribution(), eps / k as f64, "exp3")?;
    }
    Ok(())
}

/// `theta` never increases under any update.
pub fn theta_monotone(theta: Vec<f64>, eta: f64, eps: f64, steps: Vec<(f64, f64)>, seed: u64) -> Check {
    let k = theta.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut node = EpsilonExp3::with_theta(theta, PolicyParams { eta, epsilon: eps }).unwrap();
    let mut eg = NormalizedEg::new(k, eta).unwrap();
    for (cost, v) in steps {
        let before = node.theta().to_vec();
        let d = node.select(&mut rng);
        node.update(&d, cost, v).unwrap();
        for (a, b) in node.theta().iter().zip(&before) {
            prop_assert!(a <= b, "eps-exp3 theta rose from {b} to {a}");
        }
        let before = eg.theta().to_vec();
        let costs: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
        eg.update(&costs).unwrap();
        for (a, b) in eg.theta().iter().zip(&before) {
            prop_assert!(a <= b, "normalized-eg theta rose from {b} to {a}");
        }
    }
    Ok(())
}

/// Iterated normalized-EG updates equal `exp(-eta * cumulative cost)`
/// normalized, evaluated directly.
pub fn closed_form(eta: f64, costs: Vec<Vec<f64>>) -> Check {
    let k = costs[0].len();
    let mut eg = NormalizedEg::new(k, eta).unwrap();
    let mut cum = vec![0.0; k];
    for row in &costs {
        eg.update(row).unwrap();
        for (c, y) in cum.iter_mut().zip(row) {
            *c += y;
        }
        let w: Vec<f64> = cum.iter().map(|c| (-eta * c).exp()).collect();
        let z: f64 = w.iter().sum();
        for (got, wj) in eg.distribution().iter().zip(&w) {
            prop_assert!((got - wj / z).abs() <= 1e-10, "{got} vs {}", wj / z);
        }
    }
    Ok(())
}

pub fn arb_cost_rows() -> impl Strategy<Value = (f64, Vec<Vec<f64>>)> {
    (0.001f64..2.0, 2usize..=5).prop_flat_map(|(eta, k)| {
        (Just(eta), prop::collection::vec(prop::collection::vec(0.0f64..=1.0, k), 1..50))
    })
}

/// Softmax is unchanged by adding a constant to every entry.
pub fn shift_invariance(theta: Vec<f64>, eta: f64, c: f64) -> Check {
    let a = softmax(&theta, eta);
    let shifted: Vec<f64> = theta.iter().map(|t| t + c).collect();
    let b = softmax(&shifted, eta);
    for (p, q) in a.iter().zip(&b) {
        prop_assert!((p - q).abs() <= 1e-12, "{p} vs {q}");
    }
    Ok(())
}

fn simulation(fanout: usize, depth: usize, kind: PolicyKind, seed: u64, horizon: u64) -> Simulation {
    let tree = Arc::new(TreeTopology::uniform(fanout, depth).unwrap());
    let env = BernoulliTreeEnv::staircase(tree.leaf_count(), 0.2, Some(horizon / 2), 0).unwrap();
    let policies = PolicySpec::new(kind).build(&tree, horizon).unwrap();
    Simulation::new(tree, policies, Box::new(env), kind.natural_feedback(), seed).unwrap()
}

/// Along every path the receive probability of a node is the product of the
/// forwarding probabilities above it, and each of those equals the node's
/// distribution at the start of the round.
pub fn v_product(fanout: usize, depth: usize, seed: u64, kind: PolicyKind) -> Check {
    const ROUNDS: u64 = 40;
    let mut sim = simulation(fanout, depth, kind, seed, ROUNDS);
    for _ in 0..ROUNDS {
        let before: Vec<Option<Vec<f64>>> = (0..sim.tree().node_count())
            .map(|i| sim.selection_distribution(NodeId(i)).ok())
            .collect();
        let out = sim.run_round().unwrap();
        prop_assert_eq!(out.receive_probs[0], 1.0);
        let mut v = 1.0;
        for (d, sel) in out.selections.iter().enumerate() {
            let x = before[out.path[d].0].as_ref().unwrap()[sel.child];
            prop_assert!((sel.prob - x).abs() <= 1e-12, "x {} vs {x}", sel.prob);
            v *= x;
            prop_assert!((out.receive_probs[d + 1] - v).abs() <= 1e-12);
            prop_assert!(out.receive_probs[d + 1] <= out.receive_probs[d]);
        }
    }
    Ok(())
}

/// Under bandit feedback only the nodes on the job's path change state, and
/// with a positive cost each of them changes exactly the chosen child.
pub fn feedback_isolation(fanout: usize, depth: usize, seed: u64) -> Check {
    const ROUNDS: u64 = 40;
    let mut sim = simulation(fanout, depth, PolicyKind::EpsExp3, seed, ROUNDS);
    let snapshot = |sim: &Simulation| -> Vec<Vec<f64>> {
        (0..sim.tree().node_count())
            .map(|i| {
                sim.policy(NodeId(i))
                    .and_then(|p| p.theta())
                    .map(<[f64]>::to_vec)
                    .unwrap_or_default()
            })
            .collect()
    };
    for _ in 0..ROUNDS {
        let before = snapshot(&sim);
        let out = sim.run_round().unwrap();
        let after = snapshot(&sim);
        let on_path = &out.path[..out.path.len() - 1];
        for i in 0..after.len() {
            let changed: Vec<usize> = (0..after[i].len()).filter(|&j| after[i][j] != before[i][j]).collect();
            match on_path.iter().position(|n| n.0 == i) {
                Some(d) if out.realized_cost > 0.0 => {
                    prop_assert_eq!(changed, vec![out.selections[d].child], "path node {}", i)
                }
                _ => prop_assert!(changed.is_empty(), "node {} changed off the update rule", i),
            }
        }
    }
    Ok(())
}

/// Ledger total equals the sum of realized costs, and the same seed replays
/// bit for bit.
pub fn ledger_replay(fanout: usize, depth: usize, seed: u64) -> Check {
    let mut a = simulation(fanout, depth, PolicyKind::EpsExp3, seed, 60);
    let mut b = simulation(fanout, depth, PolicyKind::EpsExp3, seed, 60);
    let mut total = 0.0;
    for _ in 0..60 {
        let oa = a.run_round().unwrap();
        let ob = b.run_round().unwrap();
        prop_assert_eq!(&oa, &ob);
        total += oa.realized_cost;
    }
    prop_assert_eq!(a.ledger().cumulative_cost(), total);
    prop_assert_eq!(a.ledger(), b.ledger());
    Ok(())
}
