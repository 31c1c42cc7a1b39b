use rand::Rng;

use super::{CostEnvironment, EnvRng};
use crate::error::{Error, Result};

/// Bernoulli leaf costs on the two-child chain of depth `L`
/// ([`TreeTopology::chain`](crate::topology::TreeTopology::chain)).
///
/// With leaf labels `j = L+1 ..= 2L+1` (leaf index `j - L - 1`):
/// `p_j = (1 - (2^L - 2^(j-L-1)) δ) / 2` for `j < 2L`, and the two deepest
/// leaves get `(1 ∓ 2^L δ) / 2`.
#[derive(Debug, Clone)]
pub struct LowerBoundChainEnv {
    depth: usize,
    delta: f64,
    best_last_leaf: bool,
    p: Vec<f64>,
}

impl LowerBoundChainEnv {
    pub fn new(depth: usize, delta: f64, best_last_leaf: bool) -> Result<Self> {
        if depth < 2 {
            return Err(Error::param("depth", format!("chain needs depth >= 2, got {depth}")));
        }
        if depth > 60 {
            return Err(Error::param("depth", "chain depth above 60 is not representable"));
        }
        let scale = (1u64 << depth) as f64;
        if !(delta > 0.0 && delta < 1.0 / scale) {
            return Err(Error::param(
                "delta",
                format!("must lie in (0, 1/2^{depth}), got {delta}"),
            ));
        }
        let mut p: Vec<f64> = (0..depth - 1)
            .map(|k| (1.0 - (scale - (1u64 << k) as f64) * delta) / 2.0)
            .collect();
        let low = (1.0 - scale * delta) / 2.0;
        let high = (1.0 + scale * delta) / 2.0;
        if best_last_leaf {
            p.extend([high, low]);
        } else {
            p.extend([low, high]);
        }
        Ok(Self {
            depth,
            delta,
            best_last_leaf,
            p,
        })
    }

    pub fn means(&self) -> &[f64] {
        &self.p
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn best_last_leaf(&self) -> bool {
        self.best_last_leaf
    }

    /// `(1 - 2^L δ) / 2`, the smallest per-round expected leaf cost.
    pub fn min_expected_cost(&self) -> f64 {
        (1.0 - (1u64 << self.depth) as f64 * self.delta) / 2.0
    }
}

impl CostEnvironment for LowerBoundChainEnv {
    fn leaf_count(&self) -> usize {
        self.p.len()
    }

    fn draw(&mut self, _t: u64, rng: &mut EnvRng, out: &mut [f64]) {
        for (o, &p) in out.iter_mut().zip(&self.p) {
            *o = if rng.random_bool(p) { 1.0 } else { 0.0 };
        }
    }

    fn expected_costs(&self, _t: u64) -> Option<Vec<f64>> {
        Some(self.p.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::testutil::{assert_means_within, empirical_means};

    #[test]
    fn hand_evaluated_ladder() {
        // j = 3: (1 - (4 - 2^0) * 0.1) / 2 = 0.35.
        let env = LowerBoundChainEnv::new(2, 0.1, true).unwrap();
        let p = env.means();
        assert_eq!(p.len(), 3);
        assert!((p[0] - 0.35).abs() < 1e-12);
        assert!((p[1] - 0.7).abs() < 1e-12);
        assert!((p[2] - 0.3).abs() < 1e-12);
        let env = LowerBoundChainEnv::new(2, 0.1, false).unwrap();
        assert!((env.means()[1] - 0.3).abs() < 1e-12);
        assert!((env.means()[2] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn delta_range() {
        assert!(LowerBoundChainEnv::new(2, 0.3, true).is_err());
        assert!(LowerBoundChainEnv::new(2, 0.25, true).is_err());
        assert!(LowerBoundChainEnv::new(2, 0.0, true).is_err());
        assert!(LowerBoundChainEnv::new(1, 0.1, true).is_err());
    }

    #[test]
    fn ladder_monotone_and_min() {
        for l in 2..=4usize {
            let delta = 1.0 / (1u64 << (l + 1)) as f64;
            let env = LowerBoundChainEnv::new(l, delta, true).unwrap();
            let p = env.means();
            let floor = env.min_expected_cost();
            assert!(floor < p[0]);
            for w in p[..l - 1].windows(2) {
                assert!(w[0] < w[1]);
            }
            assert!(p.iter().all(|&v| v > 0.0 && v < 1.0));
            let min = p.iter().cloned().fold(f64::MAX, f64::min);
            assert_eq!(min, floor);
        }
    }

    #[test]
    fn empirical_means_match() {
        let mut env = LowerBoundChainEnv::new(3, 1.0 / 16.0, true).unwrap();
        let emp = empirical_means(&mut env, 1, 100_000);
        assert_means_within(&emp, env.means(), 100_000, 3.0);
    }
}
