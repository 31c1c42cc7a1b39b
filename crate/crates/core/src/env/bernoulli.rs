use rand::Rng;

use super::{CostEnvironment, EnvRng};
use crate::error::{Error, Result};

/// Leaves emit Bernoulli(p_j) costs; one leaf's mean drops to 0 at a shift round.
///
/// The stock layout puts the `p = 1` leaf first, under the root's first
/// child, next to a mediocre sibling, so that after the shift the best leaf
/// in hindsight hides in a subtree that looked bad early on.
#[derive(Debug, Clone)]
pub struct BernoulliTreeEnv {
    p: Vec<f64>,
    shift_round: Option<u64>,
    shift_leaf: usize,
}

impl BernoulliTreeEnv {
    pub fn new(p: Vec<f64>, shift_round: Option<u64>, shift_leaf: usize) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::param("p", "needs at least one leaf"));
        }
        if let Some(bad) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::param("p", format!("entry {bad} outside [0, 1]")));
        }
        if shift_leaf >= p.len() {
            return Err(Error::param(
                "shift_leaf",
                format!("leaf index {shift_leaf} out of range for {} leaves", p.len()),
            ));
        }
        Ok(Self {
            p,
            shift_round,
            shift_leaf,
        })
    }

    /// The four-leaf example tree: means `(1, 0.6, 0.4, 0.2)`, first leaf
    /// shifting to 0 at `T / 100`.
    pub fn example_tree(horizon: u64) -> Self {
        Self::new(
            vec![1.0, 0.6, 0.4, 0.2],
            Some(shift_round_for(horizon, 0.01)),
            0,
        )
        .expect("static parameters are valid")
    }

    /// Generalized layout for `leaves` leaves: leaf `shift_leaf` starts at 1,
    /// the remaining leaves descend linearly from `(1 + p_min) / 2` to
    /// `p_min`, the last leaf being the pre-shift optimum.
    pub fn staircase(
        leaves: usize,
        p_min: f64,
        shift_round: Option<u64>,
        shift_leaf: usize,
    ) -> Result<Self> {
        if leaves < 2 {
            return Err(Error::param("leaves", "needs at least two leaves"));
        }
        if !(0.0..1.0).contains(&p_min) {
            return Err(Error::param("p_min", format!("{p_min} outside [0, 1)")));
        }
        if shift_leaf >= leaves {
            return Err(Error::param(
                "shift_leaf",
                format!("leaf index {shift_leaf} out of range for {leaves} leaves"),
            ));
        }
        let top = (1.0 + p_min) / 2.0;
        let rest = leaves - 1;
        let mut p = Vec::with_capacity(leaves);
        let mut k = 0usize;
        for j in 0..leaves {
            if j == shift_leaf {
                p.push(1.0);
            } else {
                let frac = if rest > 1 { k as f64 / (rest - 1) as f64 } else { 1.0 };
                p.push(top - frac * (top - p_min));
                k += 1;
            }
        }
        Self::new(p, shift_round, shift_leaf)
    }

    pub fn means(&self, t: u64) -> Vec<f64> {
        let mut p = self.p.clone();
        if self.shifted(t) {
            p[self.shift_leaf] = 0.0;
        }
        p
    }

    pub fn initial_means(&self) -> &[f64] {
        &self.p
    }

    pub fn shift_round(&self) -> Option<u64> {
        self.shift_round
    }

    pub fn shift_leaf(&self) -> usize {
        self.shift_leaf
    }

    #[inline]
    fn shifted(&self, t: u64) -> bool {
        self.shift_round.is_some_and(|s| t >= s)
    }
}

/// `max(1, round(horizon * fraction))`.
pub(crate) fn shift_round_for(horizon: u64, fraction: f64) -> u64 {
    ((horizon as f64 * fraction).round() as u64).max(1)
}

impl CostEnvironment for BernoulliTreeEnv {
    fn leaf_count(&self) -> usize {
        self.p.len()
    }

    fn draw(&mut self, t: u64, rng: &mut EnvRng, out: &mut [f64]) {
        let shifted = self.shifted(t);
        for (j, (o, &p)) in out.iter_mut().zip(&self.p).enumerate() {
            let p = if shifted && j == self.shift_leaf { 0.0 } else { p };
            *o = if rng.random_bool(p) { 1.0 } else { 0.0 };
        }
    }

    fn expected_costs(&self, t: u64) -> Option<Vec<f64>> {
        Some(self.means(t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::testutil::{assert_means_within, empirical_means};
    use crate::seeding::RoundStreams;

    #[test]
    fn example_tree_shift() {
        let mut env = BernoulliTreeEnv::example_tree(100_000);
        assert_eq!(env.shift_round(), Some(1000));
        assert_eq!(env.means(999), vec![1.0, 0.6, 0.4, 0.2]);
        assert_eq!(env.means(1000), vec![0.0, 0.6, 0.4, 0.2]);
        let mut s = RoundStreams::new(3);
        for t in 1..1000 {
            assert_eq!(env.costs(t, s.for_round(t))[0], 1.0);
        }
        for t in 1000..3000 {
            assert_eq!(env.costs(t, s.for_round(t))[0], 0.0);
        }
    }

    #[test]
    fn empirical_means_match_declared() {
        let mut env = BernoulliTreeEnv::example_tree(100_000);
        for t in [10, 5000] {
            let emp = empirical_means(&mut env, t, 100_000);
            assert_means_within(&emp, &env.means(t), 100_000, 3.0);
        }
    }

    #[test]
    fn replay_determinism() {
        let mut env = BernoulliTreeEnv::staircase(16, 0.4, Some(100), 0).unwrap();
        let a = env.costs(7, RoundStreams::new(11).for_round(7));
        let b = env.costs(7, RoundStreams::new(11).for_round(7));
        assert_eq!(a, b);
    }

    #[test]
    fn staircase_layout() {
        let env = BernoulliTreeEnv::staircase(4, 0.2, None, 0).unwrap();
        let p = env.initial_means();
        let want = [1.0, 0.6, 0.4, 0.2];
        for (a, b) in p.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        let env = BernoulliTreeEnv::staircase(256, 0.6, None, 0).unwrap();
        let p = env.initial_means();
        assert_eq!(p[0], 1.0);
        assert!((p.iter().cloned().fold(f64::MAX, f64::min) - 0.6).abs() < 1e-12);
        assert_eq!(p.iter().cloned().fold(0.0, f64::max), 1.0);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(BernoulliTreeEnv::new(vec![0.5, 1.5], None, 0).is_err());
        assert!(BernoulliTreeEnv::new(vec![0.5, 0.5], None, 2).is_err());
        assert!(BernoulliTreeEnv::staircase(4, 1.0, None, 0).is_err());
    }
}
