use rand::Rng;

use crate::error::{Error, Result};

/// Probability of forwarding to the child with the higher expected cost, as
/// a non-increasing function of the expected-cost gap `ζ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ForwardProb {
    /// `P(ζ) = min(1/2, q)`.
    Constant(f64),
    /// `P(ζ) = min(1/2, q e^{-ζ})`.
    ExpDecay(f64),
}

impl ForwardProb {
    pub fn q(&self) -> f64 {
        match *self {
            ForwardProb::Constant(q) | ForwardProb::ExpDecay(q) => q,
        }
    }

    pub fn eval(&self, gap: f64) -> f64 {
        match *self {
            ForwardProb::Constant(q) => q.min(0.5),
            ForwardProb::ExpDecay(q) => (q * (-gap).exp()).min(0.5),
        }
    }
}

/// Time-homogeneous two-child policy that is told both children's expected
/// costs before it forwards the job.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OraclePolicy {
    forward: ForwardProb,
}

impl OraclePolicy {
    pub fn new(forward: ForwardProb) -> Result<Self> {
        let q = forward.q();
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::param("oracle_q", format!("must be in [0, 1], got {q}")));
        }
        Ok(Self { forward })
    }

    /// Default `q = T^{-1/L}`.
    pub fn default_q(horizon: u64, depth: usize) -> f64 {
        (horizon.max(1) as f64).powf(-1.0 / depth.max(1) as f64)
    }

    pub fn forward(&self) -> ForwardProb {
        self.forward
    }

    /// Forwarding distribution over the two children given their expected
    /// costs; ties split evenly.
    pub fn distribution(&self, expected: &[f64]) -> Vec<f64> {
        debug_assert_eq!(expected.len(), 2);
        let (a, b) = (expected[0], expected[1]);
        if a == b {
            return vec![0.5, 0.5];
        }
        let p = self.forward.eval((a - b).abs());
        if a > b {
            vec![p, 1.0 - p]
        } else {
            vec![1.0 - p, p]
        }
    }

    pub fn select<R: Rng + ?Sized>(&self, expected: &[f64], rng: &mut R) -> (usize, f64) {
        let x = self.distribution(expected);
        let j = if rng.random::<f64>() < x[0] { 0 } else { 1 };
        (j, x[j])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn greedy_limit() {
        let o = OraclePolicy::new(ForwardProb::Constant(0.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..1000 {
            assert_eq!(o.select(&[0.3, 0.7], &mut rng).0, 0);
        }
    }

    #[test]
    fn forwards_to_worse_child_with_q() {
        let o = OraclePolicy::new(ForwardProb::Constant(0.25)).unwrap();
        assert_eq!(o.distribution(&[0.3, 0.7]), vec![0.75, 0.25]);
        assert_eq!(o.distribution(&[0.7, 0.3]), vec![0.25, 0.75]);
        assert_eq!(o.distribution(&[0.5, 0.5]), vec![0.5, 0.5]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 100_000;
        let hits = (0..n).filter(|_| o.select(&[0.3, 0.7], &mut rng).0 == 1).count();
        let f = hits as f64 / n as f64;
        assert!((f - 0.25).abs() < 4.0 * (0.1875f64 / n as f64).sqrt());
    }

    #[test]
    fn forward_prob_non_increasing() {
        for f in [ForwardProb::Constant(0.3), ForwardProb::ExpDecay(0.9)] {
            let mut last = f64::INFINITY;
            for k in 0..100 {
                let v = f.eval(k as f64 * 0.05);
                assert!((0.0..=1.0).contains(&v) && v <= last);
                last = v;
            }
        }
        assert_eq!(ForwardProb::Constant(0.9).eval(0.1), 0.5);
        assert!(OraclePolicy::new(ForwardProb::Constant(1.5)).is_err());
    }

    #[test]
    fn default_q() {
        assert!((OraclePolicy::default_q(10_000, 2) - 0.01).abs() < 1e-15);
    }
}
