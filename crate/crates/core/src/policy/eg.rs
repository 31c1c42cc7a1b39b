use rand::Rng;

use super::softmax::{sample_index, softmax, softmax_into};
use crate::error::{check_unit_cost, Error, Result};

/// Normalized exponentiated gradient over a node's children.
///
/// Needs complete one-hop feedback: after every round the node learns the
/// would-be cost of every child, whether or not it received the job.
#[derive(Debug, Clone)]
pub struct NormalizedEg {
    theta: Vec<f64>,
    eta: f64,
    probs: Vec<f64>,
}

impl NormalizedEg {
    pub fn new(arity: usize, eta: f64) -> Result<Self> {
        if arity == 0 {
            return Err(Error::param("arity", "node has no children"));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::param("eta", format!("must be positive, got {eta}")));
        }
        Ok(Self {
            theta: vec![0.0; arity],
            eta,
            probs: vec![1.0 / arity as f64; arity],
        })
    }

    /// `sqrt(ln |C_i| / T)`.
    pub fn default_eta(horizon: u64, arity: usize) -> f64 {
        ((arity as f64).ln() / horizon.max(1) as f64).sqrt()
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn distribution(&self) -> Vec<f64> {
        softmax(&self.theta, self.eta)
    }

    /// Returns the chosen child and its selection probability.
    pub fn select<R: Rng + ?Sized>(&mut self, rng: &mut R) -> (usize, f64) {
        softmax_into(&self.theta, self.eta, &mut self.probs);
        let j = sample_index(&self.probs, rng);
        (j, self.probs[j])
    }

    /// `theta_j -= y_j` for every child.
    pub fn update(&mut self, child_costs: &[f64]) -> Result<()> {
        if child_costs.len() != self.theta.len() {
            return Err(Error::param(
                "child_costs",
                format!("{} entries for {} children", child_costs.len(), self.theta.len()),
            ));
        }
        for (j, &y) in child_costs.iter().enumerate() {
            check_unit_cost(y, || format!("child position {j}"))?;
        }
        for (th, &y) in self.theta.iter_mut().zip(child_costs) {
            *th -= y;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn update_rule() {
        let mut eg = NormalizedEg::new(2, 0.5).unwrap();
        eg.update(&[1.0, 0.0]).unwrap();
        assert_eq!(eg.theta(), &[-1.0, 0.0]);
        let mut eg = NormalizedEg::new(2, 0.5).unwrap();
        eg.theta = vec![-2.0, -3.0];
        eg.update(&[0.5, 0.5]).unwrap();
        assert_eq!(eg.theta(), &[-2.5, -3.5]);
        assert!(eg.update(&[1.5, 0.0]).is_err());
        assert!(eg.update(&[0.5]).is_err());
    }

    #[test]
    fn starts_uniform() {
        let eg = NormalizedEg::new(2, 0.3).unwrap();
        assert_eq!(eg.distribution(), vec![0.5, 0.5]);
    }

    #[test]
    fn two_child_closed_form() {
        // After t rounds of costs (0, 1): x_1 = 1 / (1 + e^{-eta t}).
        let eta = 0.05;
        let mut eg = NormalizedEg::new(2, eta).unwrap();
        for t in 1..=200u32 {
            eg.update(&[0.0, 1.0]).unwrap();
            let want = 1.0 / (1.0 + (-eta * t as f64).exp());
            assert!((eg.distribution()[0] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn default_eta() {
        assert!((NormalizedEg::default_eta(100_000, 2) - (2f64.ln() / 1e5).sqrt()).abs() < 1e-15);
    }
}
