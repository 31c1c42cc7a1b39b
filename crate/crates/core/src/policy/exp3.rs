use rand::Rng;

use super::softmax::{sample_index, softmax_into};
use crate::error::{check_unit_cost, Error, Result};

/// Classic γ-mixed EXP3 run by a node on its own.
///
/// The node treats its children as arms and importance-weights the observed
/// cost by its own choice probability only. It knows nothing about how
/// likely it was to receive the job, so it learns only from rounds in which
/// its ancestors routed the job to it.
#[derive(Debug, Clone)]
pub struct Exp3Baseline {
    theta: Vec<f64>,
    eta: f64,
    gamma: f64,
    soft: Vec<f64>,
    probs: Vec<f64>,
}

impl Exp3Baseline {
    pub fn new(arity: usize, gamma: f64, eta: f64) -> Result<Self> {
        if arity == 0 {
            return Err(Error::param("arity", "node has no children"));
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::param("gamma", format!("must be in [0, 1], got {gamma}")));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::param("eta", format!("must be positive, got {eta}")));
        }
        Ok(Self {
            theta: vec![0.0; arity],
            eta,
            gamma,
            soft: vec![0.0; arity],
            probs: vec![1.0 / arity as f64; arity],
        })
    }

    /// `γ = min(1, sqrt(K ln K / ((e - 1) T)))` and `η = γ / K`.
    pub fn classic(arity: usize, horizon: u64) -> Result<Self> {
        let gamma = Self::classic_gamma(arity, horizon);
        Self::new(arity, gamma, gamma / arity as f64)
    }

    pub fn classic_gamma(arity: usize, horizon: u64) -> f64 {
        let k = arity as f64;
        (k * k.ln() / ((std::f64::consts::E - 1.0) * horizon.max(1) as f64))
            .sqrt()
            .min(1.0)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn distribution(&self) -> Vec<f64> {
        let mut soft = vec![0.0; self.theta.len()];
        let mut out = vec![0.0; self.theta.len()];
        self.fill(&mut soft, &mut out);
        out
    }

    fn fill(&self, soft: &mut [f64], out: &mut [f64]) {
        softmax_into(&self.theta, self.eta, soft);
        let k = self.theta.len() as f64;
        for (o, s) in out.iter_mut().zip(soft.iter()) {
            *o = (1.0 - self.gamma) * s + self.gamma / k;
        }
    }

    /// Returns the chosen child and its selection probability.
    pub fn select<R: Rng + ?Sized>(&mut self, rng: &mut R) -> (usize, f64) {
        let (mut soft, mut probs) = (std::mem::take(&mut self.soft), std::mem::take(&mut self.probs));
        self.fill(&mut soft, &mut probs);
        let j = sample_index(&probs, rng);
        let p = probs[j];
        self.soft = soft;
        self.probs = probs;
        (j, p)
    }

    /// `y / p_j`, the node-local importance-weighted cost.
    pub fn estimate(cost: f64, prob: f64) -> Result<f64> {
        check_unit_cost(cost, || "realized cost".into())?;
        if !(prob > 0.0) {
            return Err(Error::Numerical(format!("selection probability {prob:e} is not positive")));
        }
        Ok(cost / prob)
    }

    pub fn update(&mut self, child: usize, prob: f64, cost: f64) -> Result<()> {
        if child >= self.theta.len() {
            return Err(Error::param("child", format!("position {child} out of range")));
        }
        self.theta[child] -= Self::estimate(cost, prob)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn starts_uniform() {
        let e = Exp3Baseline::classic(4, 1000).unwrap();
        assert_eq!(e.distribution(), vec![0.25; 4]);
    }

    #[test]
    fn classic_constants() {
        let g = Exp3Baseline::classic_gamma(2, 100_000);
        let want = (2.0 * 2f64.ln() / ((std::f64::consts::E - 1.0) * 1e5)).sqrt();
        assert!((g - want).abs() < 1e-15);
        assert_eq!(Exp3Baseline::classic_gamma(4, 1), 1.0);
        assert!((Exp3Baseline::classic_gamma(2, 1) - 0.898_215_468).abs() < 1e-9);
        let e = Exp3Baseline::classic(2, 100_000).unwrap();
        assert!((e.eta() - g / 2.0).abs() < 1e-18);
    }

    #[test]
    fn gamma_floor() {
        let mut e = Exp3Baseline::new(2, 0.1, 1.0).unwrap();
        e.theta = vec![0.0, -1e6];
        let x = e.distribution();
        assert!((x[1] - 0.05).abs() < 1e-12);
        assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn update_divides_by_own_probability() {
        let mut e = Exp3Baseline::new(2, 0.1, 1.0).unwrap();
        e.update(1, 0.25, 0.5).unwrap();
        assert_eq!(e.theta(), &[0.0, -2.0]);
        assert!(e.update(0, 0.0, 0.5).is_err());
        assert!(e.update(0, 0.5, 2.0).is_err());
    }
}
