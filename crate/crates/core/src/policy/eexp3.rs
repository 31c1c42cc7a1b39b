use rand::Rng;

use super::softmax::{sample_index, softmax, softmax_into};
use super::PolicyParams;
use crate::error::{check_unit_cost, Error, Result};

/// Smallest mode-conditional probability the update is allowed to divide by.
pub const PROBABILITY_FLOOR: f64 = 1e-300;

/// Selection mode of an ε-EXP3 node in one round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Uniform over children, so that every child keeps receiving jobs.
    Uniform,
    /// Exponential weights over `theta`.
    Exp3,
}

/// One round's draw at an ε-EXP3 node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeDraw {
    pub mode: Mode,
    pub child: usize,
    /// Probability of `child` given `mode`.
    pub conditional_prob: f64,
    /// Marginal probability `x[i, child]` over both modes.
    pub marginal_prob: f64,
}

/// ε-EXP3 learner at one node.
///
/// Each round the node flips a mode (uniform with probability ε), picks a
/// child, and after the job returns divides the realized cost by its own
/// receive probability `v` and the mode-conditional choice probability. The
/// resulting estimate is unbiased for the child's cost over the randomness of
/// the node and all of its ancestors.
#[derive(Debug, Clone)]
pub struct EpsilonExp3 {
    theta: Vec<f64>,
    params: PolicyParams,
    soft: Vec<f64>,
}

impl EpsilonExp3 {
    pub fn new(arity: usize, params: PolicyParams) -> Result<Self> {
        if arity == 0 {
            return Err(Error::param("arity", "node has no children"));
        }
        params.validate()?;
        Ok(Self {
            theta: vec![0.0; arity],
            params,
            soft: vec![1.0 / arity as f64; arity],
        })
    }

    pub fn params(&self) -> PolicyParams {
        self.params
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn arity(&self) -> usize {
        self.theta.len()
    }

    /// Zeroes `theta` and installs new parameters.
    pub fn reset(&mut self, params: PolicyParams) -> Result<()> {
        params.validate()?;
        self.params = params;
        self.theta.iter_mut().for_each(|t| *t = 0.0);
        Ok(())
    }

    /// Starts from a given `theta` instead of zeros.
    pub fn with_theta(theta: Vec<f64>, params: PolicyParams) -> Result<Self> {
        let mut node = Self::new(theta.len(), params)?;
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::param("theta", "entries must be finite"));
        }
        node.theta = theta;
        Ok(node)
    }

    /// Exponential-weights part of the mixture.
    pub fn exp3_distribution(&self) -> Vec<f64> {
        softmax(&self.theta, self.params.eta)
    }

    /// `x[i, j] = ε / |C_i| + (1 - ε) softmax_j`.
    pub fn distribution(&self) -> Vec<f64> {
        let k = self.arity() as f64;
        let eps = self.params.epsilon;
        self.exp3_distribution()
            .into_iter()
            .map(|s| eps / k + (1.0 - eps) * s)
            .collect()
    }

    pub fn select<R: Rng + ?Sized>(&mut self, rng: &mut R) -> ModeDraw {
        let k = self.arity();
        let eps = self.params.epsilon;
        softmax_into(&self.theta, self.params.eta, &mut self.soft);
        let uniform = eps > 0.0 && rng.random::<f64>() < eps;
        let (mode, child, conditional_prob) = if uniform {
            (Mode::Uniform, rng.random_range(0..k), 1.0 / k as f64)
        } else {
            let j = sample_index(&self.soft, rng);
            (Mode::Exp3, j, self.soft[j])
        };
        ModeDraw {
            mode,
            child,
            conditional_prob,
            marginal_prob: eps / k as f64 + (1.0 - eps) * self.soft[child],
        }
    }

    /// Importance-weighted estimate `z` for the chosen child.
    ///
    /// Uniform mode: `y |C_i| / v`. Exp3 mode: `y / (v softmax_j)`, where
    /// `softmax_j` is the probability the draw was made with.
    pub fn estimate(&self, draw: &ModeDraw, cost: f64, receive_prob: f64) -> Result<f64> {
        check_unit_cost(cost, || "realized cost".into())?;
        if !(receive_prob > 0.0 && receive_prob <= 1.0 + 1e-12) {
            return Err(Error::param(
                "v",
                format!("receive probability must be in (0, 1], got {receive_prob}"),
            ));
        }
        if cost == 0.0 {
            return Ok(0.0);
        }
        match draw.mode {
            Mode::Uniform => Ok(cost * self.arity() as f64 / receive_prob),
            Mode::Exp3 => {
                if draw.conditional_prob < PROBABILITY_FLOOR {
                    return Err(Error::Numerical(format!(
                        "conditional choice probability {:e} below floor {PROBABILITY_FLOOR:e}",
                        draw.conditional_prob
                    )));
                }
                let z = cost / (receive_prob * draw.conditional_prob);
                if z.is_finite() {
                    Ok(z)
                } else {
                    Err(Error::Numerical(format!(
                        "importance weight overflow: y={cost}, v={receive_prob:e}, p={:e}",
                        draw.conditional_prob
                    )))
                }
            }
        }
    }

    /// Applies the estimate to the chosen child's `theta`. Only call this
    /// when the node actually received the job.
    pub fn update(&mut self, draw: &ModeDraw, cost: f64, receive_prob: f64) -> Result<()> {
        if draw.child >= self.arity() {
            return Err(Error::param("child", format!("position {} out of range", draw.child)));
        }
        let z = self.estimate(draw, cost, receive_prob)?;
        self.theta[draw.child] -= z;
        Ok(())
    }
}
