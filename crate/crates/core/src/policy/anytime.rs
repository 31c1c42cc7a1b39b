use rand::Rng;

use super::eexp3::{EpsilonExp3, ModeDraw};
use super::{default_params, PolicyParams};
use crate::error::Result;

/// Where round `t` falls in the doubling schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    /// `m = floor(log2 t)`.
    pub index: u32,
    /// Segment length and tuning horizon, `2^m`.
    pub horizon: u64,
    /// True on the first round of a segment (`t = 2^m`).
    pub reset: bool,
}

/// Doubling schedule: segment `m` covers rounds `2^m ..= 2^(m+1) - 1`.
pub fn segment_of(t: u64) -> Segment {
    let t = t.max(1);
    let index = 63 - t.leading_zeros();
    Segment {
        index,
        horizon: 1u64 << index,
        reset: t.is_power_of_two(),
    }
}

/// Parameters for round `t` together with the reset signal.
pub fn anytime_params(t: u64, depth: usize, max_fanout: usize, children_all_leaves: bool) -> (PolicyParams, Segment) {
    let seg = segment_of(t);
    (
        default_params(seg.horizon, depth, max_fanout, children_all_leaves),
        seg,
    )
}

/// ε-EXP3 restarted from scratch at every power-of-two round with parameters
/// tuned to the segment length. Needs no horizon.
#[derive(Debug, Clone)]
pub struct AnytimeEpsilonExp3 {
    inner: EpsilonExp3,
    depth: usize,
    max_fanout: usize,
    children_all_leaves: bool,
    segment: Option<u32>,
}

impl AnytimeEpsilonExp3 {
    pub fn new(arity: usize, depth: usize, max_fanout: usize, children_all_leaves: bool) -> Result<Self> {
        let (params, _) = anytime_params(1, depth, max_fanout, children_all_leaves);
        Ok(Self {
            inner: EpsilonExp3::new(arity, params)?,
            depth,
            max_fanout,
            children_all_leaves,
            segment: None,
        })
    }

    /// Call once at the start of every round, before selecting.
    pub fn begin_round(&mut self, t: u64) -> Result<bool> {
        let (params, seg) = anytime_params(t, self.depth, self.max_fanout, self.children_all_leaves);
        if self.segment != Some(seg.index) {
            self.inner.reset(params)?;
            self.segment = Some(seg.index);
            return Ok(true);
        }
        Ok(false)
    }

    pub fn inner(&self) -> &EpsilonExp3 {
        &self.inner
    }

    pub fn distribution(&self) -> Vec<f64> {
        self.inner.distribution()
    }

    pub fn select<R: Rng + ?Sized>(&mut self, rng: &mut R) -> ModeDraw {
        self.inner.select(rng)
    }

    pub fn update(&mut self, draw: &ModeDraw, cost: f64, receive_prob: f64) -> Result<()> {
        self.inner.update(draw, cost, receive_prob)
    }
}
