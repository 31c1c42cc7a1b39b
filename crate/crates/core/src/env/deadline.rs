use rand_distr::{Distribution, Exp};

use super::{CostEnvironment, EnvRng};
use crate::error::{Error, Result};
use crate::topology::{NodeId, TreeTopology};

/// Exponential link delay with rate `λ(t)` moving linearly from `start` at
/// round 1 to `end` at the horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkRate {
    pub start: f64,
    pub end: f64,
}

impl LinkRate {
    pub fn constant(rate: f64) -> Self {
        Self {
            start: rate,
            end: rate,
        }
    }

    pub fn at(&self, t: u64, horizon: u64) -> f64 {
        if horizon <= 1 || self.start == self.end {
            return self.start;
        }
        let frac = (t.saturating_sub(1) as f64 / (horizon - 1) as f64).min(1.0);
        self.start + (self.end - self.start) * frac
    }
}

/// Deterministic processing stage at a leaf.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcessingProfile {
    pub time: f64,
    pub miss_rate: f64,
}

/// Defaults for the edge-computing and multi-hop scenarios. None of these
/// numbers are measured values; every field can be overridden from config.
#[derive(Debug, Clone, PartialEq)]
pub struct LatencyDefaults {
    pub constant_rate: f64,
    pub ramp_start: f64,
    pub ramp_end: f64,
    pub precise: ProcessingProfile,
    pub fast: ProcessingProfile,
    pub deadline: f64,
}

impl Default for LatencyDefaults {
    fn default() -> Self {
        Self {
            constant_rate: 8.0,
            ramp_start: 2.0,
            ramp_end: 200.0,
            precise: ProcessingProfile {
                time: 0.5,
                miss_rate: 0.005,
            },
            fast: ProcessingProfile {
                time: 0.2,
                miss_rate: 0.10,
            },
            deadline: 1.0,
        }
    }
}

/// Leaf cost is 1 when the end-to-end latency (sum of the leaf's link delays
/// plus its processing time) exceeds the deadline, otherwise the leaf's miss
/// rate. Links are shared between leaves: one delay is drawn per link per
/// round.
#[derive(Debug, Clone)]
pub struct DeadlineLatencyEnv {
    links: Vec<LinkRate>,
    leaf_links: Vec<Vec<usize>>,
    profiles: Vec<ProcessingProfile>,
    deadline: f64,
    horizon: u64,
    delays: Vec<f64>,
}

impl DeadlineLatencyEnv {
    pub fn new(
        links: Vec<LinkRate>,
        leaf_links: Vec<Vec<usize>>,
        profiles: Vec<ProcessingProfile>,
        deadline: f64,
        horizon: u64,
    ) -> Result<Self> {
        if leaf_links.len() != profiles.len() || leaf_links.is_empty() {
            return Err(Error::param(
                "profiles",
                "need exactly one processing profile per leaf",
            ));
        }
        for l in &links {
            if !(l.start > 0.0 && l.end > 0.0 && l.start.is_finite() && l.end.is_finite()) {
                return Err(Error::param("link rate", format!("rates must be positive, got {l:?}")));
            }
        }
        if leaf_links.iter().flatten().any(|&k| k >= links.len()) {
            return Err(Error::param("leaf_links", "refers to an unknown link"));
        }
        for p in &profiles {
            if !(0.0..=1.0).contains(&p.miss_rate) || p.time < 0.0 {
                return Err(Error::param(
                    "profile",
                    format!("miss rate must be in [0, 1] and time >= 0, got {p:?}"),
                ));
            }
        }
        if !(deadline > 0.0) {
            return Err(Error::param("deadline", "must be positive"));
        }
        let delays = vec![0.0; links.len()];
        Ok(Self {
            links,
            leaf_links,
            profiles,
            deadline,
            horizon: horizon.max(1),
            delays,
        })
    }

    /// Robot offloading to `servers` edge servers, each choosing among
    /// `servers` neural networks. Even-numbered uplinks keep a constant rate,
    /// odd-numbered ones ramp. Network profiles interpolate linearly from the
    /// precise profile to the fast one.
    pub fn edge_computing(servers: usize, horizon: u64, d: &LatencyDefaults) -> Result<Self> {
        if servers < 2 {
            return Err(Error::param("fanout", "edge computing needs at least 2 servers"));
        }
        let links = (0..servers).map(|k| rate_for_position(k, d)).collect();
        let mut leaf_links = Vec::new();
        let mut profiles = Vec::new();
        for s in 0..servers {
            for n in 0..servers {
                leaf_links.push(vec![s]);
                let frac = n as f64 / (servers - 1) as f64;
                profiles.push(ProcessingProfile {
                    time: d.precise.time + frac * (d.fast.time - d.precise.time),
                    miss_rate: d.precise.miss_rate + frac * (d.fast.miss_rate - d.precise.miss_rate),
                });
            }
        }
        Self::new(links, leaf_links, profiles, d.deadline, horizon)
    }

    /// Every tree edge is a link into the child; a leaf's latency is the sum
    /// over its root path. Edges into even child positions keep a constant
    /// rate, the rest ramp. Delivered packets cost 0.
    pub fn multi_hop(tree: &TreeTopology, horizon: u64, d: &LatencyDefaults) -> Result<Self> {
        let n = tree.node_count();
        // link k carries the edge into node k + 1
        let mut links = Vec::with_capacity(n - 1);
        for i in 1..n {
            let node = NodeId(i);
            let parent = tree.parent(node).expect("non-root node has a parent");
            let pos = tree
                .children(parent)
                .iter()
                .position(|&c| c == node)
                .expect("child listed under its parent");
            links.push(rate_for_position(pos, d));
        }
        let leaf_links = tree
            .leaves()
            .iter()
            .map(|&leaf| {
                tree.path_to(leaf)
                    .expect("leaf is in the tree")
                    .iter()
                    .skip(1)
                    .map(|n| n.0 - 1)
                    .collect()
            })
            .collect();
        let profiles = vec![
            ProcessingProfile {
                time: 0.0,
                miss_rate: 0.0
            };
            tree.leaf_count()
        ];
        Self::new(links, leaf_links, profiles, d.deadline, horizon)
    }

    pub fn links(&self) -> &[LinkRate] {
        &self.links
    }

    pub fn profiles(&self) -> &[ProcessingProfile] {
        &self.profiles
    }

    /// `P(latency > deadline)` for leaf `j` at round `t`.
    pub fn violation_probability(&self, j: usize, t: u64) -> f64 {
        let slack = self.deadline - self.profiles[j].time;
        if slack < 0.0 {
            return 1.0;
        }
        let rates: Vec<f64> = self.leaf_links[j]
            .iter()
            .map(|&k| self.links[k].at(t, self.horizon))
            .collect();
        hypoexponential_tail(&rates, slack)
    }
}

fn rate_for_position(pos: usize, d: &LatencyDefaults) -> LinkRate {
    if pos.is_multiple_of(2) {
        LinkRate::constant(d.constant_rate)
    } else {
        LinkRate {
            start: d.ramp_start,
            end: d.ramp_end,
        }
    }
}

/// `P(X_1 + ... + X_m > x)` for independent `X_k ~ Exp(rates[k])`.
///
/// The sum is a phase-type variable; its survival function is evaluated by
/// uniformization at rate `max(rates)`, which is exact up to the truncated
/// Poisson tail (below 1e-15) and handles repeated rates.
pub(crate) fn hypoexponential_tail(rates: &[f64], x: f64) -> f64 {
    if rates.is_empty() {
        return 0.0;
    }
    if x <= 0.0 {
        return 1.0;
    }
    let big = rates.iter().cloned().fold(0.0, f64::max);
    let a = big * x;
    let mut phase = vec![0.0; rates.len()];
    phase[0] = 1.0;
    let mut log_w = -a;
    let mut mass = 0.0;
    let mut tail = 0.0;
    let limit = (a + 40.0 * a.sqrt() + 50.0) as usize;
    for n in 0..=limit {
        if n > 0 {
            log_w += a.ln() - (n as f64).ln();
            // one uniformized step: move forward with prob rate / big
            for k in (0..rates.len()).rev() {
                let moved = phase[k] * rates[k] / big;
                phase[k] -= moved;
                if k + 1 < rates.len() {
                    phase[k + 1] += moved;
                }
            }
        }
        let w = log_w.exp();
        let alive: f64 = phase.iter().sum();
        tail += w * alive;
        mass += w;
        if n as f64 > a && 1.0 - mass < 1e-15 {
            break;
        }
    }
    tail.clamp(0.0, 1.0)
}

impl CostEnvironment for DeadlineLatencyEnv {
    fn leaf_count(&self) -> usize {
        self.leaf_links.len()
    }

    fn draw(&mut self, t: u64, rng: &mut EnvRng, out: &mut [f64]) {
        for (delay, link) in self.delays.iter_mut().zip(&self.links) {
            let rate = link.at(t, self.horizon);
            *delay = Exp::new(rate).expect("rate validated positive").sample(rng);
        }
        for (j, o) in out.iter_mut().enumerate() {
            let profile = self.profiles[j];
            let latency: f64 =
                self.leaf_links[j].iter().map(|&k| self.delays[k]).sum::<f64>() + profile.time;
            *o = if latency > self.deadline {
                1.0
            } else {
                profile.miss_rate
            };
        }
    }

    fn expected_costs(&self, t: u64) -> Option<Vec<f64>> {
        Some(
            (0..self.leaf_count())
                .map(|j| {
                    let v = self.violation_probability(j, t);
                    v + (1.0 - v) * self.profiles[j].miss_rate
                })
                .collect(),
        )
    }
}
