//! Deterministic derivation of independent random streams.
//!
//! Every replication is keyed by a single `u64`. Environments draw round `t`
//! from a ChaCha stream selected by `t`, so a cost vector depends only on the
//! (seed, round) pair. Each node owns its own stream keyed by its id, which
//! keeps runs reproducible whatever order nodes are visited in.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::topology::NodeId;

const ENV_DOMAIN: u64 = 0x656e_7669_726f_6e00;
const NODE_DOMAIN: u64 = 0x6e6f_6465_0000_0000;
const REPLICATION_DOMAIN: u64 = 0x7265_706c_0000_0000;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn derive(seed: u64, domain: u64, id: u64) -> u64 {
    mix64(mix64(seed ^ domain).wrapping_add(id))
}

/// Seed of the `k`-th replication under `master`.
pub fn replication_seed(master: u64, k: u64) -> u64 {
    derive(master, REPLICATION_DOMAIN, k)
}

pub fn node_rng(seed: u64, node: NodeId) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, NODE_DOMAIN, node.0 as u64))
}

/// Round-indexed environment randomness.
#[derive(Debug, Clone)]
pub struct RoundStreams {
    base: ChaCha8Rng,
}

impl RoundStreams {
    pub fn new(seed: u64) -> Self {
        Self {
            base: ChaCha8Rng::seed_from_u64(derive(seed, ENV_DOMAIN, 0)),
        }
    }

    /// Fresh generator for round `t`; identical for identical `(seed, t)`.
    pub fn for_round(&mut self, t: u64) -> &mut ChaCha8Rng {
        self.base.set_stream(t);
        self.base.set_word_pos(0);
        &mut self.base
    }
}
