//! Deterministic random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 stream keyed by the global
//! seed plus a small tuple naming its purpose, so results never depend on worker
//! count or scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Corpus = 1,
    Style = 2,
    Init = 3,
    Batch = 4,
    Rollout = 5,
    Eval = 6,
    Supervised = 7,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Stream for `(seed, domain, keys...)`.
pub fn stream(seed: u64, domain: Domain, keys: &[u64]) -> Rng {
    let mut h = splitmix64(seed ^ splitmix64(domain as u64));
    for &k in keys {
        h = splitmix64(h ^ splitmix64(k.wrapping_add(0x632b_e59b_d9b4_e019)));
    }
    ChaCha8Rng::seed_from_u64(h)
}
