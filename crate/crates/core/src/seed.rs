//! Counter-based splitting of a single root seed into independent streams.
//!
//! Every Monte Carlo unit (a path, a trial) draws from its own ChaCha8 stream
//! keyed by `(root, domain)` and selected by its index, so results do not
//! depend on evaluation order or thread count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domain for simulated measurement paths.
pub const DOMAIN_PATHS: u64 = 0x7061_7468;
/// Stream domain for adversary trials.
pub const DOMAIN_TRIALS: u64 = 0x7472_6961;
/// Stream domain for additive baseline noise.
pub const DOMAIN_NOISE: u64 = 0x6e6f_6973;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// RNG for unit `index` of `domain` under `root`.
pub fn stream_rng(root: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(root ^ splitmix64(domain)));
    rng.set_stream(index);
    rng
}
