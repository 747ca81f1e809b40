//! Counter-based random streams.
//!
//! Every Monte Carlo run draws from its own ChaCha stream keyed by the master
//! seed and selected by `(group, index)`, so results do not depend on which
//! worker executes a run or in which order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Stream `index` of group `group` under `master`. Both counters are taken
/// modulo 2^32.
pub fn stream(master: u64, group: u64, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(((group & 0xffff_ffff) << 32) | (index & 0xffff_ffff));
    rng
}
