//! Deterministic random-number streams.
//!
//! Every stochastic draw in this crate comes from a ChaCha stream addressed
//! by `(seed, domain, index)`. The seed keys the generator, while the 64-bit
//! ChaCha stream id encodes a small domain tag in its top bits and a counter
//! (pair index, pixel index, ...) in the remainder. Because each unit of work
//! owns its stream outright, results are independent of scheduling: a frame
//! simulated on one thread is bit-identical to the same frame simulated on
//! sixteen, and to the sequential fallback.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Number of low bits of the stream id reserved for the counter.
const INDEX_BITS: u32 = 58;

/// Largest counter value a stream id can carry.
pub const MAX_STREAM_INDEX: u64 = (1 << INDEX_BITS) - 1;

/// Independent randomness domains. Keeping them disjoint guarantees that,
/// for one seed, the draws behind (say) the constructive frame's pairs never
/// overlap those behind its dark counts or the destructive frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamDomain {
    /// Photon-pair draws for a constructive-basis frame.
    PairConstructive = 0,
    /// Photon-pair draws for a destructive-basis frame.
    PairDestructive = 1,
    /// Per-pixel dark counts for a constructive-basis frame.
    DarkConstructive = 2,
    /// Per-pixel dark counts for a destructive-basis frame.
    DarkDestructive = 3,
    /// Per-pixel noise added by the card tamper model.
    CardNoise = 4,
    /// Random key-card pattern generation.
    CardPattern = 5,
}

/// Generator for one `(seed, domain, index)` address.
///
/// # Panics
///
/// Panics if `index` exceeds [`MAX_STREAM_INDEX`]; budgets anywhere near that
/// bound are far outside anything the simulator supports.
pub fn stream(seed: u64, domain: StreamDomain, index: u64) -> ChaCha8Rng {
    assert!(
        index <= MAX_STREAM_INDEX,
        "stream index {index} exceeds the {INDEX_BITS}-bit counter space"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((domain as u64) << INDEX_BITS) | index);
    rng
}

/// Stable derivation of a child seed from `(seed, lane)`.
///
/// Used where whole sub-runs (e.g. the steps of a phase sweep) need unrelated
/// seeds of their own. SplitMix64 finalizer; same output on every platform.
pub fn child_seed(seed: u64, lane: u64) -> u64 {
    let mut z = seed
        .wrapping_add(lane.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
