//! Seeded randomness, partitioned into named substreams.
//!
//! Every random draw in the crate flows from one root seed through a
//! labelled substream (`split`, `init`, `dropout`, ...), so components
//! are individually reproducible: changing the number of epochs does not
//! perturb the train/test split, and so on. Streams are derived with
//! FNV-1a over the label and counters, which is stable across platforms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(mut hash: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// RNG for the substream `label` under `seed`.
pub fn substream(seed: u64, label: &str) -> ChaCha8Rng {
    substream_at(seed, label, &[])
}

/// RNG for the substream `label` at a counter position (epoch, batch,
/// sample, ...). Distinct counters yield independent streams, which lets
/// per-sample work run in parallel without sharing RNG state.
pub fn substream_at(seed: u64, label: &str, counters: &[u64]) -> ChaCha8Rng {
    let mut hash = fnv1a(FNV_OFFSET, &seed.to_le_bytes());
    hash = fnv1a(hash, label.as_bytes());
    for c in counters {
        hash = fnv1a(hash, &c.to_le_bytes());
    }
    ChaCha8Rng::seed_from_u64(hash)
}

/// In-place Fisher-Yates shuffle under the given stream.
pub fn shuffle<T>(items: &mut [T], rng: &mut impl rand::Rng) {
    for i in (1..items.len()).rev() {
        let j = rng.gen_range(0..=i);
        items.swap(i, j);
    }
}
