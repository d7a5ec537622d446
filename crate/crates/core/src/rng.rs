//! Counter-based random streams keyed by `(master_seed, replica_index, stream)`.
//!
//! Every replica owns a ChaCha8 key derived from the master seed and its
//! index; independent sub-streams (one per displacement class) use the
//! 64-bit ChaCha stream id. Replicas and classes are therefore reproducible
//! in any order and on any number of workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub replica_index: u64,
}

impl SeedSpec {
    pub const fn new(master_seed: u64, replica_index: u64) -> Self {
        Self { master_seed, replica_index }
    }

    /// Generator for sub-stream `stream` of this replica.
    pub fn stream(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key());
        rng.set_stream(stream);
        rng
    }

    /// The 256-bit ChaCha key of this replica.
    pub fn key(&self) -> [u8; 32] {
        let mut state = self.master_seed ^ 0x6a09_e667_f3bc_c908;
        let mut key = [0u8; 32];
        let mut mixed = splitmix64(&mut state) ^ self.replica_index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        for chunk in key.chunks_exact_mut(8) {
            let word = splitmix64(&mut mixed);
            chunk.copy_from_slice(&word.to_le_bytes());
        }
        key
    }

    /// Seed for an independent replica family derived from this master seed,
    /// e.g. a second sample set used to test an estimate made on the first.
    pub fn derived_master(master_seed: u64, salt: u64) -> u64 {
        let mut s = master_seed ^ salt.wrapping_mul(0xd1b5_4a32_d192_ed03);
        splitmix64(&mut s)
    }
}

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
