//! Trial-indexed random streams.
//!
//! A stream is ChaCha8 keyed by the master seed (and a lane tag) with the
//! ChaCha stream id set to the trial index, so the randomness a trial sees
//! is a pure function of `(seed, lane, trial)` and never of scheduling.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Lane for the exploration and graph sampling stream.
pub const LANE_MAIN: u64 = 0;
/// Lane for auxiliary uniforms used by the coupled walks.
pub const LANE_AUX: u64 = 1;
/// Lane for ad hoc simulations outside the graph model.
pub const LANE_SIM: u64 = 2;

#[derive(Clone, Debug)]
pub struct RandomStream {
    seed: u64,
    lane: u64,
    index: u64,
    rng: ChaCha8Rng,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RandomStream {
    pub fn new(seed: u64, index: u64) -> Self {
        Self::with_lane(seed, LANE_MAIN, index)
    }

    pub fn with_lane(seed: u64, lane: u64, index: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&lane.to_le_bytes());
        key[16..24].copy_from_slice(&splitmix(seed ^ lane.rotate_left(32)).to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(index);
        Self {
            seed,
            lane,
            index,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn lane(&self) -> u64 {
        self.lane
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    /// Number of 32-bit words consumed so far.
    pub fn counter(&self) -> u128 {
        self.rng.get_word_pos()
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}
