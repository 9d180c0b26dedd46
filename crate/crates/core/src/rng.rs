use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Generator used throughout the crate.
pub type SimRng = ChaCha8Rng;

/// Identifies one independent random stream: a master seed plus a replicate index.
///
/// Streams with the same seed and different indices are the independent
/// ChaCha streams of the same key, so replicates never share state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSpec {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl RngSpec {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self {
            master_seed,
            stream_index,
        }
    }

    pub fn rng(&self) -> SimRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        rng
    }

    /// Stream `index` within the block of streams reserved for `purpose`.
    ///
    /// Different purposes of one experiment (auction replicates, mixture
    /// samples, permutation resampling) draw from disjoint index ranges.
    pub fn for_purpose(master_seed: u64, purpose: StreamPurpose, index: u64) -> Self {
        Self::new(master_seed, ((purpose as u64) << 48) | index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamPurpose {
    Auction = 0,
    Mixture = 1,
    Permutation = 2,
}
