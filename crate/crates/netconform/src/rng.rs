//! Deterministic, splittable random-number streams.
//!
//! Monte Carlo replicates, and the independent draw groups inside one
//! replicate (latent positions, edge noise, response noise, …), each need
//! their own stream so that results are bit-reproducible and so tests can
//! replay one group of draws while varying another. A [`RngStream`] is a
//! lightweight value identifying `(seed, stream)`; concrete generators are
//! derived per [`Purpose`] by hashing `(seed, stream, purpose)` into the
//! 256-bit seed of a ChaCha8 generator. Distinct purposes or streams give
//! (practically) independent generators; identical keys give bit-identical
//! draws on every platform.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Label for an independent draw group within one stream.
///
/// Adding a variant is cheap; the numeric tags feeding the hash are stable
/// and must never be reordered, or previously published seeds would replay
/// differently.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    /// Latent positions ξ (or block latent coordinates).
    LatentPositions,
    /// Edge-level uniforms η deciding adjacency entries.
    EdgeNoise,
    /// Conventional covariate draws (X, feature noise).
    Covariates,
    /// Response noise ε.
    ResponseNoise,
    /// Class-label draws.
    Labels,
    /// Data-split shuffling.
    Splits,
    /// Cross-validation fold assignment.
    CvFolds,
    /// Tie-breaking jitter added to scores.
    Jitter,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::LatentPositions => 1,
            Purpose::EdgeNoise => 2,
            Purpose::Covariates => 3,
            Purpose::ResponseNoise => 4,
            Purpose::Labels => 5,
            Purpose::Splits => 6,
            Purpose::CvFolds => 7,
            Purpose::Jitter => 8,
        }
    }
}

/// A named position in the space of reproducible random streams.
///
/// `RngStream` is copyable and carries no generator state: it only knows how
/// to *derive* generators. Replicate workers should each own
/// `root.substream(replicate)`; within a worker, independent draw groups come
/// from [`RngStream::rng`] with distinct [`Purpose`] values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    seed: u64,
    stream: u64,
}

impl RngStream {
    /// Root stream for a run seed.
    pub fn new(seed: u64) -> Self {
        RngStream { seed, stream: 0 }
    }

    /// The run seed this stream derives from.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Child stream `id` (replicate index, cell index, …). Substreams may be
    /// nested; each nesting level mixes into the stream key.
    pub fn substream(&self, id: u64) -> Self {
        RngStream {
            seed: self.seed,
            stream: splitmix64(self.stream ^ id.wrapping_mul(0x9e37_79b9_7f4a_7c15)),
        }
    }

    /// Derive the generator for one draw group.
    pub fn rng(&self, purpose: Purpose) -> ChaCha8Rng {
        self.rng_salted(purpose, 0)
    }

    /// Like [`RngStream::rng`] but with an extra salt, for call sites that
    /// need several independent generators of the same purpose (e.g. one per
    /// graph when a replicate samples more than one).
    pub fn rng_salted(&self, purpose: Purpose, salt: u64) -> ChaCha8Rng {
        let mut state = splitmix64(self.seed ^ 0x51_7c_c1_b7_27_22_0a_95);
        state = splitmix64(state ^ self.stream);
        state = splitmix64(state ^ purpose.tag().wrapping_mul(0xbf58_476d_1ce4_e5b9));
        state = splitmix64(state ^ salt.wrapping_mul(0x94d0_49bb_1331_11eb));
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }
}

/// One step of the splitmix64 output function: a cheap, well-mixed 64-bit
/// permutation used only for key derivation, never as a generator itself.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn first_draws(rng: &mut ChaCha8Rng, k: usize) -> Vec<u64> {
        (0..k).map(|_| rng.random()).collect()
    }

    #[test]
    fn identical_keys_reproduce_bit_exactly() {
        let a = RngStream::new(7).substream(3);
        let b = RngStream::new(7).substream(3);
        assert_eq!(
            first_draws(&mut a.rng(Purpose::EdgeNoise), 16),
            first_draws(&mut b.rng(Purpose::EdgeNoise), 16),
        );
    }

    #[test]
    fn purposes_streams_and_salts_differ() {
        let s = RngStream::new(7).substream(3);
        let base = first_draws(&mut s.rng(Purpose::EdgeNoise), 4);
        assert_ne!(base, first_draws(&mut s.rng(Purpose::ResponseNoise), 4));
        assert_ne!(
            base,
            first_draws(&mut s.substream(4).rng(Purpose::EdgeNoise), 4)
        );
        assert_ne!(
            base,
            first_draws(&mut RngStream::new(8).substream(3).rng(Purpose::EdgeNoise), 4)
        );
        assert_ne!(
            base,
            first_draws(&mut s.rng_salted(Purpose::EdgeNoise, 1), 4)
        );
    }

    #[test]
    fn nested_substreams_are_order_sensitive() {
        let root = RngStream::new(1);
        assert_ne!(root.substream(1).substream(2), root.substream(2).substream(1));
    }

    /// Frozen first outputs: guards against accidental changes to the key
    /// derivation, which would silently re-randomize every seeded run.
    #[test]
    fn derivation_is_stable_across_releases() {
        let mut rng = RngStream::new(42).substream(0).rng(Purpose::LatentPositions);
        let draws = first_draws(&mut rng, 2);
        assert_eq!(draws, vec![5685603176071849758, 14001856296128438061]);
    }
}
