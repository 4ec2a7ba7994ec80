//! Deterministic, splittable random-number streams.
//!
//! Every ensemble draws through a [`RandomStream`] derived from a
//! [`SeedSpec`] `(master_seed, stream_id)`. Derivation is a pure function of
//! the pair: the two integers are fed through a SplitMix64 chain to fill a
//! 32-byte ChaCha8 key, so a stream never depends on how many workers ran
//! before it or on scheduling order. Distinct stream ids give generators with
//! unrelated states.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Identifies one reproducible variate sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    /// Path index or subsystem tag; see [`stream_id`].
    pub stream_id: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self {
            master_seed,
            stream_id,
        }
    }
}

/// Subsystem tags used to partition the `stream_id` space so that no two
/// ensembles ever consume the same underlying sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u16)]
pub enum StreamTag {
    Lemma31 = 1,
    Covariance = 2,
    Independence = 3,
    FourthMoment = 4,
    CouplingIdentities = 5,
    GammaLaw = 6,
    RhoTau = 7,
    BlockLaw = 8,
    KolmogorovBound = 9,
    GridConsistency = 10,
    DecompTrend = 11,
    Rate = 12,
    PoissonMarginal = 13,
    PoissonIndependence = 14,
    SimulateCmd = 15,
    CoupleCmd = 16,
    SigmaMoment = 17,
}

/// Packs `(tag, group, index)` into one stream id: tag in the top 16 bits,
/// a group (e.g. an epsilon index) in the next 16, the replication index in
/// the low 32 bits.
pub fn stream_id(tag: StreamTag, group: u16, index: u32) -> u64 {
    ((tag as u64) << 48) | ((group as u64) << 32) | index as u64
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN_GAMMA);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the stream for `spec`. Pure in `(master_seed, stream_id)`.
pub fn derive_stream(spec: SeedSpec) -> RandomStream {
    // Mix the pair into a SplitMix64 state, then squeeze out the ChaCha key.
    let mut state = spec.master_seed;
    let a = splitmix64(&mut state);
    state ^= spec.stream_id.wrapping_mul(GOLDEN_GAMMA);
    let mut key = [0u8; 32];
    for (i, chunk) in key.chunks_exact_mut(8).enumerate() {
        let word = if i == 0 { a } else { splitmix64(&mut state) };
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    RandomStream {
        rng: ChaCha8Rng::from_seed(key),
        spec,
    }
}

/// One owned generator; never shared across threads concurrently, but freely
/// movable between them.
#[derive(Debug, Clone)]
pub struct RandomStream {
    rng: ChaCha8Rng,
    spec: SeedSpec,
}

impl RandomStream {
    pub fn spec(&self) -> SeedSpec {
        self.spec
    }

    /// Uniform draw on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    /// Exponential draw with the given rate, via the inverse CDF
    /// `-ln(1-U)/rate` with `U` in `[0,1)`.
    pub fn exponential(&mut self, rate: f64) -> f64 {
        assert!(rate > 0.0, "exponential rate must be positive");
        -(-self.uniform()).ln_1p() / rate
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Fair signed coin, +1 or -1.
    pub fn sign(&mut self) -> i8 {
        if self.bernoulli(0.5) {
            1
        } else {
            -1
        }
    }

    /// Standard normal draw (ziggurat).
    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }
}
