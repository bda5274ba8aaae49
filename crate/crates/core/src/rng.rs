//! Deterministic random-number streams.
//!
//! Every Poisson stream in a timeline gets its own ChaCha8 generator keyed by
//! (master seed, stream id, stream kind, site). Streams are therefore
//! independent of the order in which they are consumed: materializing a full
//! timeline and generating the same events lazily yield bit-identical
//! sequences, and replicas can be produced in any order without changing
//! results.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Identifies one timeline's randomness: a master seed plus a stream id that
/// encodes the consumer (experiment namespace and replica index).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub master: u64,
    pub stream: u64,
}

impl SeedRecord {
    pub fn new(master: u64, stream: u64) -> Self {
        SeedRecord { master, stream }
    }

    /// Stream id layout: high 16 bits name the consumer, low 48 bits index
    /// the replica. Keeps manifests human-readable.
    pub fn for_replica(master: u64, namespace: u16, replica: u64) -> Self {
        assert!(replica < (1 << 48), "replica index too large");
        SeedRecord { master, stream: ((namespace as u64) << 48) | replica }
    }
}

/// Stream namespaces used by the experiment drivers.
pub mod namespace {
    pub const MAIN: u16 = 0;
    pub const BURN_IN: u16 = 1;
    pub const LAMBDA_PROBE: u16 = 2;
    pub const DIRECT_CHAIN: u16 = 3;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StreamKind {
    Death,
    /// Arrows whose source is the keyed site and whose target is source - 1.
    ArrowLeft,
    /// Arrows whose source is the keyed site and whose target is source + 1.
    ArrowRight,
    /// Single stream consumed by the direct (non-graphical) samplers.
    Scalar,
}

impl StreamKind {
    fn tag(self) -> u32 {
        match self {
            StreamKind::Death => 0,
            StreamKind::ArrowLeft => 1,
            StreamKind::ArrowRight => 2,
            StreamKind::Scalar => 3,
        }
    }
}

const KEY_TAG: u32 = 0x5744_4745; // distinguishes these keys from any other ChaCha use

/// Generator for one (seed, kind, site) stream.
pub fn stream_rng(seed: SeedRecord, kind: StreamKind, site: i64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.master.to_le_bytes());
    key[8..16].copy_from_slice(&seed.stream.to_le_bytes());
    key[16..20].copy_from_slice(&kind.tag().to_le_bytes());
    key[20..28].copy_from_slice(&site.to_le_bytes());
    key[28..32].copy_from_slice(&KEY_TAG.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Uniform draw in `[0, 1)` with 53 bits of precision.
#[inline]
pub fn unit_f64(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Exponential(rate) gap. Always strictly positive.
#[inline]
pub fn exp_gap(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    debug_assert!(rate > 0.0);
    let u = 1.0 - unit_f64(rng); // in (0, 1]
    let g = -u.ln() / rate;
    if g > 0.0 {
        g
    } else {
        f64::MIN_POSITIVE
    }
}
