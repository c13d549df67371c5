//! Seeded random streams.
//!
//! Every random decision is drawn from a ChaCha8 generator seeded with the
//! scene seed and switched to a dedicated stream: one per role, and one per
//! object for per-object decisions. Streams are independent, so the order in
//! which objects are generated (or how many workers generate them) cannot
//! change any value.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Layout,
    Rig,
    Ground,
    Background(u32),
    Foreground(u32),
    Vehicle(u32),
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Layout => 1,
            Stream::Rig => 2,
            Stream::Ground => 3,
            Stream::Background(i) => (1 << 32) | i as u64,
            Stream::Foreground(i) => (2 << 32) | i as u64,
            Stream::Vehicle(i) => (3 << 32) | i as u64,
        }
    }
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}
