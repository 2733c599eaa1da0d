//! Seeded random streams.
//!
//! Every Monte Carlo routine draws from `ChaCha8Rng` keyed by the user seed
//! and an explicit stream index (a path or batch number), so results do not
//! depend on how the work is split across threads.
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Generator for `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform draw on `(0, 1]`.
#[inline]
pub fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.gen::<f64>()
}

/// Fixed batch size used by the batched Monte Carlo drivers.
pub const MC_BATCH: u64 = 1 << 16;

/// Number of batches covering `n` draws.
pub fn batch_count(n: u64) -> u64 {
    n.div_ceil(MC_BATCH)
}

/// Draw range `[start, end)` of batch `b` out of `n` total draws.
pub fn batch_range(b: u64, n: u64) -> (u64, u64) {
    let start = b * MC_BATCH;
    (start, (start + MC_BATCH).min(n))
}
