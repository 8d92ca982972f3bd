//! Deterministic random substreams.
//!
//! Monte-Carlo work is split into fixed-size chunks; chunk `k` draws from the
//! ChaCha stream `k` of the master seed. The chunk layout does not depend on
//! the number of worker threads, so results are identical for a given
//! `(seed, count)` regardless of how rayon schedules the chunks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Shots per substream.
pub const CHUNK: usize = 4096;

pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Generate `count` items in parallel, chunk by chunk, each chunk with its own substream.
pub fn par_generate<T, F>(seed: u64, count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> T + Sync,
{
    par_generate_indexed(seed, count, |_, rng| f(rng))
}

/// As [`par_generate`], also passing the global item index.
pub fn par_generate_indexed<T, F>(seed: u64, count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut ChaCha8Rng) -> T + Sync,
{
    let n_chunks = count.div_ceil(CHUNK);
    let chunks: Vec<Vec<T>> = (0..n_chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(seed, k as u64);
            let start = k * CHUNK;
            let end = (start + CHUNK).min(count);
            (start..end).map(|i| f(i, &mut rng)).collect()
        })
        .collect();
    chunks.into_iter().flatten().collect()
}
