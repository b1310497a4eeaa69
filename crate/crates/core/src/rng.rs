//! Splittable, reproducible random streams.
//!
//! A stream is identified by `(seed, stream)`. Draws are produced in fixed
//! chunks of rows, each chunk from its own ChaCha sub-stream, so that the
//! output does not depend on how many worker threads generate it.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// Rows generated by a single ChaCha sub-stream.
pub const CHUNK_ROWS: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// A child stream, distinct for each `index`.
    pub fn split(self, index: u64) -> Self {
        Self {
            seed: self.seed,
            stream: splitmix64(self.stream ^ splitmix64(index.wrapping_add(0x5851_f42d_4c95_7f2d))),
        }
    }

    /// A generator for one chunk of this stream.
    pub fn rng(&self, chunk: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(self.seed) ^ self.stream);
        rng.set_stream(chunk);
        rng
    }

    /// `rows × cols` standard-normal draws.
    pub fn standard_normals(&self, rows: usize, cols: usize) -> DMatrix<f64> {
        let chunks: Vec<Vec<f64>> = (0..rows.div_ceil(CHUNK_ROWS))
            .into_par_iter()
            .map(|c| {
                let start = c * CHUNK_ROWS;
                let n = CHUNK_ROWS.min(rows - start);
                let mut rng = self.rng(c as u64);
                (0..n * cols).map(|_| rng.sample(StandardNormal)).collect()
            })
            .collect();
        let mut out = DMatrix::zeros(rows, cols);
        for (c, vals) in chunks.iter().enumerate() {
            let start = c * CHUNK_ROWS;
            for (k, v) in vals.iter().enumerate() {
                out[(start + k / cols, k % cols)] = *v;
            }
        }
        out
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}
