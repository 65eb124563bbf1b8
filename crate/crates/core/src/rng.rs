//! Seeded random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator addressed by
//! a `(seed, stream)` pair, so a replication or Monte-Carlo sample can be
//! regenerated without replaying any other one. Work can then be split over
//! any number of threads without changing a single bit of output.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type StreamRng = ChaCha8Rng;

/// Generator for stream `stream` of the family keyed by `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 finalizer applied to `seed ^ tag`; used to give independent
/// seed families to different roles (cells, patterns, noise...).
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn gaussian_vector(rng: &mut StreamRng, len: usize) -> DVector<f64> {
    DVector::from_iterator(len, (0..len).map(|_| StandardNormal.sample(rng)))
}

/// `rows x cols` standard Gaussian matrix, drawn in row-major order.
pub fn gaussian_matrix(rng: &mut StreamRng, rows: usize, cols: usize) -> DMatrix<f64> {
    let draws: Vec<f64> = (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect();
    DMatrix::from_row_slice(rows, cols, &draws)
}
