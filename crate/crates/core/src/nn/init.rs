//! Seeded weight initialization.
//!
//! Glorot-uniform for affine, convolution and GRU input weights; plain
//! uniform for recurrent weights and embedding tables; zeros for biases.
//! Everything draws from a caller-supplied RNG so that runs are reproducible.

use rand::Rng;

use super::tensor::Tensor2;

pub const EMBED_INIT_RANGE: f64 = 0.05;

pub fn uniform<R: Rng>(rows: usize, cols: usize, lo: f64, hi: f64, rng: &mut R) -> Tensor2 {
    let mut t = Tensor2::zeros(rows, cols);
    for v in t.data_mut() {
        *v = rng.gen_range(lo..hi);
    }
    t
}

/// Glorot/Xavier uniform: limit = sqrt(6 / (fan_in + fan_out)).
/// Weight matrices are laid out `(out_dim, in_dim)` so fan_out = rows,
/// fan_in = cols.
pub fn glorot_uniform<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Tensor2 {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    uniform(rows, cols, -limit, limit, rng)
}

pub fn embedding_table<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Tensor2 {
    uniform(rows, cols, -EMBED_INIT_RANGE, EMBED_INIT_RANGE, rng)
}
