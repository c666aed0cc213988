//! Inputs shared by the benchmarks.

use propsim::verify::SyntheticSpec;
use propsim::{DenseMatrix, Precision};

/// `rows x cols` exact random values with `bits` significant bits.
pub fn matrix(rows: usize, cols: usize, seed: u64, bits: u32) -> DenseMatrix<f64> {
    let g = SyntheticSpec::random_exact(seed, rows, cols, Precision::Double, bits)
        .generator()
        .expect("valid bench input");
    DenseMatrix::from_fn(rows, cols, |q, i| g.value(q, i))
}
