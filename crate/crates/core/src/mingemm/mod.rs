//! Min-product matrix kernels.
//!
//! The min-product replaces multiplication with `min` in a GEMM-shaped
//! accumulation: `M[i][j] = sum_q min(W[q][i], V[q][j])`. All kernels here
//! agree bitwise with [`mgemm_naive`].

mod bits;
mod dense;
mod matrix;

use std::ops::AddAssign;

pub use bits::{mgemm_bitpacked, BitMatrix};
pub use dense::{column_sums, mgemm_blocked, mgemm_naive, xj_columns, Tile};
pub use matrix::{DenseMatrix, MatRef};

use crate::element::Element;
use crate::error::Result;

/// Scalar operations executed, counted the usual way: one per add, min or
/// multiply (divisions count as multiplies).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpCounts {
    pub adds: u64,
    pub mins: u64,
    pub muls: u64,
}

impl OpCounts {
    pub fn total(&self) -> u64 {
        self.adds + self.mins + self.muls
    }

    /// Cost of an `m x n` min-product over `k` rows.
    pub fn mgemm(k: usize, m: usize, n: usize) -> Self {
        let outputs = (m * n) as u64;
        OpCounts {
            adds: outputs * (k as u64).saturating_sub(1),
            mins: outputs * k as u64,
            muls: 0,
        }
    }

    /// Cost of column sums of a `k x n` matrix.
    pub fn column_sums(k: usize, n: usize) -> Self {
        OpCounts {
            adds: n as u64 * (k as u64).saturating_sub(1),
            ..Default::default()
        }
    }
}

impl AddAssign for OpCounts {
    fn add_assign(&mut self, rhs: Self) {
        self.adds += rhs.adds;
        self.mins += rhs.mins;
        self.muls += rhs.muls;
    }
}

/// Which numerator kernel a run uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kernel {
    /// Reference loop; one accumulator at a time.
    Naive,
    /// Output-tiled dense kernel.
    Blocked(Tile),
    /// AND + popcount on packed bits. Inputs must be 0/1.
    BitPacked,
}

impl Default for Kernel {
    fn default() -> Self {
        Kernel::Blocked(Tile::default())
    }
}

impl Kernel {
    /// Runs the min-product with this kernel, returning numerators in `T`
    /// and adding the operations executed to `ops`.
    pub fn mgemm<T: Element>(
        &self,
        w: MatRef<'_, T>,
        v: MatRef<'_, T>,
        ops: &mut OpCounts,
    ) -> Result<DenseMatrix<T>> {
        match *self {
            Kernel::Naive => {
                let r = mgemm_naive(w, v)?;
                *ops += OpCounts::mgemm(w.rows(), w.cols(), v.cols());
                Ok(r)
            }
            Kernel::Blocked(tile) => {
                let r = mgemm_blocked(w, v, tile)?;
                *ops += OpCounts::mgemm(w.rows(), w.cols(), v.cols());
                Ok(r)
            }
            Kernel::BitPacked => {
                let wb = BitMatrix::from_dense(w)?;
                let vb = BitMatrix::from_dense(v)?;
                let counts = mgemm_bitpacked(&wb, &vb)?;
                // One AND and one accumulate per word pair.
                let words = wb.words_per_col();
                let outputs = (w.cols() * v.cols()) as u64;
                *ops += OpCounts {
                    adds: outputs * (words as u64).saturating_sub(1),
                    mins: outputs * words as u64,
                    muls: 0,
                };
                let data = counts
                    .into_vec()
                    .into_iter()
                    .map(T::from_u64_exact)
                    .collect();
                DenseMatrix::from_col_major(w.cols(), v.cols(), data)
            }
        }
    }
}
