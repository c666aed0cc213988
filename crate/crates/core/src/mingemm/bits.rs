use super::matrix::{DenseMatrix, MatRef};
use crate::element::Element;
use crate::error::{Error, Result};

/// Column-major matrix of 0/1 entries packed 64 to a word.
///
/// Each column occupies `words_per_col` words; bits past `rows` are zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    words_per_col: usize,
    data: Vec<u64>,
}

impl BitMatrix {
    /// Packs a dense matrix whose entries are all exactly 0 or 1.
    pub fn from_dense<T: Element>(m: MatRef<'_, T>) -> Result<Self> {
        let rows = m.rows();
        let words_per_col = rows.div_ceil(64);
        let mut data = vec![0u64; words_per_col * m.cols()];
        for c in 0..m.cols() {
            let words = &mut data[c * words_per_col..(c + 1) * words_per_col];
            for (q, &x) in m.col(c).iter().enumerate() {
                if x == T::ONE {
                    words[q / 64] |= 1u64 << (q % 64);
                } else if x != T::ZERO {
                    return Err(Error::InvalidElement {
                        field: q,
                        vector: c,
                        value: x.to_f64(),
                    });
                }
            }
        }
        Ok(BitMatrix {
            rows,
            cols: m.cols(),
            words_per_col,
            data,
        })
    }

    /// Builds from columns of booleans.
    pub fn from_bool_columns(columns: &[Vec<bool>]) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::dim("columns differ in length"));
        }
        let words_per_col = rows.div_ceil(64);
        let mut data = vec![0u64; words_per_col * columns.len()];
        for (c, col) in columns.iter().enumerate() {
            for (q, &b) in col.iter().enumerate() {
                if b {
                    data[c * words_per_col + q / 64] |= 1u64 << (q % 64);
                }
            }
        }
        Ok(BitMatrix {
            rows,
            cols: columns.len(),
            words_per_col,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn words_per_col(&self) -> usize {
        self.words_per_col
    }

    pub fn col_words(&self, c: usize) -> &[u64] {
        &self.data[c * self.words_per_col..(c + 1) * self.words_per_col]
    }

    pub fn column_weights(&self) -> Vec<u64> {
        (0..self.cols)
            .map(|c| {
                self.col_words(c)
                    .iter()
                    .map(|w| w.count_ones() as u64)
                    .sum()
            })
            .collect()
    }
}

/// `M[i][j] = popcount(W[:, i] AND V[:, j])`.
///
/// On 0/1 data `min` and `AND` coincide, so this equals the dense
/// min-product exactly.
pub fn mgemm_bitpacked(w: &BitMatrix, v: &BitMatrix) -> Result<DenseMatrix<u64>> {
    if w.rows != v.rows {
        return Err(Error::dim(format!(
            "bit operands have {} and {} rows",
            w.rows, v.rows
        )));
    }
    let mut out = DenseMatrix::zeros(w.cols, v.cols);
    for j in 0..v.cols {
        let vc = v.col_words(j);
        for i in 0..w.cols {
            let wc = w.col_words(i);
            let n: u64 = wc
                .iter()
                .zip(vc)
                .map(|(a, b)| (a & b).count_ones() as u64)
                .sum();
            out.set(i, j, n);
        }
    }
    Ok(out)
}
