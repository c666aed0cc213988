use crate::element::{Element, Precision};
use crate::error::{Error, Result};
use crate::mingemm::{DenseMatrix, MatRef};

/// A rank's slice of the global `n_f x n_v` vector matrix.
///
/// Element `(q, i)` is stored at `i * n_f_local + q`. All elements are finite
/// and nonnegative; NaN is rejected here so kernels never see it.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorBlock<T> {
    field_offset: usize,
    vector_offset: usize,
    elements: DenseMatrix<T>,
}

impl<T: Element> VectorBlock<T> {
    pub fn new(field_offset: usize, vector_offset: usize, elements: DenseMatrix<T>) -> Result<Self> {
        if elements.rows() == 0 || elements.cols() == 0 {
            return Err(Error::dim("a vector block needs at least one field and one vector"));
        }
        for c in 0..elements.cols() {
            for (q, &x) in elements.col(c).iter().enumerate() {
                // Written so NaN fails the test.
                if !(x >= T::ZERO && x.to_f64().is_finite()) {
                    return Err(Error::InvalidElement {
                        field: field_offset + q,
                        vector: vector_offset + c,
                        value: x.to_f64(),
                    });
                }
            }
        }
        Ok(VectorBlock {
            field_offset,
            vector_offset,
            elements,
        })
    }

    /// Builds a block by evaluating `f(q, i)` at global coordinates.
    pub fn from_fn(
        field_offset: usize,
        n_f_local: usize,
        vector_offset: usize,
        n_v_local: usize,
        f: impl Fn(usize, usize) -> T,
    ) -> Result<Self> {
        let m = DenseMatrix::from_fn(n_f_local, n_v_local, |q, i| {
            f(field_offset + q, vector_offset + i)
        });
        VectorBlock::new(field_offset, vector_offset, m)
    }

    pub fn n_f_local(&self) -> usize {
        self.elements.rows()
    }

    pub fn n_v_local(&self) -> usize {
        self.elements.cols()
    }

    pub fn field_offset(&self) -> usize {
        self.field_offset
    }

    pub fn vector_offset(&self) -> usize {
        self.vector_offset
    }

    pub fn precision(&self) -> Precision {
        T::PRECISION
    }

    pub fn get(&self, q: usize, i: usize) -> T {
        self.elements.get(q, i)
    }

    pub fn matrix(&self) -> &DenseMatrix<T> {
        &self.elements
    }

    pub fn view(&self) -> MatRef<'_, T> {
        self.elements.view()
    }

    pub fn into_matrix(self) -> DenseMatrix<T> {
        self.elements
    }
}
