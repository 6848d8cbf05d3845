use nalgebra::{DMatrix, DVector};

use super::{SensingOperator, TbOperator};
use crate::error::check_len;
use crate::{Error, Result, C64};

/// Entry cap for dense materialization.
pub const DEFAULT_DENSE_CAP: usize = 2_000_000;

pub fn materialize(op: &TbOperator) -> Result<DMatrix<C64>> {
    materialize_capped(op, DEFAULT_DENSE_CAP)
}

/// Dense matrix of `op`, built column by column from steering vectors and
/// pilot diagonals.
pub fn materialize_capped(op: &TbOperator, cap: usize) -> Result<DMatrix<C64>> {
    let (r, c) = (op.rows(), op.cols());
    let requested = r.saturating_mul(c);
    if requested > cap {
        return Err(Error::SizeCap { requested, cap });
    }
    let mut a = DMatrix::zeros(r, c);
    for j in 0..c {
        a.set_column(j, &DVector::from_vec(op.dense_column(j)?));
    }
    Ok(a)
}

/// Explicit-matrix operator, for problems too small or too irregular for the
/// structured form.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    matrix: DMatrix<C64>,
}

impl DenseOperator {
    pub fn new(matrix: DMatrix<C64>) -> Self {
        DenseOperator { matrix }
    }
    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }
}

impl SensingOperator for DenseOperator {
    fn rows(&self) -> usize {
        self.matrix.nrows()
    }
    fn cols(&self) -> usize {
        self.matrix.ncols()
    }
    fn apply(&self, x: &[C64]) -> Result<Vec<C64>> {
        check_len("dense input", self.cols(), x.len())?;
        Ok((&self.matrix * DVector::from_column_slice(x)).data.into())
    }
    fn apply_adjoint(&self, y: &[C64]) -> Result<Vec<C64>> {
        check_len("dense input", self.rows(), y.len())?;
        Ok((self.matrix.adjoint() * DVector::from_column_slice(y)).data.into())
    }
    fn column(&self, j: usize) -> Result<Vec<C64>> {
        if j >= self.cols() {
            return Err(Error::OutOfRange(format!("column {j} of {}", self.cols())));
        }
        Ok(self.matrix.column(j).iter().copied().collect())
    }
}
