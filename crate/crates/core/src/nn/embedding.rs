//! Embedding lookup layer.
//!
//! Forward reads one table row per input index; backward scatters the output
//! gradient back into the rows that were read, accumulating when an index
//! repeats.

use crate::error::{Error, Result};

use super::param::Parameter;
use super::tensor::Tensor2;

#[derive(Debug, Clone)]
pub struct Embedding {
    pub table: Parameter,
}

impl Embedding {
    pub fn new(table: Parameter) -> Self {
        Embedding { table }
    }

    pub fn dim(&self) -> usize {
        self.table.cols()
    }

    pub fn forward(&self, indices: &[usize]) -> Result<Tensor2> {
        embedding_forward(&self.table, indices)
    }

    pub fn backward(&mut self, indices: &[usize], grad_out: &Tensor2) {
        embedding_backward(&mut self.table, indices, grad_out);
    }
}

pub fn embedding_forward(table: &Parameter, indices: &[usize]) -> Result<Tensor2> {
    let rows = table.rows();
    let dim = table.cols();
    let mut out = Tensor2::zeros(indices.len(), dim);
    for (pos, &idx) in indices.iter().enumerate() {
        if idx >= rows {
            return Err(Error::IndexOutOfRange {
                index: idx,
                position: pos,
                rows,
            });
        }
        out.row_mut(pos).copy_from_slice(table.value.row(idx));
    }
    Ok(out)
}

pub fn embedding_backward(table: &mut Parameter, indices: &[usize], grad_out: &Tensor2) {
    assert_eq!(
        grad_out.rows(),
        indices.len(),
        "gradient/index length mismatch"
    );
    assert_eq!(grad_out.cols(), table.cols(), "gradient width mismatch");
    for (pos, &idx) in indices.iter().enumerate() {
        let src = grad_out.row(pos);
        let dst = table.grad.row_mut(idx);
        for (d, s) in dst.iter_mut().zip(src) {
            *d += s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> Parameter {
        Parameter::new(
            "table",
            Tensor2::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]),
        )
    }

    #[test]
    fn lookup_by_index() {
        let t = table();
        let out = embedding_forward(&t, &[1, 0, 1]).unwrap();
        assert_eq!(
            out,
            Tensor2::from_rows(&[vec![3.0, 4.0], vec![1.0, 2.0], vec![3.0, 4.0]])
        );
    }

    #[test]
    fn empty_index_sequence() {
        let t = table();
        let out = embedding_forward(&t, &[]).unwrap();
        assert_eq!(out.rows(), 0);
        assert_eq!(out.cols(), 2);
    }

    #[test]
    fn out_of_range_index_names_position() {
        let t = table();
        let err = embedding_forward(&t, &[0, 2]).unwrap_err();
        match err {
            Error::IndexOutOfRange {
                index,
                position,
                rows,
            } => {
                assert_eq!(index, 2);
                assert_eq!(position, 1);
                assert_eq!(rows, 2);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn backward_scatters_and_accumulates_on_repeats() {
        let mut t = table();
        let upstream = Tensor2::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0], vec![1.0, 1.0]]);
        embedding_backward(&mut t, &[1, 0, 1], &upstream);
        // Row 1 read twice, row 0 once.
        assert_eq!(
            t.grad,
            Tensor2::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0]])
        );
    }
}
