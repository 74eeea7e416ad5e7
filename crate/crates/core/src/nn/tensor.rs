//! Row-major 2-d tensor of `f64`, the universal activation carrier.
//!
//! A tensor of shape `(rows, cols)` holds one sequence position per row and
//! one feature dimension per column. Sequences of length zero are legal and
//! produce `0 x cols` tensors.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor2 {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor2 {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor2 {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds a tensor from a flat row-major buffer.
    ///
    /// Panics if `data.len() != rows * cols`; that is a programming error,
    /// not a data fault.
    pub fn from_flat(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(
            data.len(),
            rows * cols,
            "flat buffer of {} values does not fill a {}x{} tensor",
            data.len(),
            rows,
            cols
        );
        Tensor2 { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Tensor2 {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn ensure_finite(&self, context: &str) -> Result<()> {
        if self.all_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite {
                context: context.to_string(),
            })
        }
    }

    /// Element-wise accumulation; shapes must match.
    pub fn add_assign(&mut self, other: &Tensor2) {
        assert_eq!(self.rows, other.rows, "add_assign row mismatch");
        assert_eq!(self.cols, other.cols, "add_assign col mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// Concatenates tensors column-wise. All inputs must share a row count.
    pub fn hcat(parts: &[&Tensor2]) -> Self {
        let rows = parts.first().map_or(0, |t| t.rows);
        let cols = parts.iter().map(|t| t.cols).sum();
        let mut out = Tensor2::zeros(rows, cols);
        for r in 0..rows {
            let mut offset = 0;
            for part in parts {
                assert_eq!(part.rows, rows, "hcat row mismatch");
                out.row_mut(r)[offset..offset + part.cols].copy_from_slice(part.row(r));
                offset += part.cols;
            }
        }
        out
    }

    /// Shape string for error messages, e.g. "3x4".
    pub fn shape_str(&self) -> String {
        format!("{}x{}", self.rows, self.cols)
    }
}
