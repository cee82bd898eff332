//! Matrix serialization shared by fixture files and result artifacts:
//! `{"rows": r, "cols": c, "data": [[..], ..]}` with row-major nested
//! arrays of decimal numbers.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Vec<f64>>,
}

impl MatrixJson {
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data: (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
                .collect(),
        }
    }

    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        if self.data.len() != self.rows || self.data.iter().any(|r| r.len() != self.cols) {
            return Err(Error::Fixture(format!(
                "matrix data does not match declared shape {}x{}",
                self.rows, self.cols
            )));
        }
        let flat: Vec<f64> = self.data.iter().flatten().copied().collect();
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &flat))
    }
}
