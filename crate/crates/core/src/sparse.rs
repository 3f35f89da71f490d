//! Row-sorted coordinate-format complex matrix.

use nalgebra::DMatrix;
use num_complex::Complex;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{OtfsError, Result};
use crate::scalar::{Real, C};

/// Sparse complex matrix stored as `(row, col, value)` triples sorted by row,
/// then column, with duplicates merged. A row-pointer index gives O(1) access
/// to each row's entries.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix<T: Real> {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, C<T>)>,
    row_ptr: Vec<usize>,
}

/// One exported triple.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Triplet {
    pub row: usize,
    pub col: usize,
    pub re: f64,
    pub im: f64,
}

impl<T: Real> SparseMatrix<T> {
    /// Builds from unsorted triples; repeated positions are summed and exact
    /// zeros dropped.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, C<T>)>,
    ) -> Result<Self> {
        let mut raw: Vec<(usize, usize, C<T>)> = triplets.into_iter().collect();
        if let Some(&(r, c, _)) = raw.iter().find(|&&(r, c, _)| r >= rows || c >= cols) {
            return Err(OtfsError::InvalidInput(format!(
                "entry ({r}, {c}) outside {rows}x{cols} matrix"
            )));
        }
        raw.sort_by_key(|&(r, c, _)| (r, c));
        let mut entries: Vec<(usize, usize, C<T>)> = Vec::with_capacity(raw.len());
        for (r, c, v) in raw {
            match entries.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 = last.2 + v,
                _ => entries.push((r, c, v)),
            }
        }
        entries.retain(|e| !e.2.is_zero());
        Ok(Self::from_sorted(rows, cols, entries))
    }

    fn from_sorted(rows: usize, cols: usize, entries: Vec<(usize, usize, C<T>)>) -> Self {
        let mut row_ptr = vec![0usize; rows + 1];
        for &(r, _, _) in &entries {
            row_ptr[r + 1] += 1;
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            rows,
            cols,
            entries,
            row_ptr,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_sorted(
            n,
            n,
            (0..n).map(|i| (i, i, Complex::new(T::one(), T::zero()))).collect(),
        )
    }

    /// Keeps entries with modulus above `drop_tol`.
    pub fn from_dense(a: &DMatrix<C<T>>, drop_tol: T) -> Self {
        let mut entries = Vec::new();
        for r in 0..a.nrows() {
            for c in 0..a.ncols() {
                let v = a[(r, c)];
                if v.norm() > drop_tol {
                    entries.push((r, c, v));
                }
            }
        }
        Self::from_sorted(a.nrows(), a.ncols(), entries)
    }

    pub fn to_dense(&self) -> DMatrix<C<T>> {
        let mut d = DMatrix::from_element(self.rows, self.cols, Complex::zero());
        for &(r, c, v) in &self.entries {
            d[(r, c)] = v;
        }
        d
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, usize, C<T>)] {
        &self.entries
    }

    /// Entries of row `r` as `(col, value)` pairs.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C<T>)> + '_ {
        self.entries[self.row_ptr[r]..self.row_ptr[r + 1]]
            .iter()
            .map(|&(_, c, v)| (c, v))
    }

    pub fn get(&self, r: usize, c: usize) -> C<T> {
        self.row(r)
            .find(|&(cc, _)| cc == c)
            .map(|(_, v)| v)
            .unwrap_or_else(Complex::zero)
    }

    pub fn row_nnz(&self) -> Vec<usize> {
        (0..self.rows).map(|r| self.row_ptr[r + 1] - self.row_ptr[r]).collect()
    }

    pub fn col_nnz(&self) -> Vec<usize> {
        let mut out = vec![0; self.cols];
        for &(_, c, _) in &self.entries {
            out[c] += 1;
        }
        out
    }

    pub fn mul_vec(&self, x: &[C<T>]) -> Result<Vec<C<T>>> {
        if x.len() != self.cols {
            return Err(OtfsError::LengthMismatch {
                expected: self.cols,
                found: x.len(),
            });
        }
        let mut y = vec![Complex::zero(); self.rows];
        for &(r, c, v) in &self.entries {
            y[r] = y[r] + v * x[c];
        }
        Ok(y)
    }

    /// `A^H x`.
    pub fn adjoint_mul_vec(&self, x: &[C<T>]) -> Result<Vec<C<T>>> {
        if x.len() != self.rows {
            return Err(OtfsError::LengthMismatch {
                expected: self.rows,
                found: x.len(),
            });
        }
        let mut y = vec![Complex::zero(); self.cols];
        for &(r, c, v) in &self.entries {
            y[c] = y[c] + v.conj() * x[r];
        }
        Ok(y)
    }

    /// Sub-matrix made of the listed columns, renumbered in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        let mut map = vec![usize::MAX; self.cols];
        for (new, &old) in cols.iter().enumerate() {
            if old >= self.cols {
                return Err(OtfsError::InvalidInput(format!(
                    "column {old} outside matrix with {} columns",
                    self.cols
                )));
            }
            map[old] = new;
        }
        let kept = self
            .entries
            .iter()
            .filter(|e| map[e.1] != usize::MAX)
            .map(|&(r, c, v)| (r, map[c], v));
        Self::from_triplets(self.rows, cols.len(), kept)
    }

    /// Copy with every entry multiplied by `s`.
    pub fn scaled(&self, s: C<T>) -> Self {
        Self::from_sorted(
            self.rows,
            self.cols,
            self.entries.iter().map(|&(r, c, v)| (r, c, v * s)).collect(),
        )
    }

    /// `A^H A`, restricted to the structurally non-zero pattern.
    pub fn gram(&self) -> Self {
        let mut trip = Vec::new();
        for r in 0..self.rows {
            let row: Vec<(usize, C<T>)> = self.row(r).collect();
            for &(ci, vi) in &row {
                for &(cj, vj) in &row {
                    trip.push((ci, cj, vi.conj() * vj));
                }
            }
        }
        // Cancellation can produce exact zeros; the pattern is rebuilt from the sum.
        Self::from_triplets(self.cols, self.cols, trip).expect("indices in range")
    }

    pub fn triplets(&self) -> Vec<Triplet> {
        self.entries
            .iter()
            .map(|&(r, c, v)| Triplet {
                row: r,
                col: c,
                re: v.re.to_f64_lossy(),
                im: v.im.to_f64_lossy(),
            })
            .collect()
    }

    /// CSV with header `row,col,re,im`, one line per stored entry.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("row,col,re,im\n");
        for t in self.triplets() {
            s.push_str(&format!("{},{},{:e},{:e}\n", t.row, t.col, t.re, t.im));
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.triplets())?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn duplicates_merge_and_cancel() {
        let m = SparseMatrix::from_triplets(
            2,
            2,
            vec![
                (0, 1, c(1.0, 0.0)),
                (0, 1, c(2.0, 0.0)),
                (1, 0, c(1.0, 0.0)),
                (1, 0, c(-1.0, 0.0)),
            ],
        )
        .unwrap();
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 1), c(3.0, 0.0));
        assert_eq!(m.row_nnz(), vec![1, 0]);
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(SparseMatrix::<f64>::from_triplets(2, 2, vec![(2, 0, c(1.0, 0.0))]).is_err());
    }

    #[test]
    fn products_match_dense() {
        let m = SparseMatrix::from_triplets(
            3,
            2,
            vec![(0, 0, c(1.0, 1.0)), (2, 1, c(0.0, -2.0)), (1, 0, c(0.5, 0.0))],
        )
        .unwrap();
        let d = m.to_dense();
        let x = [c(1.0, 2.0), c(-1.0, 0.5)];
        let y = m.mul_vec(&x).unwrap();
        let yd = &d * nalgebra::DVector::from_column_slice(&x);
        for (a, b) in y.iter().zip(yd.iter()) {
            assert!((a - b).norm() < 1e-15);
        }
        let z = [c(1.0, 0.0), c(0.0, 1.0), c(2.0, -1.0)];
        let w = m.adjoint_mul_vec(&z).unwrap();
        let wd = d.transpose().map(|v| v.conj()) * nalgebra::DVector::from_column_slice(&z);
        for (a, b) in w.iter().zip(wd.iter()) {
            assert!((a - b).norm() < 1e-15);
        }
        let g = m.gram().to_dense();
        let gd = d.transpose().map(|v| v.conj()) * &d;
        assert!((g - gd).iter().all(|v| v.norm() < 1e-15));
    }

    #[test]
    fn column_selection_renumbers() {
        let m = SparseMatrix::from_triplets(2, 3, vec![(0, 0, c(1.0, 0.0)), (1, 2, c(2.0, 0.0))]).unwrap();
        let s = m.select_columns(&[2]).unwrap();
        assert_eq!(s.ncols(), 1);
        assert_eq!(s.get(1, 0), c(2.0, 0.0));
        assert_eq!(s.nnz(), 1);
    }

    #[test]
    fn csv_export_has_header() {
        let m = SparseMatrix::from_triplets(1, 1, vec![(0, 0, c(0.5, -0.25))]).unwrap();
        let csv = m.to_csv();
        assert!(csv.starts_with("row,col,re,im\n0,0,5e-1,-2.5e-1"));
        let json = m.to_json().unwrap();
        let back: Vec<Triplet> = serde_json::from_str(&json).unwrap();
        assert_eq!(back[0].re, 0.5);
    }
}
