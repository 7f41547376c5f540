//! Sliding window of iterates, residuals and gradient-step points.
//!
//! Entry `i` of the window holds `(x_i, r_i, y_{i+1})` with `y_{i+1} = x_i + r_i`.
//! With `m_k + 1` entries stored, column `j` of `X_k` is `x_{k-m_k+j} - x_{k-m_k+j-1}`
//! (oldest column first) and likewise for `R_k`, so that
//! `(X_k + R_k)[:, j] = y_{k-m_k+j+1} - y_{k-m_k+j}`.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryEntry {
    pub x: DVector<f64>,
    pub r: DVector<f64>,
    pub y: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct HistoryBuffer {
    depth: usize,
    entries: VecDeque<HistoryEntry>,
    pushes: usize,
}

impl HistoryBuffer {
    pub fn new(depth: usize) -> Self {
        HistoryBuffer {
            depth,
            entries: VecDeque::with_capacity(depth + 1),
            pushes: 0,
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Total number of pushes since construction.
    pub fn pushes(&self) -> usize {
        self.pushes
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `m_k = min(depth, k)`: the number of difference columns available.
    pub fn effective_depth(&self) -> usize {
        self.entries.len().saturating_sub(1)
    }

    pub fn push(&mut self, x: DVector<f64>, r: DVector<f64>, y: DVector<f64>) -> Result<()> {
        let n = self.entries.front().map_or(x.len(), |e| e.x.len());
        for got in [x.len(), r.len(), y.len()] {
            if got != n {
                return Err(Error::DimensionMismatch { expected: n, got });
            }
        }
        self.entries.push_back(HistoryEntry { x, r, y });
        while self.entries.len() > self.depth + 1 {
            self.entries.pop_front();
        }
        self.pushes += 1;
        Ok(())
    }

    pub fn latest(&self) -> Option<&HistoryEntry> {
        self.entries.back()
    }

    pub fn entries(&self) -> impl Iterator<Item = &HistoryEntry> {
        self.entries.iter()
    }

    /// `(X_k, R_k)`, each `n x m_k`, oldest column first.
    pub fn difference_matrices(&self) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        if self.entries.len() < 2 {
            return Err(Error::EmptyHistory(self.entries.len()));
        }
        let n = self.entries[0].x.len();
        let cols = self.entries.len() - 1;
        let mut dx = DMatrix::zeros(n, cols);
        let mut dr = DMatrix::zeros(n, cols);
        for (j, (older, newer)) in self.entries.iter().zip(self.entries.iter().skip(1)).enumerate() {
            dx.set_column(j, &(&newer.x - &older.x));
            dr.set_column(j, &(&newer.r - &older.r));
        }
        Ok((dx, dr))
    }

    /// `y_{k-j+1}` for lag `1 <= j <= m_k`.
    pub fn lagged_y(&self, lag: usize) -> Result<&DVector<f64>> {
        let depth = self.effective_depth();
        if lag == 0 || lag > depth {
            return Err(Error::LagOutOfRange { lag, depth });
        }
        Ok(&self.entries[self.entries.len() - 1 - lag].y)
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> DVector<f64> {
        DVector::from_element(1, v)
    }

    fn push_scalar(buf: &mut HistoryBuffer, x: f64, r: f64) {
        buf.push(scalar(x), scalar(r), scalar(x + r)).unwrap();
    }

    #[test]
    fn single_push_has_no_differences() {
        let mut buf = HistoryBuffer::new(3);
        push_scalar(&mut buf, 1.0, 0.5);
        assert_eq!(buf.effective_depth(), 0);
        assert!(matches!(buf.difference_matrices(), Err(Error::EmptyHistory(1))));
    }

    #[test]
    fn two_pushes_give_one_column() {
        let mut buf = HistoryBuffer::new(3);
        buf.push(DVector::from_vec(vec![1.0, 2.0]), DVector::zeros(2), DVector::zeros(2))
            .unwrap();
        buf.push(DVector::from_vec(vec![4.0, 0.0]), DVector::zeros(2), DVector::zeros(2))
            .unwrap();
        let (x, _) = buf.difference_matrices().unwrap();
        assert_eq!(x.ncols(), 1);
        assert_eq!(x.column(0).as_slice(), &[3.0, -2.0]);
    }

    #[test]
    fn window_evicts_oldest() {
        let mut buf = HistoryBuffer::new(2);
        for (x, r) in [(0.0, 1.0), (1.0, 2.0), (3.0, 4.0), (10.0, 0.0)] {
            push_scalar(&mut buf, x, r);
        }
        let (x, r) = buf.difference_matrices().unwrap();
        assert_eq!(x.as_slice(), &[2.0, 7.0]);
        assert_eq!(r.as_slice(), &[2.0, -4.0]);
        assert_eq!(buf.pushes(), 4);
        assert_eq!(buf.len(), 3);
    }

    #[test]
    fn pairwise_differences() {
        let mut buf = HistoryBuffer::new(5);
        for (x, r) in [(0.0, 1.0), (1.0, 2.0), (3.0, 4.0)] {
            push_scalar(&mut buf, x, r);
        }
        let (x, r) = buf.difference_matrices().unwrap();
        assert_eq!(x.as_slice(), &[1.0, 2.0]);
        assert_eq!(r.as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn constant_iterates_give_zero_matrix() {
        let mut buf = HistoryBuffer::new(2);
        for _ in 0..3 {
            push_scalar(&mut buf, 5.0, -1.0);
        }
        let (x, r) = buf.difference_matrices().unwrap();
        assert!(x.iter().chain(r.iter()).all(|v| *v == 0.0));
    }

    #[test]
    fn lagged_y_indexing() {
        let mut buf = HistoryBuffer::new(4);
        // x_i = i, r_i = 10 i, so y_{i+1} = 11 i.
        for i in 0..5 {
            push_scalar(&mut buf, i as f64, 10.0 * i as f64);
        }
        // k = 4: y_{k+1} = 44 is the latest; lag j gives y_{k-j+1} = 11 (k - j).
        assert_eq!(buf.effective_depth(), 4);
        for j in 1..=4 {
            assert_eq!(buf.lagged_y(j).unwrap()[0], 11.0 * (4 - j) as f64);
        }
        assert!(matches!(buf.lagged_y(0), Err(Error::LagOutOfRange { .. })));
        assert!(matches!(
            buf.lagged_y(5),
            Err(Error::LagOutOfRange { lag: 5, depth: 4 })
        ));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let mut buf = HistoryBuffer::new(2);
        push_scalar(&mut buf, 0.0, 0.0);
        let err = buf
            .push(DVector::zeros(2), DVector::zeros(2), DVector::zeros(2))
            .unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 1, got: 2 }));
    }
}
