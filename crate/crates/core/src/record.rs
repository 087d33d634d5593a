//! Binary spike matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary spike matrix of `rows` signals over `horizon` steps.
///
/// Column `t` holds the spikes of step `t + 1`; step numbering in the model
/// starts at 1 while storage is zero-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpikeRecord {
    rows: usize,
    horizon: usize,
    bits: Vec<bool>,
}

impl SpikeRecord {
    pub fn zeros(rows: usize, horizon: usize) -> Self {
        Self {
            rows,
            horizon,
            bits: vec![false; rows * horizon],
        }
    }

    pub fn from_rows(rows: &[Vec<bool>]) -> Result<Self> {
        let horizon = rows.first().map_or(0, Vec::len);
        let mut record = Self::zeros(rows.len(), horizon);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != horizon {
                return Err(Error::DimensionMismatch {
                    what: "spike record row length",
                    expected: horizon,
                    got: row.len(),
                });
            }
            record.bits[i * horizon..(i + 1) * horizon].copy_from_slice(row);
        }
        Ok(record)
    }

    /// Builds a record from `0`/`1` rows; any nonzero entry counts as a spike.
    pub fn from_u8_rows(rows: &[&[u8]]) -> Result<Self> {
        let rows: Vec<Vec<bool>> = rows
            .iter()
            .map(|r| r.iter().map(|&b| b != 0).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    #[inline]
    pub fn get(&self, row: usize, t: usize) -> bool {
        self.bits[row * self.horizon + t]
    }

    #[inline]
    pub fn set(&mut self, row: usize, t: usize, spike: bool) {
        self.bits[row * self.horizon + t] = spike;
    }

    pub fn row(&self, row: usize) -> &[bool] {
        &self.bits[row * self.horizon..(row + 1) * self.horizon]
    }

    /// Spikes of every row at column `t`.
    pub fn column(&self, t: usize) -> Vec<bool> {
        (0..self.rows).map(|r| self.get(r, t)).collect()
    }

    pub fn count_row(&self, row: usize) -> usize {
        self.row(row).iter().filter(|&&b| b).count()
    }

    pub fn total_spikes(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// New record made of the given rows, in order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut out = Self::zeros(rows.len(), self.horizon);
        for (k, &r) in rows.iter().enumerate() {
            out.bits[k * self.horizon..(k + 1) * self.horizon].copy_from_slice(self.row(r));
        }
        out
    }

    /// Re-bins time by OR-ing consecutive windows of `factor` steps.
    pub fn coarsen(&self, factor: usize) -> Self {
        assert!(factor > 0, "coarsening factor must be positive");
        let horizon = self.horizon.div_ceil(factor);
        let mut out = Self::zeros(self.rows, horizon);
        for r in 0..self.rows {
            for t in 0..self.horizon {
                if self.get(r, t) {
                    out.set(r, t / factor, true);
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_and_columns() {
        let rec = SpikeRecord::from_u8_rows(&[&[1, 0, 1], &[0, 0, 1]]).unwrap();
        assert_eq!(rec.rows(), 2);
        assert_eq!(rec.horizon(), 3);
        assert_eq!(rec.column(2), vec![true, true]);
        assert_eq!(rec.count_row(0), 2);
        assert_eq!(rec.total_spikes(), 3);
        assert_eq!(rec.select_rows(&[1]).row(0), &[false, false, true]);
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(SpikeRecord::from_u8_rows(&[&[1, 0], &[1]]).is_err());
    }

    #[test]
    fn coarsen_ors_windows() {
        let rec = SpikeRecord::from_u8_rows(&[&[0, 1, 0, 0, 0, 1, 1]]).unwrap();
        let c = rec.coarsen(3);
        assert_eq!(c.horizon(), 3);
        assert_eq!(c.row(0), &[true, true, true]);
        let c = rec.coarsen(5);
        assert_eq!(c.row(0), &[true, true]);
    }
}
