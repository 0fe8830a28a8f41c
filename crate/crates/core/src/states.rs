use crate::error::{Error, Result};

/// Binary differential-expression states, genes × time points.
/// 1 marks a differentially expressed (DE) cell, 0 an equally expressed one.
///
/// Storage is time-major so that a time point's column is a contiguous
/// slice; neighbor sums read columns.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StateMatrix {
    genes: usize,
    times: usize,
    bits: Vec<u8>,
}

impl StateMatrix {
    pub fn zeros(genes: usize, times: usize) -> Self {
        StateMatrix { genes, times, bits: vec![0; genes * times] }
    }

    /// Builds from gene rows (`rows[g][t]`).
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let genes = rows.len();
        let times = rows.first().map_or(0, Vec::len);
        let mut m = Self::zeros(genes, times);
        for (g, row) in rows.iter().enumerate() {
            if row.len() != times {
                return Err(Error::DimensionMismatch(format!(
                    "row {g} has {} time points, expected {times}",
                    row.len()
                )));
            }
            for (t, &b) in row.iter().enumerate() {
                if b > 1 {
                    return Err(Error::InvalidParameter(format!("state {b} is not a bit")));
                }
                m.set(g, t, b);
            }
        }
        Ok(m)
    }

    pub fn from_columns(columns: &[Vec<u8>]) -> Result<Self> {
        let times = columns.len();
        let genes = columns.first().map_or(0, Vec::len);
        let mut bits = Vec::with_capacity(genes * times);
        for c in columns {
            if c.len() != genes {
                return Err(Error::DimensionMismatch("ragged columns".into()));
            }
            bits.extend(c.iter().map(|&b| b.min(1)));
        }
        Ok(StateMatrix { genes, times, bits })
    }

    #[inline]
    pub fn genes(&self) -> usize {
        self.genes
    }

    #[inline]
    pub fn times(&self) -> usize {
        self.times
    }

    #[inline]
    pub fn get(&self, g: usize, t: usize) -> u8 {
        self.bits[t * self.genes + g]
    }

    #[inline]
    pub fn set(&mut self, g: usize, t: usize, b: u8) {
        self.bits[t * self.genes + g] = b;
    }

    #[inline]
    pub fn column(&self, t: usize) -> &[u8] {
        &self.bits[t * self.genes..(t + 1) * self.genes]
    }

    pub fn column_mut(&mut self, t: usize) -> &mut [u8] {
        &mut self.bits[t * self.genes..(t + 1) * self.genes]
    }

    pub fn row(&self, g: usize) -> Vec<u8> {
        (0..self.times).map(|t| self.get(g, t)).collect()
    }

    pub fn set_row(&mut self, g: usize, path: &[u8]) {
        for (t, &b) in path.iter().enumerate() {
            self.set(g, t, b);
        }
    }

    pub fn count_de(&self) -> usize {
        self.bits.iter().map(|&b| b as usize).sum()
    }

    pub fn count_de_at(&self, t: usize) -> usize {
        self.column(t).iter().map(|&b| b as usize).sum()
    }

    /// Number of cells that differ.
    pub fn hamming(&self, other: &StateMatrix) -> usize {
        self.bits.iter().zip(&other.bits).filter(|(a, b)| a != b).count()
    }
}
