use serde::{Deserialize, Serialize};

use super::PixelCoord;
use crate::error::{Error, Result};

/// Boolean grid marking a subset of pixels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mask {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(rows: usize, cols: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != rows * cols {
            return Err(Error::structural(format!(
                "{rows}x{cols} mask needs {} entries, got {}",
                rows * cols,
                bits.len()
            )));
        }
        Ok(Self { rows, cols, bits })
    }

    pub fn filled(rows: usize, cols: usize, value: bool) -> Self {
        Self { rows, cols, bits: vec![value; rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                bits.push(f(r, c));
            }
        }
        Self { rows, cols, bits }
    }

    /// Parses a literal such as `["#.", ".#"]` where `#` marks a set pixel.
    pub fn from_strs(rows: &[&str]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut bits = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged mask literal");
            bits.extend(r.bytes().map(|b| b == b'#'));
        }
        Self { rows: rows.len(), cols, bits }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    #[inline]
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.cols + col]
    }

    #[inline]
    pub fn at(&self, p: PixelCoord) -> bool {
        self.get(p.row, p.col)
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.bits[row * self.cols + col] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn complement(&self) -> Self {
        Self { rows: self.rows, cols: self.cols, bits: self.bits.iter().map(|b| !b).collect() }
    }

    /// True when every pixel set in `other` is also set in `self`.
    pub fn contains(&self, other: &Mask) -> bool {
        self.dims() == other.dims() && self.bits.iter().zip(&other.bits).all(|(&a, &b)| a || !b)
    }

    pub fn iter_set(&self) -> impl Iterator<Item = PixelCoord> + '_ {
        let cols = self.cols;
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(move |(i, _)| PixelCoord::new(i / cols, i % cols))
    }
}
