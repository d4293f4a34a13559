//! Pixel grids, masks, image I/O and the per-pixel transforms applied before
//! detection.

mod convolve;
mod io;
mod mask;
mod transform;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub use convolve::{convolve_direct, convolve_separable, reflect_index, FftConvolver, KernelSpectrum};
pub use io::{load_image, load_raw_f64_le, save_image, ImageFormat, RawHeader};
pub use mask::Mask;
pub use transform::{estimate_background, gaussian_kernel_1d, gaussian_smooth, sqrt_transform, z_score};

/// 0-based (row, col) index into a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PixelCoord {
    pub row: usize,
    pub col: usize,
}

impl PixelCoord {
    pub fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

/// Row-major grid of finite real values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageGrid<T> {
    rows: usize,
    cols: usize,
    values: Vec<T>,
}

impl<T: Real> ImageGrid<T> {
    /// Builds a grid, checking the dimensions and that every value is finite.
    pub fn new(rows: usize, cols: usize, values: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::structural(format!("grid dimensions must be positive, got {rows}x{cols}")));
        }
        if values.len() != rows * cols {
            return Err(Error::structural(format!(
                "{rows}x{cols} grid needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::structural(format!("non-finite value {} at ({}, {})", values[i], i / cols, i % cols)));
        }
        Ok(Self { rows, cols, values })
    }

    /// Internal constructor for values already known to satisfy the invariants.
    pub(crate) fn from_vec_unchecked(rows: usize, cols: usize, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), rows * cols);
        Self { rows, cols, values }
    }

    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        assert!(rows > 0 && cols > 0, "grid dimensions must be positive");
        Self::from_vec_unchecked(rows, cols, vec![value; rows * cols])
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, T::zero())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        assert!(rows > 0 && cols > 0, "grid dimensions must be positive");
        let mut values = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                values.push(f(r, c));
            }
        }
        Self::from_vec_unchecked(rows, cols, values)
    }

    /// Builds a grid from nested rows. Panics on ragged input; meant for tests
    /// and small literals.
    pub fn from_rows(rows: &[&[T]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        let values = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::new(rows.len(), cols, values).expect("valid literal grid")
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
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.values[row * self.cols + col]
    }

    #[inline]
    pub fn at(&self, p: PixelCoord) -> T {
        self.get(p.row, p.col)
    }

    /// Applies `f` to every pixel. The caller is responsible for keeping the
    /// output finite.
    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::from_vec_unchecked(self.rows, self.cols, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.check_same_dims(other.dims())?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self::from_vec_unchecked(self.rows, self.cols, values))
    }

    pub fn check_same_dims(&self, dims: (usize, usize)) -> Result<()> {
        if self.dims() != dims {
            return Err(Error::structural(format!(
                "dimension mismatch: {}x{} vs {}x{}",
                self.rows, self.cols, dims.0, dims.1
            )));
        }
        Ok(())
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn min(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().map(|v| v.to_f64_lossless()).sum::<f64>() / self.len() as f64
    }

    /// Position of the largest value; the first in row-major order on ties.
    pub fn argmax(&self) -> PixelCoord {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        PixelCoord::new(best / self.cols, best % self.cols)
    }

    /// Position of the smallest value; the first in row-major order on ties.
    pub fn argmin(&self) -> PixelCoord {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v < self.values[best] {
                best = i;
            }
        }
        PixelCoord::new(best / self.cols, best % self.cols)
    }

    pub fn cast<U: Real>(&self) -> ImageGrid<U> {
        ImageGrid::from_vec_unchecked(
            self.rows,
            self.cols,
            self.values.iter().map(|v| U::of(v.to_f64_lossless())).collect(),
        )
    }
}
