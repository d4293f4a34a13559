//! Reflect-padded 2-D convolution: direct, separable and FFT-based routes.
//!
//! Padding is half-sample symmetric (`d c b a | a b c d | d c b a`), extended
//! periodically so kernels wider than the grid still index inside it. With a
//! symmetric kernel this boundary rule keeps the global sum of the image.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::ImageGrid;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Maps an out-of-range index onto `0..n` by half-sample symmetric reflection.
#[inline]
pub fn reflect_index(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period) as usize;
    if m < n {
        m
    } else {
        2 * n - 1 - m
    }
}

fn check_square_kernel(len: usize, radius: usize) -> Result<usize> {
    let side = 2 * radius + 1;
    if len != side * side {
        return Err(Error::param(format!("kernel of radius {radius} needs {} weights, got {len}", side * side)));
    }
    Ok(side)
}

/// Direct nested-loop convolution with a `(2r+1)x(2r+1)` row-major kernel.
pub fn convolve_direct<T: Real>(img: &ImageGrid<T>, weights: &[T], radius: usize) -> Result<ImageGrid<T>> {
    let side = check_square_kernel(weights.len(), radius)?;
    let (rows, cols) = img.dims();
    let r = radius as isize;
    let row_idx: Vec<Vec<usize>> =
        (0..rows).map(|i| (-r..=r).map(|u| reflect_index(i as isize - u, rows)).collect()).collect();
    let col_idx: Vec<Vec<usize>> =
        (0..cols).map(|j| (-r..=r).map(|v| reflect_index(j as isize - v, cols)).collect()).collect();
    let src = img.values();
    let mut out = Vec::with_capacity(rows * cols);
    for ri in &row_idx {
        for ci in &col_idx {
            let mut acc = T::zero();
            for (ku, &sr) in ri.iter().enumerate() {
                let krow = &weights[ku * side..(ku + 1) * side];
                let srow = &src[sr * cols..(sr + 1) * cols];
                for (w, &sc) in krow.iter().zip(ci) {
                    acc = acc + *w * srow[sc];
                }
            }
            out.push(acc);
        }
    }
    Ok(ImageGrid::from_vec_unchecked(rows, cols, out))
}

fn convolve_1d_rows<T: Real>(src: &[T], rows: usize, cols: usize, kernel: &[T]) -> Vec<T> {
    let r = (kernel.len() / 2) as isize;
    let idx: Vec<Vec<usize>> =
        (0..cols).map(|j| (-r..=r).map(|v| reflect_index(j as isize - v, cols)).collect()).collect();
    let mut out = Vec::with_capacity(rows * cols);
    for row in src.chunks_exact(cols).take(rows) {
        for ci in &idx {
            let acc = kernel.iter().zip(ci).fold(T::zero(), |acc, (w, &c)| acc + *w * row[c]);
            out.push(acc);
        }
    }
    out
}

fn transpose<T: Copy>(src: &[T], rows: usize, cols: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(src.len());
    for c in 0..cols {
        for r in 0..rows {
            out.push(src[r * cols + c]);
        }
    }
    out
}

/// Convolves rows with `horizontal` then columns with `vertical`; both must
/// have odd length. Equivalent to the 2-D kernel `vertical[u] * horizontal[v]`.
pub fn convolve_separable<T: Real>(img: &ImageGrid<T>, horizontal: &[T], vertical: &[T]) -> Result<ImageGrid<T>> {
    if horizontal.len().is_multiple_of(2) || vertical.len().is_multiple_of(2) {
        return Err(Error::param("separable kernels must have odd length"));
    }
    let (rows, cols) = img.dims();
    let pass1 = convolve_1d_rows(img.values(), rows, cols, horizontal);
    let t = transpose(&pass1, rows, cols);
    let pass2 = convolve_1d_rows(&t, cols, rows, vertical);
    Ok(ImageGrid::from_vec_unchecked(rows, cols, transpose(&pass2, cols, rows)))
}

/// Frequency-domain kernel prepared for one [`FftConvolver`].
#[derive(Clone)]
pub struct KernelSpectrum<T> {
    spectrum: Vec<Complex<T>>,
}

/// Reusable FFT convolution for a fixed image size and maximum kernel radius.
///
/// The image is reflect-padded by `pad` on every side; circular convolution
/// on the padded grid is then exact for every kernel with radius `<= pad`
/// across the cropped interior, so it agrees with [`convolve_direct`].
pub struct FftConvolver<T: Real> {
    rows: usize,
    cols: usize,
    pad: usize,
    prows: usize,
    pcols: usize,
    fwd_row: Arc<dyn Fft<T>>,
    fwd_col: Arc<dyn Fft<T>>,
    inv_row: Arc<dyn Fft<T>>,
    inv_col: Arc<dyn Fft<T>>,
}

impl<T: Real> FftConvolver<T> {
    pub fn new(rows: usize, cols: usize, pad: usize) -> Self {
        let prows = rows + 2 * pad;
        let pcols = cols + 2 * pad;
        let mut planner = FftPlanner::new();
        Self {
            rows,
            cols,
            pad,
            prows,
            pcols,
            fwd_row: planner.plan_fft_forward(pcols),
            fwd_col: planner.plan_fft_forward(prows),
            inv_row: planner.plan_fft_inverse(pcols),
            inv_col: planner.plan_fft_inverse(prows),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn pad(&self) -> usize {
        self.pad
    }

    // Output is column-major (transposed) to skip one transpose per call.
    fn forward(&self, mut buf: Vec<Complex<T>>) -> Vec<Complex<T>> {
        self.fwd_row.process(&mut buf);
        let mut t = transpose(&buf, self.prows, self.pcols);
        self.fwd_col.process(&mut t);
        t
    }

    pub fn kernel_spectrum(&self, weights: &[T], radius: usize) -> Result<KernelSpectrum<T>> {
        let side = check_square_kernel(weights.len(), radius)?;
        if radius > self.pad {
            return Err(Error::param(format!("kernel radius {radius} exceeds convolver padding {}", self.pad)));
        }
        let mut buf = vec![Complex::new(T::zero(), T::zero()); self.prows * self.pcols];
        let r = radius as isize;
        for u in -r..=r {
            let pr = u.rem_euclid(self.prows as isize) as usize;
            for v in -r..=r {
                let pc = v.rem_euclid(self.pcols as isize) as usize;
                let w = weights[(u + r) as usize * side + (v + r) as usize];
                buf[pr * self.pcols + pc].re = w;
            }
        }
        Ok(KernelSpectrum { spectrum: self.forward(buf) })
    }

    /// Reflect-pads and transforms an image, for reuse across several kernels.
    pub fn image_spectrum(&self, img: &ImageGrid<T>) -> Result<Vec<Complex<T>>> {
        img.check_same_dims((self.rows, self.cols))?;
        let p = self.pad as isize;
        let row_src: Vec<usize> = (0..self.prows as isize).map(|i| reflect_index(i - p, self.rows)).collect();
        let col_src: Vec<usize> = (0..self.pcols as isize).map(|j| reflect_index(j - p, self.cols)).collect();
        let mut buf = Vec::with_capacity(self.prows * self.pcols);
        for &sr in &row_src {
            for &sc in &col_src {
                buf.push(Complex::new(img.get(sr, sc), T::zero()));
            }
        }
        Ok(self.forward(buf))
    }

    pub fn apply(&self, image_spectrum: &[Complex<T>], kernel: &KernelSpectrum<T>) -> ImageGrid<T> {
        let mut prod: Vec<Complex<T>> = image_spectrum.iter().zip(&kernel.spectrum).map(|(a, b)| a * b).collect();
        self.inv_col.process(&mut prod);
        let mut buf = transpose(&prod, self.pcols, self.prows);
        self.inv_row.process(&mut buf);
        let scale = T::one() / T::from_usize(self.prows * self.pcols).expect("grid size fits scalar");
        let mut out = Vec::with_capacity(self.rows * self.cols);
        for r in 0..self.rows {
            let base = (r + self.pad) * self.pcols + self.pad;
            out.extend(buf[base..base + self.cols].iter().map(|c| c.re * scale));
        }
        ImageGrid::from_vec_unchecked(self.rows, self.cols, out)
    }

    pub fn convolve(&self, img: &ImageGrid<T>, kernel: &KernelSpectrum<T>) -> Result<ImageGrid<T>> {
        Ok(self.apply(&self.image_spectrum(img)?, kernel))
    }
}
