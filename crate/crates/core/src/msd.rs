//! Multi-scale derivative (MSD) filter.
//!
//! At bandwidth `h` the kernel is the derivative of a unit-mass Gaussian with
//! respect to `h`, `(d^2/h^3 - 2/h) * phi(d | h)`. Sources show up as strongly
//! negative responses; the multi-scale image keeps the per-pixel minimum over
//! a grid of bandwidths.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{FftConvolver, ImageGrid, KernelSpectrum};
use crate::scalar::Real;

/// Ascending list of positive bandwidths, in pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ScaleGrid(Vec<f64>);

impl ScaleGrid {
    pub fn new(scales: Vec<f64>) -> Result<Self> {
        if scales.is_empty() {
            return Err(Error::param("scale grid is empty"));
        }
        if scales.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
            return Err(Error::param(format!("scales must be positive and finite: {scales:?}")));
        }
        if scales.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param(format!("scales must be strictly ascending: {scales:?}")));
        }
        Ok(Self(scales))
    }

    pub fn scales(&self) -> &[f64] {
        &self.0
    }

    pub fn max_radius(&self) -> usize {
        self.0.iter().map(|&h| default_radius(h)).max().unwrap_or(0)
    }
}

impl Default for ScaleGrid {
    fn default() -> Self {
        Self(vec![1.0, 2.0, 4.0, 8.0])
    }
}

impl TryFrom<Vec<f64>> for ScaleGrid {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ScaleGrid> for Vec<f64> {
    fn from(g: ScaleGrid) -> Self {
        g.0
    }
}

#[inline]
fn default_radius(h: f64) -> usize {
    (4.0 * h).ceil() as usize
}

/// Sampled bandwidth-derivative kernel with its DC component removed.
#[derive(Debug, Clone, PartialEq)]
pub struct MsdKernel<T> {
    pub h: f64,
    pub radius: usize,
    /// `(2r+1)x(2r+1)` row-major weights, offset `(u, v)` at `(u+r, v+r)`.
    pub weights: Vec<T>,
}

impl<T: Real> MsdKernel<T> {
    /// Builds the kernel; `radius` defaults to `ceil(4h)`.
    pub fn new(h: f64, radius: Option<usize>) -> Result<Self> {
        let radius = radius.unwrap_or_else(|| default_radius(h));
        let mut raw = Self::sample_raw(h, radius)?;
        let shift = raw.iter().sum::<f64>() / raw.len() as f64;
        for w in raw.iter_mut() {
            *w -= shift;
        }
        Ok(Self { h, radius, weights: raw.into_iter().map(T::of).collect() })
    }

    /// Samples `(d^2/h^3 - 2/h) phi(d | h)` without any correction.
    pub fn sample_raw(h: f64, radius: usize) -> Result<Vec<f64>> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::param(format!("bandwidth must be positive, got {h}")));
        }
        let r = radius as i64;
        let norm = 1.0 / (2.0 * PI * h * h);
        let mut w = Vec::with_capacity((2 * radius + 1).pow(2));
        for u in -r..=r {
            for v in -r..=r {
                let d2 = (u * u + v * v) as f64;
                let phi = norm * (-d2 / (2.0 * h * h)).exp();
                w.push((d2 / (h * h * h) - 2.0 / h) * phi);
            }
        }
        Ok(w)
    }

    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }

    pub fn weight(&self, u: isize, v: isize) -> T {
        let r = self.radius as isize;
        self.weights[((u + r) * self.side() as isize + v + r) as usize]
    }

    pub fn peak_magnitude(&self) -> T {
        self.weights.iter().fold(T::zero(), |m, w| m.max(w.abs()))
    }
}

/// Shorthand for [`MsdKernel::new`].
pub fn msd_kernel<T: Real>(h: f64, radius: Option<usize>) -> Result<MsdKernel<T>> {
    MsdKernel::new(h, radius)
}

/// MSD filter bank prepared for one image size: FFT plans plus one kernel
/// spectrum per scale. Reuse it when filtering many same-sized images.
pub struct MsdFilter<T: Real> {
    scales: ScaleGrid,
    conv: FftConvolver<T>,
    kernels: Vec<KernelSpectrum<T>>,
}

impl<T: Real> MsdFilter<T> {
    pub fn new(rows: usize, cols: usize, scales: &ScaleGrid) -> Result<Self> {
        let conv = FftConvolver::new(rows, cols, scales.max_radius());
        let kernels = scales
            .scales()
            .iter()
            .map(|&h| {
                let k = MsdKernel::<T>::new(h, None)?;
                conv.kernel_spectrum(&k.weights, k.radius)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { scales: scales.clone(), conv, kernels })
    }

    pub fn scales(&self) -> &ScaleGrid {
        &self.scales
    }

    /// One response image per scale, in scale order.
    pub fn responses(&self, img: &ImageGrid<T>) -> Result<Vec<ImageGrid<T>>> {
        let spec = self.conv.image_spectrum(img)?;
        Ok(self.kernels.iter().map(|k| self.conv.apply(&spec, k)).collect())
    }

    /// Per-pixel minimum over scales.
    pub fn min_image(&self, img: &ImageGrid<T>) -> Result<ImageGrid<T>> {
        let spec = self.conv.image_spectrum(img)?;
        let mut acc: Option<Vec<T>> = None;
        for k in &self.kernels {
            let resp = self.conv.apply(&spec, k);
            match acc.as_mut() {
                None => acc = Some(resp.into_values()),
                Some(a) => {
                    for (m, v) in a.iter_mut().zip(resp.values()) {
                        *m = m.min(*v);
                    }
                }
            }
        }
        let (rows, cols) = img.dims();
        Ok(ImageGrid::from_vec_unchecked(rows, cols, acc.expect("scale grid is nonempty")))
    }
}

/// Convolution of `img` with the MSD kernel at bandwidth `h` (reflect padding).
pub fn msd_response<T: Real>(img: &ImageGrid<T>, h: f64) -> Result<ImageGrid<T>> {
    let scales = ScaleGrid::new(vec![h])?;
    let filter = MsdFilter::new(img.rows(), img.cols(), &scales)?;
    Ok(filter.responses(img)?.remove(0))
}

/// Multi-scale derivative image `M`: the minimum response over `scales`.
pub fn msd_image<T: Real>(img: &ImageGrid<T>, scales: &ScaleGrid) -> Result<ImageGrid<T>> {
    MsdFilter::new(img.rows(), img.cols(), scales)?.min_image(img)
}

/// `D = -M`, so sources become large positive values.
pub fn detection_statistic<T: Real>(m: &ImageGrid<T>) -> ImageGrid<T> {
    m.map(|v| -v)
}
