use super::{convolve_separable, ImageGrid};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Scale factor turning a median absolute deviation into a Gaussian sigma.
const MAD_TO_SIGMA: f64 = 1.4826;
const SIGMA_FLOOR: f64 = 1e-12;

/// Sampled 1-D Gaussian on `-ceil(4 sigma)..=ceil(4 sigma)`, normalized to sum 1.
pub fn gaussian_kernel_1d<T: Real>(sigma: f64) -> Result<Vec<T>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::param(format!("smoothing sigma must be positive, got {sigma}")));
    }
    let radius = (4.0 * sigma).ceil() as isize;
    let raw: Vec<f64> = (-radius..=radius).map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp()).collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| T::of(w / total)).collect())
}

/// Convolves with a truncated, normalized, sampled 2-D Gaussian of standard
/// deviation `sigma` pixels. The 2-D kernel is the outer product of
/// [`gaussian_kernel_1d`] with itself, applied separably.
pub fn gaussian_smooth<T: Real>(img: &ImageGrid<T>, sigma: f64) -> Result<ImageGrid<T>> {
    let k = gaussian_kernel_1d::<T>(sigma)?;
    convolve_separable(img, &k, &k)
}

pub fn sqrt_transform<T: Real>(img: &ImageGrid<T>) -> Result<ImageGrid<T>> {
    if let Some(i) = img.values().iter().position(|v| *v < T::zero()) {
        return Err(Error::Domain {
            row: i / img.cols(),
            col: i % img.cols(),
            value: img.values()[i].to_f64_lossless(),
        });
    }
    Ok(img.map(|v| v.sqrt()))
}

/// Elementwise `(y - mu0) / sigma0`.
pub fn z_score<T: Real>(img: &ImageGrid<T>, mu0: f64, sigma0: f64) -> Result<ImageGrid<T>> {
    if !(sigma0 > 0.0 && sigma0.is_finite()) || !mu0.is_finite() {
        return Err(Error::param(format!("z-score needs finite mu0 and sigma0 > 0, got ({mu0}, {sigma0})")));
    }
    let mu = T::of(mu0);
    let inv = T::of(1.0 / sigma0);
    Ok(img.map(|v| (v - mu) * inv))
}

fn median_in_place(v: &mut [f64]) -> f64 {
    let n = v.len();
    v.sort_unstable_by(f64::total_cmp);
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Robust background level and spread: median and 1.4826 x MAD, with the
/// spread floored at 1e-12.
pub fn estimate_background<T: Real>(img: &ImageGrid<T>) -> (f64, f64) {
    let mut v: Vec<f64> = img.values().iter().map(|x| x.to_f64_lossless()).collect();
    let mu = median_in_place(&mut v);
    for x in v.iter_mut() {
        *x = (*x - mu).abs();
    }
    let mad = median_in_place(&mut v);
    (mu, (MAD_TO_SIGMA * mad).max(SIGMA_FLOOR))
}
