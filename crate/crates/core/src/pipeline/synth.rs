use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{ImageGrid, Mask};
use crate::noise::{child_rng, rng_from_seed};

/// Gaussian bump `amplitude * exp(-d^2 / (2 width^2))` centred at `(row, col)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Source {
    pub row: f64,
    pub col: f64,
    pub amplitude: f64,
    pub width: f64,
}

/// Simulated count image with its ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSky {
    pub image: ImageGrid<f64>,
    /// `true` where the source intensity is positive.
    pub truth: Mask,
    pub sources: Vec<Source>,
    pub lambda0: f64,
}

/// Bumps are cut to zero where they fall below this fraction of their peak.
const BUMP_CUTOFF: f64 = 1e-3;

/// Source intensity field: the sum of the truncated bumps.
pub fn source_field(rows: usize, cols: usize, sources: &[Source]) -> Result<ImageGrid<f64>> {
    for (i, s) in sources.iter().enumerate() {
        if !(s.amplitude >= 0.0 && s.amplitude.is_finite()) {
            return Err(Error::param(format!("source {i}: amplitude must be >= 0, got {}", s.amplitude)));
        }
        if !(s.width > 0.0 && s.width.is_finite()) {
            return Err(Error::param(format!("source {i}: width must be positive, got {}", s.width)));
        }
    }
    Ok(ImageGrid::from_fn(rows, cols, |r, c| {
        sources
            .iter()
            .map(|s| {
                let d2 = (r as f64 - s.row).powi(2) + (c as f64 - s.col).powi(2);
                let v = s.amplitude * (-d2 / (2.0 * s.width * s.width)).exp();
                if v < BUMP_CUTOFF * s.amplitude {
                    0.0
                } else {
                    v
                }
            })
            .sum()
    }))
}

/// Draws `Y ~ Poisson(lambda1 + lambda0)` independently per pixel.
pub fn synth_sky(rows: usize, cols: usize, lambda0: f64, sources: &[Source], seed: u64) -> Result<SyntheticSky> {
    if rows == 0 || cols == 0 {
        return Err(Error::param("sky dimensions must be positive"));
    }
    if !(lambda0 >= 0.0 && lambda0.is_finite()) {
        return Err(Error::param(format!("lambda0 must be >= 0, got {lambda0}")));
    }
    let field = source_field(rows, cols, sources)?;
    let truth = Mask::new(rows, cols, field.values().iter().map(|&v| v > 0.0).collect())?;
    let mut rng = rng_from_seed(seed);
    let values = field
        .values()
        .iter()
        .map(|&l1| {
            let rate = l1 + lambda0;
            if rate > 0.0 {
                Poisson::new(rate).map(|d| d.sample(&mut rng)).map_err(|e| Error::param(e.to_string()))
            } else {
                Ok(0.0)
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(SyntheticSky { image: ImageGrid::new(rows, cols, values)?, truth, sources: sources.to_vec(), lambda0 })
}

/// `n` sources with uniform centres at least `margin` pixels from the edges
/// and amplitude / width drawn uniformly from the given ranges.
pub fn random_sources(
    rows: usize,
    cols: usize,
    n: usize,
    amplitude: (f64, f64),
    width: (f64, f64),
    margin: f64,
    seed: u64,
) -> Vec<Source> {
    let mut rng = child_rng(seed, 0x5_0BCE);
    let mut uniform = |lo: f64, hi: f64| if hi > lo { rng.random_range(lo..hi) } else { lo };
    (0..n)
        .map(|_| {
            let row = uniform(margin, rows as f64 - 1.0 - margin);
            let col = uniform(margin, cols as f64 - 1.0 - margin);
            let amplitude = uniform(amplitude.0, amplitude.1);
            let width = uniform(width.0, width.1);
            Source { row, col, amplitude, width }
        })
        .collect()
}
