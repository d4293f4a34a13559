use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::NoiseModel;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Simulated null maxima, one sorted list of `B` values per retained area.
///
/// `areas` runs `N, N-1, ..., N-a`. Within a replicate pixels are removed
/// cumulatively, so every replicate's maximum is non-increasing down the
/// list of areas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxDistributionTable<T> {
    #[serde(rename = "B")]
    pub(crate) replicates: usize,
    pub(crate) rows: usize,
    pub(crate) cols: usize,
    pub(crate) areas: Vec<usize>,
    /// `maxima[i]` holds the sorted maxima for `areas[i]`.
    #[serde(rename = "maxima-by-area")]
    pub(crate) maxima: Vec<Vec<T>>,
    /// Model the table was simulated from, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub(crate) model: Option<NoiseModel>,
}

impl<T: Real> MaxDistributionTable<T> {
    /// Assembles a table from per-area maxima (any order; they are sorted
    /// here) and checks the structural invariants.
    pub fn new(
        rows: usize,
        cols: usize,
        areas: Vec<usize>,
        mut maxima: Vec<Vec<T>>,
        model: Option<NoiseModel>,
    ) -> Result<Self> {
        for m in maxima.iter_mut() {
            m.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite maxima"));
        }
        let table = Self { replicates: maxima.first().map_or(0, Vec::len), rows, cols, areas, maxima, model };
        table.check()?;
        Ok(table)
    }

    fn check(&self) -> Result<()> {
        let n = self.rows * self.cols;
        if self.replicates == 0 {
            return Err(Error::structural("max-distribution table has no replicates"));
        }
        if self.areas.is_empty() || self.areas.len() != self.maxima.len() {
            return Err(Error::structural("areas and maxima lists differ in length"));
        }
        for (i, &a) in self.areas.iter().enumerate() {
            if a != n - i {
                return Err(Error::structural(format!("area list must run {n}, {}, ...; entry {i} is {a}", n - 1)));
            }
        }
        for (a, m) in self.areas.iter().zip(&self.maxima) {
            if m.len() != self.replicates {
                return Err(Error::structural(format!(
                    "area {a} holds {} maxima, expected B = {}",
                    m.len(),
                    self.replicates
                )));
            }
            if m.iter().any(|v| !v.is_finite()) || m.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::structural(format!("maxima for area {a} are not sorted finite values")));
            }
        }
        Ok(())
    }

    pub fn replicates(&self) -> usize {
        self.replicates
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn areas(&self) -> &[usize] {
        &self.areas
    }

    pub fn model(&self) -> Option<&NoiseModel> {
        self.model.as_ref()
    }

    /// Smallest area covered.
    pub fn min_area(&self) -> usize {
        *self.areas.last().expect("nonempty")
    }

    pub fn maxima_at(&self, area: usize) -> Result<&[T]> {
        let n = self.rows * self.cols;
        if area > n || area < self.min_area() {
            return Err(Error::Lookup(format!("area {area} not in table (covers {}..={n})", self.min_area())));
        }
        Ok(&self.maxima[n - area])
    }

    /// `#{maxima >= x} / B` at `area`.
    pub fn pvalue(&self, x: T, area: usize) -> Result<f64> {
        Ok(empirical_pvalue(self.maxima_at(area)?, x))
    }

    /// Applies a strictly increasing map to every maximum. Maxima commute
    /// with such maps, so this is the table of the transformed field.
    pub fn map_increasing(&self, f: impl Fn(T) -> T, model: Option<NoiseModel>) -> Result<Self> {
        let maxima = self.maxima.iter().map(|m| m.iter().map(|&v| f(v)).collect()).collect();
        Self::new(self.rows, self.cols, self.areas.clone(), maxima, model)
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let table: Self = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            location: format!("line {}, column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        table.check()?;
        Ok(table)
    }
}

/// Fraction of `sorted` maxima that are `>= x`, by binary search.
///
/// This is the plain `#/B` estimate, without the `(1 + #)/(1 + B)` correction.
pub fn empirical_pvalue<T: Real>(sorted: &[T], x: T) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let below = sorted.partition_point(|&v| v < x);
    (sorted.len() - below) as f64 / sorted.len() as f64
}

/// The `ceil((1 - alpha) B)`-th smallest of `B` sorted maxima (1-based).
pub fn max_percentile<T: Real>(sorted: &[T], alpha: f64) -> Result<T> {
    if sorted.is_empty() {
        return Err(Error::param("cannot take a percentile of an empty list"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let b = sorted.len();
    let k = (((1.0 - alpha) * b as f64).ceil() as usize).clamp(1, b);
    Ok(sorted[k - 1])
}
