use serde::{Deserialize, Serialize};

use super::MaxDistributionTable;
use crate::error::{Error, Result};
use crate::image::{ImageGrid, Mask};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SupersetMethod {
    /// Greedy removal of the brightest pixels against per-area p-values.
    Alg1,
    /// Complement of the level set at the `1 - alpha` quantile of the maxima.
    Alg2,
}

impl std::str::FromStr for SupersetMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alg1" => Ok(Self::Alg1),
            "alg2" => Ok(Self::Alg2),
            other => Err(Error::Config(format!("unknown superset algorithm `{other}` (expected alg1 or alg2)"))),
        }
    }
}

/// A `1 - alpha` confidence superset for the background pixels: `true`
/// marks a pixel that may be background.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceSuperset {
    pub mask: Mask,
    pub alpha: f64,
    pub method: SupersetMethod,
}

impl ConfidenceSuperset {
    pub fn dims(&self) -> (usize, usize) {
        self.mask.dims()
    }
}

/// `U = { pixels with value <= r }`.
pub fn superset_alg2<T: Real>(img: &ImageGrid<T>, r: T, alpha: f64) -> ConfidenceSuperset {
    let bits = img.values().iter().map(|&v| v <= r).collect();
    ConfidenceSuperset {
        mask: Mask::new(img.rows(), img.cols(), bits).expect("same dims"),
        alpha,
        method: SupersetMethod::Alg2,
    }
}

/// Removes pixels brightest-first (row-major order among equal values) until
/// the maximum of what is left has empirical p-value `> alpha` at the
/// remaining area. The remaining pixels form `U`.
pub fn superset_alg1<T: Real>(
    img: &ImageGrid<T>,
    table: &MaxDistributionTable<T>,
    alpha: f64,
) -> Result<ConfidenceSuperset> {
    if table.dims() != img.dims() {
        return Err(Error::structural(format!("table simulated for {:?} but image is {:?}", table.dims(), img.dims())));
    }
    let vals = img.values();
    let n = vals.len();
    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps row-major order among ties.
    order.sort_by(|&a, &b| vals[b].partial_cmp(&vals[a]).expect("finite pixels"));

    let mut removed = 0;
    loop {
        let area = n - removed;
        if area < table.min_area() || area == 0 {
            return Err(Error::Capacity(format!(
                "p-value still <= {alpha} after removing {removed} pixels; rebuild the table with a larger `a` (currently {})",
                n - table.min_area()
            )));
        }
        let p = table.pvalue(vals[order[removed]], area)?;
        if p > alpha {
            break;
        }
        removed += 1;
    }
    let mut bits = vec![true; n];
    for &i in &order[..removed] {
        bits[i] = false;
    }
    Ok(ConfidenceSuperset { mask: Mask::new(img.rows(), img.cols(), bits)?, alpha, method: SupersetMethod::Alg1 })
}
