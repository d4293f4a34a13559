use serde::{Deserialize, Serialize};

use crate::cluster::{connected_components, true_fcp, Connectivity, FcpResult};
use crate::error::Result;
use crate::image::Mask;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    /// True false cluster proportion at `t_c`; `None` with no detections.
    pub xi: Option<f64>,
    /// Share of true sources hit by a detection; `None` if there are none.
    pub completeness: Option<f64>,
    pub true_sources: usize,
    pub recovered_sources: usize,
    pub detections: usize,
    /// Per detected cluster: does it touch any source pixel.
    pub matched: Vec<bool>,
}

/// Scores a detection against a ground-truth source mask (`true` = source).
///
/// True sources are the eight-connected components of `truth`.
pub fn evaluate(result: &FcpResult<f64>, truth: &Mask, epsilon: f64) -> Result<EvaluationReport> {
    let clusters = &result.clusters;
    if (clusters.rows, clusters.cols) != truth.dims() {
        return Err(crate::Error::Structural(format!(
            "result is {}x{} but truth mask is {}x{}",
            clusters.rows,
            clusters.cols,
            truth.rows(),
            truth.cols()
        )));
    }
    let s0 = truth.complement();
    let xi = true_fcp(clusters, &s0, epsilon);
    let detected = clusters.to_mask();
    let sources = connected_components(truth, Connectivity::Eight);
    let recovered = sources.iter().filter(|s| s.iter().any(|p| detected.at(*p))).count();
    let matched = clusters.clusters.iter().map(|c| c.pixels.iter().any(|p| truth.at(*p))).collect();
    Ok(EvaluationReport {
        xi,
        completeness: (!sources.is_empty()).then(|| recovered as f64 / sources.len() as f64),
        true_sources: sources.len(),
        recovered_sources: recovered,
        detections: clusters.len(),
        matched,
    })
}
