use std::io::Write;

use serde::{Deserialize, Serialize};

use super::RunConfig;
use crate::cluster::FcpResult;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub id: usize,
    pub row: f64,
    pub col: f64,
    pub area: usize,
    pub peak: f64,
    pub bbox_rmin: usize,
    pub bbox_rmax: usize,
    pub bbox_cmin: usize,
    pub bbox_cmax: usize,
}

/// Everything needed to rerun a detection, plus what it produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub method: String,
    #[serde(with = "crate::serde_float")]
    pub t_c: f64,
    pub alpha: f64,
    pub c: f64,
    pub epsilon: f64,
    pub seed: u64,
    #[serde(rename = "B")]
    pub replicates: usize,
    pub lambda0: f64,
    /// Null quantile used for the superset (superset alg2 only).
    pub superset_threshold: Option<f64>,
    pub superset_size: usize,
    pub detections: usize,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub config: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    /// Sorted by descending peak statistic.
    pub entries: Vec<CatalogEntry>,
    pub metadata: RunMetadata,
}

impl Catalog {
    pub(crate) fn from_result(result: &FcpResult<f64>, metadata: RunMetadata) -> Self {
        let mut entries: Vec<CatalogEntry> = result
            .clusters
            .clusters
            .iter()
            .map(|c| CatalogEntry {
                id: c.id,
                row: c.centroid.0,
                col: c.centroid.1,
                area: c.area,
                peak: c.peak,
                bbox_rmin: c.bbox.row_min,
                bbox_rmax: c.bbox.row_max,
                bbox_cmin: c.bbox.col_min,
                bbox_cmax: c.bbox.col_max,
            })
            .collect();
        entries.sort_by(|a, b| b.peak.total_cmp(&a.peak).then(a.id.cmp(&b.id)));
        Self { entries, metadata }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// CSV with columns `id,row,col,area,peak,bbox_rmin,bbox_rmax,bbox_cmin,bbox_cmax`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        if self.entries.is_empty() {
            w.write_record(["id", "row", "col", "area", "peak", "bbox_rmin", "bbox_rmax", "bbox_cmin", "bbox_cmax"])?;
        }
        for e in &self.entries {
            w.serialize(e)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}
