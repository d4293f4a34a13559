//! Level sets, connected components and the false-cluster-proportion search.

mod envelope;
mod threshold;
mod union_find;

use serde::{Deserialize, Serialize};

use crate::image::{ImageGrid, Mask, PixelCoord};
use crate::scalar::Real;

pub use envelope::{envelope, is_false_cluster, overlap_count, true_fcp};
pub use threshold::{envelope_at, find_threshold, EnvelopePoint, FcpResult, SelectionRule, ThresholdOptions};
pub use union_find::UnionFind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

impl Connectivity {
    /// Neighbor offsets that precede a pixel in row-major order.
    pub(crate) fn backward_offsets(self) -> &'static [(isize, isize)] {
        match self {
            Connectivity::Four => &[(-1, 0), (0, -1)],
            Connectivity::Eight => &[(-1, -1), (-1, 0), (-1, 1), (0, -1)],
        }
    }

    pub(crate) fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            Connectivity::Four => &[(-1, 0), (0, -1), (0, 1), (1, 0)],
            Connectivity::Eight => &[(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)],
        }
    }
}

impl std::str::FromStr for Connectivity {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "four" | "4" => Ok(Connectivity::Four),
            "eight" | "8" => Ok(Connectivity::Eight),
            other => Err(crate::Error::Config(format!("unknown connectivity `{other}`"))),
        }
    }
}

/// Strict level set `{ value > t }`.
pub fn level_set<T: Real>(img: &ImageGrid<T>, t: T) -> Mask {
    Mask::new(img.rows(), img.cols(), img.values().iter().map(|&v| v > t).collect()).expect("same dims")
}

/// Union-find labeling of a mask. Components are ordered by their first
/// pixel in row-major order and list their pixels in row-major order.
pub fn connected_components(mask: &Mask, connectivity: Connectivity) -> Vec<Vec<PixelCoord>> {
    let (rows, cols) = mask.dims();
    let mut uf = UnionFind::new(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            if !mask.get(r, c) {
                continue;
            }
            for &(dr, dc) in connectivity.backward_offsets() {
                let (nr, nc) = (r as isize + dr, c as isize + dc);
                if nr < 0 || nc < 0 || nc >= cols as isize {
                    continue;
                }
                let (nr, nc) = (nr as usize, nc as usize);
                if mask.get(nr, nc) {
                    uf.union(r * cols + c, nr * cols + nc);
                }
            }
        }
    }
    let mut label_of_root = vec![usize::MAX; rows * cols];
    let mut comps: Vec<Vec<PixelCoord>> = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if !mask.get(r, c) {
                continue;
            }
            let root = uf.find(r * cols + c);
            if label_of_root[root] == usize::MAX {
                label_of_root[root] = comps.len();
                comps.push(Vec::new());
            }
            comps[label_of_root[root]].push(PixelCoord::new(r, c));
        }
    }
    comps
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub row_min: usize,
    pub row_max: usize,
    pub col_min: usize,
    pub col_max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster<T> {
    pub id: usize,
    pub pixels: Vec<PixelCoord>,
    pub area: usize,
    /// Unweighted mean (row, col) of the member pixels.
    pub centroid: (f64, f64),
    pub peak: T,
    pub bbox: BoundingBox,
}

impl<T: Real> Cluster<T> {
    pub(crate) fn from_pixels(id: usize, pixels: Vec<PixelCoord>, img: &ImageGrid<T>) -> Self {
        let area = pixels.len();
        let (mut sr, mut sc) = (0.0, 0.0);
        let mut peak = T::neg_infinity();
        let mut bbox = BoundingBox { row_min: usize::MAX, row_max: 0, col_min: usize::MAX, col_max: 0 };
        for p in &pixels {
            sr += p.row as f64;
            sc += p.col as f64;
            peak = peak.max(img.at(*p));
            bbox.row_min = bbox.row_min.min(p.row);
            bbox.row_max = bbox.row_max.max(p.row);
            bbox.col_min = bbox.col_min.min(p.col);
            bbox.col_max = bbox.col_max.max(p.col);
        }
        Self { id, pixels, area, centroid: (sr / area as f64, sc / area as f64), peak, bbox }
    }
}

/// Connected components of the level set at `threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ClusterSet<T: Real> {
    #[serde(with = "crate::serde_float")]
    pub threshold: T,
    pub connectivity: Connectivity,
    pub rows: usize,
    pub cols: usize,
    pub clusters: Vec<Cluster<T>>,
}

impl<T: Real> ClusterSet<T> {
    pub fn empty(rows: usize, cols: usize, threshold: T, connectivity: Connectivity) -> Self {
        Self { threshold, connectivity, rows, cols, clusters: Vec::new() }
    }

    /// Clusters the strict level set of `img` at `t`, dropping clusters
    /// smaller than `min_area` pixels. Ids follow row-major first-pixel order.
    pub fn from_level_set(img: &ImageGrid<T>, t: T, connectivity: Connectivity, min_area: usize) -> Self {
        let comps = connected_components(&level_set(img, t), connectivity);
        let clusters = comps
            .into_iter()
            .filter(|c| c.len() >= min_area.max(1))
            .enumerate()
            .map(|(id, px)| Cluster::from_pixels(id, px, img))
            .collect();
        Self { threshold: t, connectivity, rows: img.rows(), cols: img.cols(), clusters }
    }

    /// Number of clusters, `k_t`.
    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    /// Union of all clusters as a mask.
    pub fn to_mask(&self) -> Mask {
        let mut m = Mask::filled(self.rows, self.cols, false);
        for c in &self.clusters {
            for p in &c.pixels {
                m.set(p.row, p.col, true);
            }
        }
        m
    }
}
