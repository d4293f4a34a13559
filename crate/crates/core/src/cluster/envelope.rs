use super::{Cluster, ClusterSet};
use crate::image::Mask;
use crate::scalar::Real;

/// A cluster is false when at least a fraction `epsilon` of its pixels lie in
/// the reference set.
#[inline]
pub fn is_false_cluster(in_set: usize, area: usize, epsilon: f64) -> bool {
    in_set as f64 / area as f64 >= epsilon
}

pub fn overlap_count<T: Real>(cluster: &Cluster<T>, set: &Mask) -> usize {
    cluster.pixels.iter().filter(|p| set.at(**p)).count()
}

fn false_fraction<T: Real>(clusters: &ClusterSet<T>, set: &Mask, epsilon: f64) -> Option<f64> {
    if clusters.is_empty() {
        return None;
    }
    assert_eq!((clusters.rows, clusters.cols), set.dims(), "cluster set and mask dimensions differ");
    let n_false = clusters.clusters.iter().filter(|c| is_false_cluster(overlap_count(c, set), c.area, epsilon)).count();
    Some(n_false as f64 / clusters.len() as f64)
}

/// False-cluster-proportion envelope: the share of clusters whose overlap
/// with the confidence superset `u` is at least `epsilon`.
///
/// `None` when there are no clusters; callers treat that threshold as
/// producing no detections.
pub fn envelope<T: Real>(clusters: &ClusterSet<T>, u: &Mask, epsilon: f64) -> Option<f64> {
    false_fraction(clusters, u, epsilon)
}

/// True false cluster proportion against the known background set `s0`.
pub fn true_fcp<T: Real>(clusters: &ClusterSet<T>, s0: &Mask, epsilon: f64) -> Option<f64> {
    false_fraction(clusters, s0, epsilon)
}
