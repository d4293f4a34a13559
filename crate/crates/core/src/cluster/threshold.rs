//! Threshold search for the false-cluster-proportion procedure.
//!
//! Every candidate threshold is scored in a single pass: pixels are added in
//! descending order of value to a union-find forest, which tracks each
//! cluster's area and its overlap with the superset, so the envelope at each
//! candidate is available when the sweep crosses it.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{envelope, is_false_cluster, ClusterSet, Connectivity, UnionFind};
use crate::error::{Error, Result};
use crate::image::{ImageGrid, Mask};
use crate::scalar::Real;

/// How `t_c` is picked among candidates with envelope `<= c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionRule {
    /// Scan downward from the largest candidate and stop just before the
    /// envelope first exceeds `c`.
    #[default]
    FirstCrossing,
    /// Smallest qualifying candidate anywhere on the grid. Near the grid
    /// minimum the level set is one image-sized cluster, which qualifies
    /// whenever more than `1 - epsilon` of the image lies outside `U`.
    Smallest,
}

impl std::str::FromStr for SelectionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first-crossing" => Ok(Self::FirstCrossing),
            "smallest" => Ok(Self::Smallest),
            other => {
                Err(Error::Config(format!("unknown selection rule `{other}` (expected first-crossing or smallest)")))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThresholdOptions {
    pub connectivity: Connectivity,
    /// Clusters smaller than this are discarded before scoring; 1 disables it.
    pub min_area: usize,
    pub rule: SelectionRule,
}

impl Default for ThresholdOptions {
    fn default() -> Self {
        Self { connectivity: Connectivity::Eight, min_area: 1, rule: SelectionRule::FirstCrossing }
    }
}

/// Envelope value at one candidate threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EnvelopePoint<T: Real> {
    #[serde(with = "crate::serde_float")]
    pub t: T,
    /// `None` when the level set has no clusters.
    pub envelope: Option<f64>,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FcpResult<T: Real> {
    /// Selected threshold; `+inf` when no candidate qualified.
    #[serde(with = "crate::serde_float")]
    pub t_c: T,
    pub clusters: ClusterSet<T>,
    /// Envelope at `t_c`; `None` for an empty result.
    pub envelope_value: Option<f64>,
    /// Candidates in descending order of `t`.
    pub envelope_curve: Vec<EnvelopePoint<T>>,
    pub epsilon: f64,
    pub c: f64,
    /// Explanation when nothing was detected.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl<T: Real> FcpResult<T> {
    pub fn detected(&self) -> bool {
        self.t_c.is_finite() && !self.clusters.is_empty()
    }

    /// Writes `t,envelope,k_t` rows; undefined envelopes are left blank.
    pub fn write_envelope_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "envelope", "k_t"])?;
        for p in &self.envelope_curve {
            let env = p.envelope.map(|e| e.to_string()).unwrap_or_default();
            w.write_record([p.t.to_string(), env, p.k.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn validate(epsilon: f64, c: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::param(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    if !(0.0..1.0).contains(&c) {
        return Err(Error::param(format!("c must lie in [0, 1), got {c}")));
    }
    Ok(())
}

/// Candidate thresholds when none are supplied. The first-crossing scan
/// needs every distinct pixel value; the smallest-candidate rule uses the
/// values outside `U`, the largest value inside `U` and the global minimum.
fn default_grid<T: Real>(img: &ImageGrid<T>, u: &Mask, rule: SelectionRule) -> Vec<T> {
    match rule {
        SelectionRule::FirstCrossing => img.values().to_vec(),
        SelectionRule::Smallest => {
            let mut g: Vec<T> = img.values().iter().zip(u.bits()).filter(|(_, &in_u)| !in_u).map(|(&v, _)| v).collect();
            // Without the largest value in U, the level set `{value > max U}`
            // that separates the pixels outside U would never be evaluated.
            let top_in_u = img.values().iter().zip(u.bits()).filter(|(_, &in_u)| in_u).map(|(&v, _)| v).reduce(T::max);
            g.extend(top_in_u);
            g.push(img.min());
            g
        }
    }
}

fn sort_desc_dedup<T: Real>(mut v: Vec<T>) -> Vec<T> {
    v.retain(|x| !x.is_nan());
    v.sort_unstable_by(|a, b| b.partial_cmp(a).expect("no NaN"));
    v.dedup();
    v
}

struct Sweep<'a, T: Real> {
    img: &'a ImageGrid<T>,
    u: &'a Mask,
    opts: ThresholdOptions,
    epsilon: f64,
    uf: UnionFind,
    in_u: Vec<usize>,
    active: Vec<bool>,
    k: usize,
    n_false: usize,
}

impl<'a, T: Real> Sweep<'a, T> {
    fn contribution(&self, root: usize, size: usize) -> (usize, usize) {
        if size >= self.opts.min_area {
            (1, is_false_cluster(self.in_u[root], size, self.epsilon) as usize)
        } else {
            (0, 0)
        }
    }

    fn add(&mut self, root: usize, sign: isize) {
        let size = self.uf.set_size(root);
        let (dk, df) = self.contribution(root, size);
        if sign > 0 {
            self.k += dk;
            self.n_false += df;
        } else {
            self.k -= dk;
            self.n_false -= df;
        }
    }

    fn activate(&mut self, i: usize) {
        let cols = self.img.cols();
        let rows = self.img.rows();
        self.active[i] = true;
        self.in_u[i] = self.u.bits()[i] as usize;
        self.add(i, 1);
        let (r, c) = ((i / cols) as isize, (i % cols) as isize);
        for &(dr, dc) in self.opts.connectivity.offsets() {
            let (nr, nc) = (r + dr, c + dc);
            if nr < 0 || nc < 0 || nr >= rows as isize || nc >= cols as isize {
                continue;
            }
            let j = nr as usize * cols + nc as usize;
            if !self.active[j] {
                continue;
            }
            let (ri, rj) = (self.uf.find(i), self.uf.find(j));
            if ri == rj {
                continue;
            }
            self.add(ri, -1);
            self.add(rj, -1);
            let root = self.uf.union(ri, rj).expect("distinct roots");
            self.in_u[root] = self.in_u[ri] + self.in_u[rj];
            self.add(root, 1);
        }
    }
}

/// Envelope at a single threshold, computed from scratch.
pub fn envelope_at<T: Real>(
    img: &ImageGrid<T>,
    u: &Mask,
    epsilon: f64,
    t: T,
    opts: ThresholdOptions,
) -> (Option<f64>, usize) {
    let set = ClusterSet::from_level_set(img, t, opts.connectivity, opts.min_area);
    (envelope(&set, u, epsilon), set.len())
}

/// Picks a threshold whose envelope is at most `c` with at least one
/// cluster, and returns the clusters of its level set.
///
/// `u` marks the confidence superset (pixels that may be background).
/// `t_grid` overrides the default candidates. Levels with no clusters have
/// no envelope and are skipped. See [`SelectionRule`] for which qualifying
/// candidate wins. When none qualifies the result is empty with
/// `t_c = +inf`.
pub fn find_threshold<T: Real>(
    img: &ImageGrid<T>,
    u: &Mask,
    epsilon: f64,
    c: f64,
    t_grid: Option<&[T]>,
    opts: ThresholdOptions,
) -> Result<FcpResult<T>> {
    validate(epsilon, c)?;
    img.check_same_dims(u.dims())?;
    let candidates = sort_desc_dedup(match t_grid {
        Some(g) => g.to_vec(),
        None => default_grid(img, u, opts.rule),
    });

    let vals = img.values();
    let n = vals.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| vals[b].partial_cmp(&vals[a]).expect("finite pixels"));

    let mut sweep = Sweep {
        img,
        u,
        opts: ThresholdOptions { min_area: opts.min_area.max(1), ..opts },
        epsilon,
        uf: UnionFind::new(n),
        in_u: vec![0; n],
        active: vec![false; n],
        k: 0,
        n_false: 0,
    };
    let mut curve = Vec::with_capacity(candidates.len());
    let mut best: Option<(T, f64)> = None;
    let mut crossed = false;
    let mut next = 0;
    for &t in &candidates {
        while next < n && vals[order[next]] > t {
            sweep.activate(order[next]);
            next += 1;
        }
        let env = (sweep.k > 0).then(|| sweep.n_false as f64 / sweep.k as f64);
        curve.push(EnvelopePoint { t, envelope: env, k: sweep.k });
        match env {
            Some(e) if e <= c => {
                if !crossed {
                    best = Some((t, e));
                }
            }
            Some(_) => crossed |= opts.rule == SelectionRule::FirstCrossing,
            None => {}
        }
    }

    Ok(match best {
        Some((t_c, e)) => FcpResult {
            t_c,
            clusters: ClusterSet::from_level_set(img, t_c, opts.connectivity, opts.min_area),
            envelope_value: Some(e),
            envelope_curve: curve,
            epsilon,
            c,
            note: None,
        },
        None => FcpResult {
            t_c: T::infinity(),
            clusters: ClusterSet::empty(img.rows(), img.cols(), T::infinity(), opts.connectivity),
            envelope_value: None,
            envelope_curve: curve,
            epsilon,
            c,
            note: Some(format!("no candidate threshold has at least one cluster with envelope <= {c}")),
        },
    })
}
