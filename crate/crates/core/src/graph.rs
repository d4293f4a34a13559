//! False cluster proportion on irregular point sets.
//!
//! Points carry a p-value and a response phase. Phases are split into
//! classes; two points are linked at level `t` when both have p-value `< t`,
//! share a class and lie within distance `d`. Clusters are the connected
//! components of that graph.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cluster::{is_false_cluster, UnionFind};
use crate::error::{Error, Result};
use crate::noise::rng_from_seed;

/// Seed for the k-means++ initialisation in [`classify_phase`].
const CLASSIFIER_SEED: u64 = 0x00C1_A55E_5EED;
const KMEANS_MAX_ITER: usize = 200;
const KMEANS_RESTARTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub x: f64,
    pub y: f64,
    pub pvalue: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LocationSet {
    pub points: Vec<Location>,
}

impl LocationSet {
    pub fn new(points: Vec<Location>) -> Result<Self> {
        for (i, p) in points.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite() && p.phase.is_finite()) {
                return Err(Error::structural(format!("point {i} has non-finite coordinates or phase")));
            }
            if !(0.0..=1.0).contains(&p.pvalue) {
                return Err(Error::structural(format!("point {i} has p-value {} outside [0, 1]", p.pvalue)));
            }
        }
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Reads CSV with header `x,y,pvalue,phase`.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let headers = rdr.headers()?.clone();
        for col in ["x", "y", "pvalue", "phase"] {
            if !headers.iter().any(|h| h == col) {
                return Err(Error::structural(format!("CSV is missing column `{col}`")));
            }
        }
        let points = rdr.deserialize().collect::<std::result::Result<Vec<Location>, _>>()?;
        Self::new(points)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassLabeling {
    pub labels: Vec<usize>,
    pub k: usize,
}

fn circular_mean(sum_cos: f64, sum_sin: f64) -> f64 {
    let m = sum_sin.atan2(sum_cos);
    // atan2 returns (-pi, pi]; fold pi onto -pi.
    if m >= PI {
        m - 2.0 * PI
    } else {
        m
    }
}

fn dist2(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)
}

/// One Lloyd run from a k-means++ start; returns labels and inertia.
fn kmeans_once<R: Rng>(emb: &[(f64, f64)], k: usize, rng: &mut R) -> (Vec<usize>, f64) {
    let n = emb.len();
    let mut centers = vec![emb[rng.random_range(0..n)]];
    while centers.len() < k {
        let d: Vec<f64> =
            emb.iter().map(|&e| centers.iter().map(|&c| dist2(e, c)).fold(f64::INFINITY, f64::min)).collect();
        let total: f64 = d.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            d.iter()
                .position(|&w| {
                    acc += w;
                    acc > target
                })
                .unwrap_or(n - 1)
        } else {
            rng.random_range(0..n)
        };
        centers.push(emb[pick]);
    }

    let mut labels = vec![usize::MAX; n];
    for _ in 0..KMEANS_MAX_ITER {
        let mut changed = false;
        for (i, &e) in emb.iter().enumerate() {
            let mut best = 0;
            for j in 1..k {
                if dist2(e, centers[j]) < dist2(e, centers[best]) {
                    best = j;
                }
            }
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![(0.0, 0.0, 0usize); k];
        for (i, &e) in emb.iter().enumerate() {
            let s = &mut sums[labels[i]];
            s.0 += e.0;
            s.1 += e.1;
            s.2 += 1;
        }
        for (c, s) in centers.iter_mut().zip(&sums) {
            if s.2 > 0 {
                *c = (s.0 / s.2 as f64, s.1 / s.2 as f64);
            }
        }
    }

    let inertia = emb.iter().zip(&labels).map(|(&e, &l)| dist2(e, centers[l])).sum();
    (labels, inertia)
}

/// K-means on the unit-circle embedding `(cos phase, sin phase)`.
///
/// Runs several k-means++ starts from a fixed internal seed and keeps the
/// lowest inertia, so the labeling is deterministic. Labels are renumbered
/// by ascending circular mean phase.
pub fn classify_phase(points: &LocationSet, k: usize) -> Result<ClassLabeling> {
    let n = points.len();
    if k == 0 {
        return Err(Error::param("class count must be at least 1"));
    }
    if n < k {
        return Err(Error::param(format!("cannot form {k} classes from {n} points")));
    }
    let emb: Vec<(f64, f64)> = points.points.iter().map(|p| (p.phase.cos(), p.phase.sin())).collect();

    let mut rng = rng_from_seed(CLASSIFIER_SEED);
    let mut best: Option<(Vec<usize>, f64)> = None;
    for _ in 0..KMEANS_RESTARTS {
        let (labels, inertia) = kmeans_once(&emb, k, &mut rng);
        if best.as_ref().is_none_or(|b| inertia < b.1) {
            best = Some((labels, inertia));
        }
    }
    let labels = best.expect("at least one restart").0;

    let mut sums = vec![(0.0, 0.0); k];
    for (i, &e) in emb.iter().enumerate() {
        sums[labels[i]].0 += e.0;
        sums[labels[i]].1 += e.1;
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        circular_mean(sums[a].0, sums[a].1).total_cmp(&circular_mean(sums[b].0, sums[b].1)).then(a.cmp(&b))
    });
    let mut rename = vec![0; k];
    for (new, &old) in order.iter().enumerate() {
        rename[old] = new;
    }
    Ok(ClassLabeling { labels: labels.into_iter().map(|l| rename[l]).collect(), k })
}

/// `1 - (1 - alpha)^(1/n)`, evaluated as `-expm1(ln1p(-alpha) / n)`.
pub fn conservative_threshold(alpha: f64, n: usize) -> f64 {
    -((-alpha).ln_1p() / n as f64).exp_m1()
}

/// Indices whose p-value exceeds [`conservative_threshold`].
pub fn conservative_superset(points: &LocationSet, alpha: f64) -> Result<Vec<usize>> {
    if points.is_empty() {
        return Err(Error::param("need at least one location"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let thr = conservative_threshold(alpha, points.len());
    Ok(points.points.iter().enumerate().filter(|(_, p)| p.pvalue > thr).map(|(i, _)| i).collect())
}

fn check_labels(points: &LocationSet, labels: &ClassLabeling) -> Result<()> {
    if labels.labels.len() != points.len() {
        return Err(Error::structural(format!("{} labels for {} points", labels.labels.len(), points.len())));
    }
    Ok(())
}

/// Same-class pairs within distance `d` (inclusive), found by bucketing
/// points into `d`-sized cells.
fn neighbor_lists(points: &LocationSet, labels: &[usize], d: f64) -> Vec<Vec<usize>> {
    let cell = |p: &Location| ((p.x / d).floor() as i64, (p.y / d).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, p) in points.points.iter().enumerate() {
        grid.entry(cell(p)).or_default().push(i);
    }
    let d2 = d * d;
    points
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let (cx, cy) = cell(p);
            let mut out = Vec::new();
            for dx in -1..=1 {
                for dy in -1..=1 {
                    let Some(bucket) = grid.get(&(cx + dx, cy + dy)) else { continue };
                    for &j in bucket {
                        if j == i || labels[j] != labels[i] {
                            continue;
                        }
                        let q = &points.points[j];
                        if (p.x - q.x).powi(2) + (p.y - q.y).powi(2) <= d2 {
                            out.push(j);
                        }
                    }
                }
            }
            out.sort_unstable();
            out
        })
        .collect()
}

fn check_distance(d: f64) -> Result<()> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::param(format!("distance bound must be positive, got {d}")));
    }
    Ok(())
}

fn group_components(uf: &mut UnionFind, members: impl Iterator<Item = usize>) -> Vec<Vec<usize>> {
    let mut by_root: HashMap<usize, usize> = HashMap::new();
    let mut comps: Vec<Vec<usize>> = Vec::new();
    for i in members {
        let r = uf.find(i);
        let idx = *by_root.entry(r).or_insert_with(|| {
            comps.push(Vec::new());
            comps.len() - 1
        });
        comps[idx].push(i);
    }
    comps
}

/// Clusters at level `t`: components among points with p-value `< t`.
/// Ordered by smallest member index; members ascending.
pub fn graph_components(points: &LocationSet, labels: &ClassLabeling, t: f64, d: f64) -> Result<Vec<Vec<usize>>> {
    check_labels(points, labels)?;
    check_distance(d)?;
    let nbrs = neighbor_lists(points, &labels.labels, d);
    let active: Vec<bool> = points.points.iter().map(|p| p.pvalue < t).collect();
    let mut uf = UnionFind::new(points.len());
    for (i, ns) in nbrs.iter().enumerate() {
        if !active[i] {
            continue;
        }
        for &j in ns {
            if active[j] {
                uf.union(i, j);
            }
        }
    }
    Ok(group_components(&mut uf, (0..points.len()).filter(|&i| active[i])))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphPoint {
    pub t: f64,
    pub envelope: Option<f64>,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFcpResult {
    /// Selected p-value level; `None` when nothing qualifies.
    pub t_c: Option<f64>,
    pub clusters: Vec<Vec<usize>>,
    pub envelope_value: Option<f64>,
    /// Candidates in ascending order.
    pub envelope_curve: Vec<GraphPoint>,
}

impl GraphFcpResult {
    /// Writes `x,y,class,cluster_id`, with -1 for points in no cluster.
    pub fn write_csv<W: Write>(&self, points: &LocationSet, labels: &ClassLabeling, out: W) -> Result<()> {
        let mut cluster_of = vec![-1_i64; points.len()];
        for (id, members) in self.clusters.iter().enumerate() {
            for &m in members {
                cluster_of[m] = id as i64;
            }
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "y", "class", "cluster_id"])?;
        for (i, p) in points.points.iter().enumerate() {
            w.write_record([
                p.x.to_string(),
                p.y.to_string(),
                labels.labels[i].to_string(),
                cluster_of[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Largest p-value level `t` (over the distinct p-values) whose envelope is
/// at most `c` with at least one cluster. A cluster is false when the share
/// of its members in `u` is at least `epsilon`.
pub fn graph_find_threshold(
    points: &LocationSet,
    labels: &ClassLabeling,
    u: &[usize],
    epsilon: f64,
    c: f64,
    d: f64,
) -> Result<GraphFcpResult> {
    check_labels(points, labels)?;
    check_distance(d)?;
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::param(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    if !(0.0..1.0).contains(&c) {
        return Err(Error::param(format!("c must lie in [0, 1), got {c}")));
    }
    let n = points.len();
    let mut in_u_flag = vec![false; n];
    for &i in u {
        if i >= n {
            return Err(Error::structural(format!("superset index {i} out of range for {n} points")));
        }
        in_u_flag[i] = true;
    }
    let nbrs = neighbor_lists(points, &labels.labels, d);
    let pv: Vec<f64> = points.points.iter().map(|p| p.pvalue).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| pv[a].total_cmp(&pv[b]));
    let mut candidates = pv.clone();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    let mut uf = UnionFind::new(n);
    let mut in_u = vec![0usize; n];
    let mut active = vec![false; n];
    let (mut k, mut n_false) = (0usize, 0usize);
    let mut curve = Vec::with_capacity(candidates.len());
    let mut best = None;
    let mut next = 0;
    for &t in &candidates {
        while next < n && pv[order[next]] < t {
            let i = order[next];
            next += 1;
            active[i] = true;
            in_u[i] = in_u_flag[i] as usize;
            k += 1;
            n_false += is_false_cluster(in_u[i], 1, epsilon) as usize;
            for &j in &nbrs[i] {
                if !active[j] {
                    continue;
                }
                let (ri, rj) = (uf.find(i), uf.find(j));
                if ri == rj {
                    continue;
                }
                let (si, sj) = (uf.set_size(ri), uf.set_size(rj));
                n_false -= is_false_cluster(in_u[ri], si, epsilon) as usize;
                n_false -= is_false_cluster(in_u[rj], sj, epsilon) as usize;
                let root = uf.union(ri, rj).expect("distinct roots");
                in_u[root] = in_u[ri] + in_u[rj];
                n_false += is_false_cluster(in_u[root], si + sj, epsilon) as usize;
                k -= 1;
            }
        }
        let env = (k > 0).then(|| n_false as f64 / k as f64);
        curve.push(GraphPoint { t, envelope: env, k });
        if matches!(env, Some(e) if e <= c) {
            best = Some((t, env));
        }
    }

    Ok(match best {
        Some((t, env)) => GraphFcpResult {
            t_c: Some(t),
            clusters: graph_components(points, labels, t, d)?,
            envelope_value: env,
            envelope_curve: curve,
        },
        None => GraphFcpResult { t_c: None, clusters: Vec::new(), envelope_value: None, envelope_curve: curve },
    })
}
