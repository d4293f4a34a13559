//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeSet, VecDeque};

use fcp_core::cluster::{Connectivity, SelectionRule};
use fcp_core::graph::{ClassLabeling, Location, LocationSet};
use fcp_core::image::{ImageGrid, Mask};
use fcp_core::noise::rng_from_seed;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type Component = BTreeSet<(usize, usize)>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    rng_from_seed(seed)
}

pub fn random_mask(rng: &mut ChaCha8Rng, rows: usize, cols: usize, density: f64) -> Mask {
    Mask::from_fn(rows, cols, |_, _| rng.random::<f64>() < density)
}

/// Small integer-valued grid, so level sets have many ties.
pub fn random_grid(rng: &mut ChaCha8Rng, rows: usize, cols: usize, levels: u32) -> ImageGrid<f64> {
    ImageGrid::from_fn(rows, cols, |_, _| rng.random_range(0..levels) as f64)
}

pub fn random_real_grid(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> ImageGrid<f64> {
    ImageGrid::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

fn neighbours(conn: Connectivity) -> Vec<(isize, isize)> {
    let mut out = Vec::new();
    for dr in -1..=1 {
        for dc in -1..=1 {
            if (dr, dc) == (0, 0) {
                continue;
            }
            if conn == Connectivity::Four && dr != 0 && dc != 0 {
                continue;
            }
            out.push((dr, dc));
        }
    }
    out
}

/// Stack-based flood fill, returned as a set of pixel sets.
pub fn flood_fill(mask: &Mask, conn: Connectivity) -> BTreeSet<Component> {
    let (rows, cols) = mask.dims();
    let mut seen = vec![vec![false; cols]; rows];
    let mut out = BTreeSet::new();
    let nb = neighbours(conn);
    for r in 0..rows {
        for c in 0..cols {
            if !mask.get(r, c) || seen[r][c] {
                continue;
            }
            let mut comp = Component::new();
            let mut stack = vec![(r, c)];
            seen[r][c] = true;
            while let Some((pr, pc)) = stack.pop() {
                comp.insert((pr, pc));
                for &(dr, dc) in &nb {
                    let (nr, nc) = (pr as isize + dr, pc as isize + dc);
                    if nr < 0 || nc < 0 || nr >= rows as isize || nc >= cols as isize {
                        continue;
                    }
                    let (nr, nc) = (nr as usize, nc as usize);
                    if mask.get(nr, nc) && !seen[nr][nc] {
                        seen[nr][nc] = true;
                        stack.push((nr, nc));
                    }
                }
            }
            out.insert(comp);
        }
    }
    out
}

/// Envelope and cluster count at level `t`, from scratch.
pub fn brute_envelope(
    img: &ImageGrid<f64>,
    u: &Mask,
    eps: f64,
    t: f64,
    conn: Connectivity,
    min_area: usize,
) -> (Option<f64>, usize) {
    let mask = Mask::from_fn(img.rows(), img.cols(), |r, c| img.get(r, c) > t);
    let comps: Vec<Component> = flood_fill(&mask, conn).into_iter().filter(|c| c.len() >= min_area).collect();
    let k = comps.len();
    let n_false = comps
        .iter()
        .filter(|c| {
            let inside = c.iter().filter(|&&(r, cc)| u.get(r, cc)).count();
            inside as f64 / c.len() as f64 >= eps
        })
        .count();
    ((k > 0).then(|| n_false as f64 / k as f64), k)
}

/// Threshold selection by exhaustive evaluation of every candidate.
pub fn brute_threshold(
    img: &ImageGrid<f64>,
    u: &Mask,
    eps: f64,
    c: f64,
    conn: Connectivity,
    min_area: usize,
    rule: SelectionRule,
) -> Option<f64> {
    let mut grid: Vec<f64> = match rule {
        SelectionRule::FirstCrossing => img.values().to_vec(),
        SelectionRule::Smallest => {
            let mut g: Vec<f64> = img.values().iter().zip(u.bits()).filter(|(_, &b)| !b).map(|(&v, _)| v).collect();
            let inside = img.values().iter().zip(u.bits()).filter(|(_, &b)| b).map(|(&v, _)| v);
            if let Some(m) = inside.clone().reduce(f64::max) {
                g.push(m);
            }
            g.push(img.values().iter().cloned().fold(f64::INFINITY, f64::min));
            g
        }
    };
    grid.sort_by(|a, b| b.total_cmp(a));
    grid.dedup();
    let evals: Vec<(f64, Option<f64>)> =
        grid.iter().map(|&t| (t, brute_envelope(img, u, eps, t, conn, min_area).0)).collect();
    match rule {
        SelectionRule::Smallest => {
            evals.iter().filter(|(_, e)| matches!(e, Some(e) if *e <= c)).map(|(t, _)| *t).next_back()
        }
        SelectionRule::FirstCrossing => {
            let mut best = None;
            for (t, e) in evals {
                match e {
                    Some(e) if e <= c => best = Some(t),
                    Some(_) => break,
                    None => {}
                }
            }
            best
        }
    }
}

/// Half-sample symmetric reflection written out case by case.
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - 1 - i;
        } else {
            return i as usize;
        }
    }
}

/// `out(r, c) = sum_{u,v} w(u, v) img(r - u, c - v)` with reflect padding.
pub fn direct_convolution(img: &ImageGrid<f64>, weights: &[f64], radius: usize) -> ImageGrid<f64> {
    let side = 2 * radius + 1;
    let r = radius as isize;
    ImageGrid::from_fn(img.rows(), img.cols(), |row, col| {
        let mut acc = 0.0;
        for u in -r..=r {
            for v in -r..=r {
                let w = weights[(u + r) as usize * side + (v + r) as usize];
                acc += w * img.get(reflect(row as isize - u, img.rows()), reflect(col as isize - v, img.cols()));
            }
        }
        acc
    })
}

pub fn random_points(rng: &mut ChaCha8Rng, n: usize, extent: f64) -> LocationSet {
    let pts = (0..n)
        .map(|_| Location {
            x: rng.random_range(0.0..extent),
            y: rng.random_range(0.0..extent),
            pvalue: rng.random(),
            phase: rng.random_range(-3.0..3.0),
        })
        .collect();
    LocationSet::new(pts).unwrap()
}

pub fn random_labels(rng: &mut ChaCha8Rng, n: usize, k: usize) -> ClassLabeling {
    ClassLabeling { labels: (0..n).map(|_| rng.random_range(0..k)).collect(), k }
}

/// Breadth-first search over the explicit all-pairs graph.
pub fn bfs_components(points: &LocationSet, labels: &ClassLabeling, t: f64, d: f64) -> BTreeSet<BTreeSet<usize>> {
    let p = &points.points;
    let n = p.len();
    let active: Vec<bool> = p.iter().map(|q| q.pvalue < t).collect();
    let linked = |i: usize, j: usize| {
        labels.labels[i] == labels.labels[j] && ((p[i].x - p[j].x).powi(2) + (p[i].y - p[j].y).powi(2)).sqrt() <= d
    };
    let mut seen = vec![false; n];
    let mut out = BTreeSet::new();
    for s in 0..n {
        if !active[s] || seen[s] {
            continue;
        }
        let mut comp = BTreeSet::new();
        let mut queue = VecDeque::from([s]);
        seen[s] = true;
        while let Some(i) = queue.pop_front() {
            comp.insert(i);
            for j in 0..n {
                if active[j] && !seen[j] && linked(i, j) {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        out.insert(comp);
    }
    out
}

/// Largest p-value level whose graph envelope is at most `c`.
pub fn brute_graph_threshold(
    points: &LocationSet,
    labels: &ClassLabeling,
    u: &[usize],
    eps: f64,
    c: f64,
    d: f64,
) -> Option<f64> {
    let mut grid: Vec<f64> = points.points.iter().map(|p| p.pvalue).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid.into_iter().rfind(|&t| {
        let comps = bfs_components(points, labels, t, d);
        if comps.is_empty() {
            return false;
        }
        let n_false =
            comps.iter().filter(|c| c.iter().filter(|i| u.contains(i)).count() as f64 / c.len() as f64 >= eps).count();
        n_false as f64 / comps.len() as f64 <= c
    })
}

/// Partition of indices induced by a labeling, independent of label names.
pub fn partition(labels: &[usize]) -> BTreeSet<BTreeSet<usize>> {
    let mut groups: std::collections::BTreeMap<usize, BTreeSet<usize>> = Default::default();
    for (i, &l) in labels.iter().enumerate() {
        groups.entry(l).or_default().insert(i);
    }
    groups.into_values().collect()
}
