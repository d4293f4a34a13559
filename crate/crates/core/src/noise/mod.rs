//! Null-field simulation and Monte-Carlo confidence supersets.

mod model;
mod seed;
mod superset;
mod table;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Real;

pub use model::{apply_stages, simulate_noise_image, NoiseModel, PreparedModel, Stage, StagePipeline};
pub use seed::{child_rng, child_seed, rng_from_seed, splitmix64};
pub use superset::{superset_alg1, superset_alg2, ConfidenceSuperset, SupersetMethod};
pub use table::{empirical_pvalue, max_percentile, MaxDistributionTable};

fn sort_values<T: Real>(v: &mut [T]) {
    v.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite maxima"));
}

fn check_replicates(b: usize) -> Result<()> {
    if b == 0 {
        return Err(Error::param("replicate count B must be at least 1"));
    }
    Ok(())
}

/// Per-area null maxima for areas `N` down to `N - a`.
///
/// Replicate `b` uses `child_seed(seed, b)`: it samples a null image, draws
/// `a` pixels in uniform random order and records the maximum of what is left
/// after each cumulative removal.
pub fn build_max_distributions<T: Real>(
    model: &NoiseModel,
    rows: usize,
    cols: usize,
    replicates: usize,
    a: usize,
    seed: u64,
) -> Result<MaxDistributionTable<T>> {
    check_replicates(replicates)?;
    let n = rows * cols;
    if a >= n {
        return Err(Error::param(format!("a = {a} must be smaller than the pixel count {n}")));
    }
    let prepared = PreparedModel::<T>::new(model, rows, cols)?;
    let per_rep: Vec<Vec<T>> = (0..replicates as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = child_rng(seed, b);
            let img = prepared.sample_with(&mut rng)?;
            Ok(removal_maxima(img.values(), a, &mut rng))
        })
        .collect::<Result<_>>()?;

    let mut maxima = vec![Vec::with_capacity(replicates); a + 1];
    for rep in &per_rep {
        for (k, &m) in rep.iter().enumerate() {
            maxima[k].push(m);
        }
    }
    let areas = (0..=a).map(|k| n - k).collect();
    MaxDistributionTable::new(rows, cols, areas, maxima, Some(model.clone()))
}

/// Maximum of `vals` after removing 0, 1, ..., `a` uniformly chosen pixels
/// cumulatively.
fn removal_maxima<T: Real, R: Rng + ?Sized>(vals: &[T], a: usize, rng: &mut R) -> Vec<T> {
    let n = vals.len();
    let mut idx: Vec<usize> = (0..n).collect();
    let (removal, _) = idx.partial_shuffle(rng, a);
    let removal = removal.to_vec();

    // The max after k removals is among the k+1 largest values.
    let mut top: Vec<usize> = (0..n).collect();
    let by_value_desc = |x: &usize, y: &usize| vals[*y].partial_cmp(&vals[*x]).expect("finite pixels");
    if a + 1 < n {
        top.select_nth_unstable_by(a, by_value_desc);
        top.truncate(a + 1);
    }
    top.sort_unstable_by(by_value_desc);

    let mut gone = vec![false; n];
    let mut ptr = 0;
    let mut out = Vec::with_capacity(a + 1);
    out.push(vals[top[0]]);
    for &r in &removal {
        gone[r] = true;
        while gone[top[ptr]] {
            ptr += 1;
        }
        out.push(vals[top[ptr]]);
    }
    out
}

/// Sorted null maxima over one uniformly placed `side x side` square per
/// replicate.
pub fn build_square_region_maxima<T: Real>(
    model: &NoiseModel,
    rows: usize,
    cols: usize,
    replicates: usize,
    side: usize,
    seed: u64,
) -> Result<Vec<T>> {
    check_replicates(replicates)?;
    if side == 0 || side > rows.min(cols) {
        return Err(Error::param(format!("square side {side} must lie in 1..={}", rows.min(cols))));
    }
    let prepared = PreparedModel::<T>::new(model, rows, cols)?;
    let mut out: Vec<T> = (0..replicates as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = child_rng(seed, b);
            let img = prepared.sample_with(&mut rng)?;
            let r0 = rng.random_range(0..=rows - side);
            let c0 = rng.random_range(0..=cols - side);
            let mut m = T::neg_infinity();
            for r in r0..r0 + side {
                for c in c0..c0 + side {
                    m = m.max(img.get(r, c));
                }
            }
            Ok(m)
        })
        .collect::<Result<_>>()?;
    sort_values(&mut out);
    Ok(out)
}

/// Sorted null maxima over `area` pixels drawn uniformly without replacement
/// per replicate; the random-removal counterpart of
/// [`build_square_region_maxima`] at a single area.
pub fn build_random_subset_maxima<T: Real>(
    model: &NoiseModel,
    rows: usize,
    cols: usize,
    replicates: usize,
    area: usize,
    seed: u64,
) -> Result<Vec<T>> {
    check_replicates(replicates)?;
    let n = rows * cols;
    if area == 0 || area > n {
        return Err(Error::param(format!("area {area} must lie in 1..={n}")));
    }
    let prepared = PreparedModel::<T>::new(model, rows, cols)?;
    let mut out: Vec<T> = (0..replicates as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = child_rng(seed, b);
            let img = prepared.sample_with(&mut rng)?;
            let mut idx: Vec<usize> = (0..n).collect();
            let (kept, _) = idx.partial_shuffle(&mut rng, area);
            Ok(kept.iter().map(|&i| img.values()[i]).fold(T::neg_infinity(), T::max))
        })
        .collect::<Result<_>>()?;
    sort_values(&mut out);
    Ok(out)
}

/// Sorted whole-image null maxima, the input to [`superset_alg2`].
pub fn build_full_maxima<T: Real>(
    model: &NoiseModel,
    rows: usize,
    cols: usize,
    replicates: usize,
    seed: u64,
) -> Result<Vec<T>> {
    let table = build_max_distributions::<T>(model, rows, cols, replicates, 0, seed)?;
    Ok(table.maxima.into_iter().next().expect("one area"))
}
