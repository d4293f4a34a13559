mod common;

use std::collections::BTreeSet;

use common::*;
use fcp_core::cluster::{connected_components, find_threshold, Connectivity, SelectionRule, ThresholdOptions};
use fcp_core::graph::{classify_phase, graph_components, graph_find_threshold, ClassLabeling, Location, LocationSet};
use fcp_core::image::{gaussian_kernel_1d, gaussian_smooth, ImageGrid, Mask};
use fcp_core::msd::{msd_image, msd_kernel, msd_response, ScaleGrid};
use rand::Rng;

const CONNS: [Connectivity; 2] = [Connectivity::Four, Connectivity::Eight];

#[test]
fn components_match_flood_fill() {
    let mut rng = rng(11);
    for i in 0..200 {
        let (rows, cols) = (rng.random_range(1..=24), rng.random_range(1..=24));
        let mask = random_mask(&mut rng, rows, cols, [0.2, 0.45, 0.6, 0.8][i % 4]);
        for conn in CONNS {
            let got: BTreeSet<Component> = connected_components(&mask, conn)
                .into_iter()
                .map(|c| c.into_iter().map(|p| (p.row, p.col)).collect())
                .collect();
            assert_eq!(got, flood_fill(&mask, conn), "mask {i}, {conn:?}");
        }
    }
}

#[test]
fn components_are_ordered_by_first_pixel() {
    let mut rng = rng(12);
    let mask = random_mask(&mut rng, 20, 20, 0.5);
    let comps = connected_components(&mask, Connectivity::Four);
    let firsts: Vec<_> = comps.iter().map(|c| (c[0].row, c[0].col)).collect();
    let mut sorted = firsts.clone();
    sorted.sort();
    assert_eq!(firsts, sorted);
    for c in &comps {
        assert!(c.windows(2).all(|w| (w[0].row, w[0].col) < (w[1].row, w[1].col)));
    }
}

#[test]
fn threshold_matches_exhaustive_scan() {
    let mut rng = rng(13);
    for case in 0..120 {
        let (rows, cols) = (rng.random_range(2..=16), rng.random_range(2..=16));
        let img =
            if case % 2 == 0 { random_grid(&mut rng, rows, cols, 12) } else { random_real_grid(&mut rng, rows, cols) };
        let cut: f64 = if case % 2 == 0 { rng.random_range(3.0..11.0) } else { rng.random_range(-0.2..0.9) };
        // U as the complement of an upper level set, with a few pixels flipped.
        let mut u = Mask::from_fn(rows, cols, |r, c| img.get(r, c) <= cut);
        for _ in 0..rng.random_range(0..4) {
            let (r, c) = (rng.random_range(0..rows), rng.random_range(0..cols));
            u.set(r, c, !u.get(r, c));
        }
        let eps = [0.5, 0.8, 0.99, 1.0][case % 4];
        let c = [0.0, 0.1, 0.25, 0.5][(case / 4) % 4];
        for conn in CONNS {
            for min_area in [1, 2] {
                for rule in [SelectionRule::FirstCrossing, SelectionRule::Smallest] {
                    let opts = ThresholdOptions { connectivity: conn, min_area, rule };
                    let res = find_threshold(&img, &u, eps, c, None, opts).unwrap();
                    let want = brute_threshold(&img, &u, eps, c, conn, min_area, rule);
                    match want {
                        Some(t) => assert_eq!(res.t_c, t, "case {case} {opts:?}"),
                        None => assert!(res.t_c.is_infinite(), "case {case} {opts:?}: got {}", res.t_c),
                    }
                    for p in &res.envelope_curve {
                        assert_eq!((p.envelope, p.k), brute_envelope(&img, &u, eps, p.t, conn, min_area));
                    }
                }
            }
        }
    }
}

#[test]
fn explicit_grid_is_scanned_as_given() {
    let mut rng = rng(14);
    for case in 0..40 {
        let img = random_real_grid(&mut rng, 12, 12);
        let u = Mask::from_fn(12, 12, |r, c| img.get(r, c) <= 0.5);
        let grid: Vec<f64> = (0..15).map(|_| rng.random_range(-1.0..1.0)).collect();
        let res = find_threshold(&img, &u, 0.99, 0.2, Some(&grid), ThresholdOptions::default()).unwrap();
        let mut sorted = grid.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let mut best = None;
        for &t in &sorted {
            match brute_envelope(&img, &u, 0.99, t, Connectivity::Eight, 1).0 {
                Some(e) if e <= 0.2 => best = Some(t),
                Some(_) => break,
                None => {}
            }
        }
        assert_eq!(res.t_c.is_finite().then_some(res.t_c), best, "case {case}");
    }
}

#[test]
fn plateau_threshold_is_the_brute_force_minimiser() {
    // One bright plateau plus isolated background spikes: the envelope only
    // grows as t falls, so the first crossing and the smallest qualifying
    // level coincide.
    let img = ImageGrid::from_fn(16, 16, |r, c| {
        if (5..9).contains(&r) && (6..10).contains(&c) {
            50.0
        } else if r % 3 == 0 && c % 3 == 0 && (r <= 2 || r >= 12) {
            ((r + c) % 6 + 1) as f64
        } else {
            0.0
        }
    });
    let u = Mask::from_fn(16, 16, |r, c| img.get(r, c) < 50.0);
    for rule in [SelectionRule::FirstCrossing, SelectionRule::Smallest] {
        let opts = ThresholdOptions { rule, ..Default::default() };
        let res = find_threshold(&img, &u, 0.99, 0.1, None, opts).unwrap();
        let want = brute_threshold(&img, &u, 0.99, 0.1, Connectivity::Eight, 1, rule).unwrap();
        assert_eq!(res.t_c, want);
        assert_eq!(res.clusters.len(), 1);
        assert_eq!(res.clusters.clusters[0].area, 16);
    }
}

#[test]
fn fft_matches_direct_convolution() {
    let mut rng = rng(15);
    let img = random_real_grid(&mut rng, 32, 32);
    for h in [1.0, 2.0, 3.5] {
        let k = msd_kernel::<f64>(h, None).unwrap();
        let want = direct_convolution(&img, &k.weights, k.radius);
        let got = msd_response(&img, h).unwrap();
        let scale = want.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in got.values().iter().zip(want.values()) {
            assert!((a - b).abs() <= 1e-8 * scale, "h={h}: {a} vs {b}");
        }
    }
}

#[test]
fn fft_handles_kernels_wider_than_the_image() {
    let mut rng = rng(16);
    let img = random_real_grid(&mut rng, 9, 13);
    let k = msd_kernel::<f64>(4.0, None).unwrap();
    let want = direct_convolution(&img, &k.weights, k.radius);
    let got = msd_response(&img, 4.0).unwrap();
    for (a, b) in got.values().iter().zip(want.values()) {
        assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
    }
}

#[test]
fn msd_image_is_pointwise_min_of_direct_responses() {
    let mut rng = rng(17);
    let img = random_real_grid(&mut rng, 24, 20);
    let scales = ScaleGrid::new(vec![1.0, 2.0, 4.0]).unwrap();
    let m = msd_image(&img, &scales).unwrap();
    let per: Vec<ImageGrid<f64>> = scales
        .scales()
        .iter()
        .map(|&h| {
            let k = msd_kernel::<f64>(h, None).unwrap();
            direct_convolution(&img, &k.weights, k.radius)
        })
        .collect();
    for i in 0..img.len() {
        let want = per.iter().map(|p| p.values()[i]).fold(f64::INFINITY, f64::min);
        assert!((m.values()[i] - want).abs() < 1e-10);
    }
}

#[test]
fn separable_smoothing_matches_direct_2d() {
    let mut rng = rng(18);
    let img = random_real_grid(&mut rng, 20, 17);
    for sigma in [0.7, 1.0, 2.5] {
        let g = gaussian_kernel_1d::<f64>(sigma).unwrap();
        let radius = g.len() / 2;
        let w2: Vec<f64> = g.iter().flat_map(|a| g.iter().map(move |b| a * b)).collect();
        let want = direct_convolution(&img, &w2, radius);
        let got = gaussian_smooth(&img, sigma).unwrap();
        for (a, b) in got.values().iter().zip(want.values()) {
            assert!((a - b).abs() < 1e-12, "sigma={sigma}");
        }
    }
}

#[test]
fn graph_components_match_bfs() {
    let mut rng = rng(19);
    for case in 0..300 {
        let n = rng.random_range(1..=30);
        let pts = random_points(&mut rng, n, 10.0);
        let k = rng.random_range(1..=3);
        let labels = random_labels(&mut rng, n, k);
        let t: f64 = rng.random();
        let d = rng.random_range(0.5..4.0);
        let got: BTreeSet<BTreeSet<usize>> =
            graph_components(&pts, &labels, t, d).unwrap().into_iter().map(|c| c.into_iter().collect()).collect();
        assert_eq!(got, bfs_components(&pts, &labels, t, d), "case {case}");
    }
}

#[test]
fn graph_components_are_ordered_by_smallest_member() {
    let mut rng = rng(20);
    let pts = random_points(&mut rng, 30, 6.0);
    let labels = random_labels(&mut rng, 30, 2);
    let comps = graph_components(&pts, &labels, 0.8, 1.5).unwrap();
    let firsts: Vec<usize> = comps.iter().map(|c| c[0]).collect();
    assert!(firsts.windows(2).all(|w| w[0] < w[1]));
    assert!(comps.iter().all(|c| c.windows(2).all(|w| w[0] < w[1])));
}

#[test]
fn graph_edges_at_exact_distance() {
    let pts = LocationSet::new(vec![
        Location { x: 0.0, y: 0.0, pvalue: 0.01, phase: 0.0 },
        Location { x: 3.0, y: 4.0, pvalue: 0.01, phase: 0.0 },
    ])
    .unwrap();
    let same = ClassLabeling { labels: vec![0, 0], k: 1 };
    assert_eq!(graph_components(&pts, &same, 0.05, 5.0).unwrap().len(), 1);
    let split = ClassLabeling { labels: vec![0, 1], k: 2 };
    assert_eq!(graph_components(&pts, &split, 0.05, 5.0).unwrap().len(), 2);
}

#[test]
fn graph_threshold_matches_exhaustive_scan() {
    let mut rng = rng(21);
    for case in 0..200 {
        let n = if case < 100 { 15 } else { rng.random_range(2..=30) };
        let pts = random_points(&mut rng, n, 6.0);
        let k = rng.random_range(1..=2);
        let labels = random_labels(&mut rng, n, k);
        let u: Vec<usize> = (0..n).filter(|_| rng.random::<f64>() < 0.6).collect();
        let eps = [0.5, 0.99, 1.0][case % 3];
        let c = [0.0, 0.2, 0.4][(case / 3) % 3];
        let d = rng.random_range(0.8..2.5);
        let res = graph_find_threshold(&pts, &labels, &u, eps, c, d).unwrap();
        assert_eq!(res.t_c, brute_graph_threshold(&pts, &labels, &u, eps, c, d), "case {case}");
    }
}

#[test]
fn classifier_partition_survives_rotation() {
    let mut rng = rng(22);
    for case in 0..30 {
        let k = 2 + case % 3;
        let centres: Vec<f64> = (0..k).map(|j| j as f64 * std::f64::consts::TAU / k as f64).collect();
        let base: Vec<Location> = (0..60)
            .map(|i| Location { x: i as f64, y: 0.0, pvalue: 0.5, phase: centres[i % k] + rng.random_range(-0.3..0.3) })
            .collect();
        let labels = classify_phase(&LocationSet::new(base.clone()).unwrap(), k).unwrap();
        let shift = rng.random_range(-3.0..3.0);
        let rotated: Vec<Location> = base.iter().map(|p| Location { phase: p.phase + shift, ..*p }).collect();
        let rot = classify_phase(&LocationSet::new(rotated).unwrap(), k).unwrap();
        assert_eq!(partition(&labels.labels), partition(&rot.labels), "case {case}");
        let truth: Vec<usize> = (0..60).map(|i| i % k).collect();
        assert_eq!(partition(&labels.labels), partition(&truth), "case {case}");
    }
}
