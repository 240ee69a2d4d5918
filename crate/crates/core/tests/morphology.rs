mod common;

use std::collections::BTreeSet;

use apple_picker::integral::IntegralImages;
use apple_picker::micrograph::Micrograph;
use apple_picker::morphology::*;
use apple_picker::picker::*;
use apple_picker::svm::SvmModel;
use apple_picker::synth::{generate, SynthParams};
use apple_picker::training::Standardization;
use common::*;
use ndarray::Array2;
use rand::Rng;

/// Random masks with blob structure, not just salt and pepper.
fn blobby_mask(rng: &mut rand_chacha::ChaCha8Rng, h: usize, w: usize) -> Array2<bool> {
    let mut m = random_mask(rng, h, w, 0.15);
    for _ in 0..rng.random_range(2..8) {
        let (cr, cc, r) = (rng.random_range(0..h) as i64, rng.random_range(0..w) as i64, rng.random_range(3..12) as i64);
        for i in 0..h as i64 {
            for j in 0..w as i64 {
                if (i - cr).pow(2) + (j - cc).pow(2) <= r * r {
                    m[[i as usize, j as usize]] = true;
                }
            }
        }
    }
    m
}

#[test]
fn components_match_flood_fill() {
    let mut rng = rng(40);
    for trial in 0..100 {
        let mask = if trial % 2 == 0 { random_mask(&mut rng, 64, 64, 0.3 + 0.004 * trial as f64) } else { blobby_mask(&mut rng, 64, 64) };
        let got = connected_components(&mask);
        let want = flood_fill(&mask);
        assert_eq!(got.len(), want.len(), "trial {trial}");
        for (c, (count, bb, centroid)) in got.iter().zip(&want) {
            assert_eq!(c.pixel_count, *count);
            assert_eq!(c.bounding_box, *bb);
            assert!((c.centroid.0 - centroid.0).abs() < 1e-9 && (c.centroid.1 - centroid.1).abs() < 1e-9);
            assert_eq!(c.max_diameter, (bb.2 - bb.0 + 1).max(bb.3 - bb.1 + 1));
        }
        let total: usize = got.iter().map(|c| c.pixel_count).sum();
        assert_eq!(total, mask.iter().filter(|&&b| b).count());
    }
}

#[test]
fn labels_partition_set_pixels() {
    let mut rng = rng(41);
    let mask = blobby_mask(&mut rng, 48, 48);
    let (labels, clusters) = label_components(&mask);
    for ((r, c), &b) in mask.indexed_iter() {
        assert_eq!(labels[[r, c]] != 0, b);
        if b {
            let k = labels[[r, c]] as usize - 1;
            let bb = clusters[k].bounding_box;
            assert!(r >= bb.0 && r <= bb.2 && c >= bb.1 && c <= bb.3);
        }
    }
}

#[test]
fn erosion_matches_naive_neighborhood_check() {
    let mut rng = rng(42);
    for trial in 0..100 {
        let mask = blobby_mask(&mut rng, 64, 64);
        let radius = [0, 1, 2, 3, 5][trial % 5];
        assert_eq!(erode(&mask, radius), naive_erode(&mask, radius), "trial {trial} radius {radius}");
    }
}

#[test]
fn erosion_examples() {
    let mut sq = Array2::from_elem((5, 5), false);
    for r in 1..4 {
        for c in 1..4 {
            sq[[r, c]] = true;
        }
    }
    let one = erode(&sq, 1);
    assert_eq!(one.iter().filter(|&&b| b).count(), 1);
    assert!(one[[2, 2]]);
    assert_eq!(erode(&sq, 0), sq);
}

fn minkowski(a: &[(i64, i64)], b: &[(i64, i64)]) -> BTreeSet<(i64, i64)> {
    a.iter().flat_map(|p| b.iter().map(move |q| (p.0 + q.0, p.1 + q.1))).collect()
}

#[test]
fn erosion_composition_rule() {
    let mut rng = rng(43);
    let mut exact_cases = 0;
    for r1 in 0..5usize {
        for r2 in 0..5usize {
            let sum = minkowski(&disk_element(r1), &disk_element(r2));
            let big: BTreeSet<_> = disk_element(r1 + r2).into_iter().collect();
            // The sum of two discrete disks never leaves the bigger disk.
            assert!(sum.is_subset(&big));
            let composes = sum == big;
            exact_cases += composes as usize;
            for _ in 0..4 {
                let mask = blobby_mask(&mut rng, 64, 64);
                let direct = erode(&mask, r1 + r2);
                let stepwise = erode(&erode(&mask, r1), r2);
                assert!(direct.iter().zip(&stepwise).all(|(&d, &s)| !d || s), "r1 {r1} r2 {r2}");
                if composes {
                    assert_eq!(direct, stepwise, "r1 {r1} r2 {r2}");
                }
            }
        }
    }
    // Radius zero composes with anything, and so do a few small pairs.
    assert!(exact_cases >= 9);
}

#[test]
fn disk_element_is_euclidean() {
    for r in 0..6usize {
        let d = disk_element(r);
        let ri = r as i64;
        let expected = (-ri..=ri).flat_map(|a| (-ri..=ri).map(move |b| (a, b))).filter(|(a, b)| a * a + b * b <= ri * ri).count();
        assert_eq!(d.len(), expected);
    }
}

fn threshold_model(bias: f64, coef: f64, sv: [f64; 2]) -> SvmModel<f64> {
    SvmModel {
        support_vectors: vec![sv],
        dual_coefficients: vec![coef],
        bias,
        kernel_bandwidth: 1.0,
        slack_c: 1.0,
        standardization: Standardization::identity(),
        iterations: 0,
        kkt_gap: 0.0,
    }
}

#[test]
fn classified_features_match_naive_statistics() {
    let mut rng = rng(44);
    let a = uniform(&mut rng, 80, 90);
    let m = Micrograph::new(a.clone()).unwrap();
    let ii = IntegralImages::new(&m);
    let n = 10;
    // A model whose decision is a known function of the features.
    let model = threshold_model(-0.5, 1.0, [0.0, 0.58]);
    let mask = classify_pixels_with(&ii, &model, n);
    for _ in 0..1000 {
        let r = rng.random_range(n / 2..80 - n / 2 + 1);
        let c = rng.random_range(n / 2..90 - n / 2 + 1);
        let (mean, var) = naive_stats(&a, r - n / 2, c - n / 2, n);
        let (fm, fv) = ii.window_stats((r - n / 2, c - n / 2), n).unwrap();
        assert!((fm - mean).abs() < 1e-6 && (fv.sqrt() - var.sqrt()).abs() < 1e-6);
        let d = model.decision([mean, var.sqrt()]);
        if d.abs() > 1e-9 {
            assert_eq!(mask.labels[[r, c]], d > 0.0, "({r}, {c})");
        }
    }
}

#[test]
fn constant_micrograph_gets_uniform_labels() {
    let m = Micrograph::new(Array2::from_elem((40, 40), 3.0)).unwrap();
    let ii = IntegralImages::new(&m);
    let mask = classify_pixels_with(&ii, &threshold_model(-0.5, 1.0, [3.0, 0.0]), 8);
    let interior: Vec<bool> = (4..=36).flat_map(|r| (4..=36).map(move |c| (r, c))).map(|ix| mask.labels[ix]).collect();
    assert!(interior.iter().all(|&b| b == interior[0]));
}

#[test]
fn trained_classifier_segments_synthetic_disks() {
    use apple_picker::reference::select_references_with;
    use apple_picker::response::score_micrograph_with;
    use apple_picker::svm::{train, SvmParams};
    use apple_picker::training::build_training_set;

    let p = SynthParams::new(512, 512, 16, 40.0, 1.0, 45);
    let (m, truth) = generate::<f64>(&p).unwrap();
    let n = 32;
    let ii = IntegralImages::new(&m);
    let refs = select_references_with(&m, &ii, n, 128).unwrap();
    let scored = score_micrograph_with(&m, &refs, n, 20.0).unwrap();
    let set = build_training_set(&ii, &scored.queries, &scored.scores, 5.0, 75.0).unwrap().set;
    let model = train(&set, &SvmParams::default()).unwrap();
    let mask = classify_pixels_with(&ii, &model, n);

    let (mut disk, mut disk_hit, mut far, mut far_hit) = (0, 0, 0, 0);
    let lo = n / 2;
    let hi = 512 - n / 2;
    for r in lo..=hi {
        for c in lo..=hi {
            let d = truth
                .centers
                .iter()
                .map(|&(tr, tc)| ((r as f64 - tr).powi(2) + (c as f64 - tc).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min);
            if d < p.radius() - p.edge_width() {
                disk += 1;
                disk_hit += mask.labels[[r, c]] as usize;
            } else if d > p.radius() + n as f64 {
                far += 1;
                far_hit += !mask.labels[[r, c]] as usize;
            }
        }
    }
    let (inside, outside) = (disk_hit as f64 / disk as f64, far_hit as f64 / far as f64);
    assert!(inside >= 0.8, "disk interior {inside}");
    assert!(outside >= 0.95, "far background {outside}");
}

#[test]
fn separated_picks_stay_apart() {
    let mut rng = rng(46);
    for _ in 0..50 {
        let clusters: Vec<Cluster> = (0..30)
            .map(|_| {
                let (r, c) = (rng.random_range(0.0..200.0), rng.random_range(0.0..200.0));
                Cluster { pixel_count: 5, bounding_box: (r as usize, c as usize, r as usize, c as usize), centroid: (r, c), max_diameter: 2 }
            })
            .collect();
        let d = rng.random_range(5.0..40.0);
        let kept = enforce_separation(clusters.clone(), d);
        for i in 0..kept.len() {
            for j in i + 1..kept.len() {
                let (a, b) = (kept[i].centroid, kept[j].centroid);
                assert!(((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt() >= d);
            }
        }
        // Nothing isolated is dropped.
        for c in &clusters {
            let isolated = clusters.iter().filter(|o| *o != c).all(|o| {
                ((o.centroid.0 - c.centroid.0).powi(2) + (o.centroid.1 - c.centroid.1).powi(2)).sqrt() >= d
            });
            assert_eq!(isolated, kept.contains(c));
        }
    }
}
