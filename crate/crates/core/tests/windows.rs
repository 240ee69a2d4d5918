mod common;

use apple_picker::integral::IntegralImages;
use apple_picker::micrograph::Micrograph;
use apple_picker::reference::{extremal_windows, select_references, Criterion};
use apple_picker::response::score_micrograph_with;
use apple_picker::synth::{generate, SynthParams};
use apple_picker::training::*;
use common::*;
use ndarray::{s, Array2};
use rand::Rng;

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

#[test]
fn integral_stats_match_naive_loops() {
    let mut rng = rng(20);
    let a = uniform(&mut rng, 32, 32).mapv(|v| 100.0 + 10.0 * v);
    let ii = IntegralImages::from_array(&a);
    for _ in 0..100 {
        let n = rng.random_range(1..=16);
        let r = rng.random_range(0..=32 - n);
        let c = rng.random_range(0..=32 - n);
        let (m, v) = ii.window_stats((r, c), n).unwrap();
        let (nm, nv) = naive_stats(&a, r, c, n);
        assert!(rel_close(m, nm, 1e-6) && rel_close(v, nv, 1e-6), "({r},{c}) n={n}");
    }
    assert!(ii.window_stats((30, 0), 4).is_err());
    assert!(ii.window_stats((0, 0), 0).is_err());
}

#[test]
fn extremal_windows_match_exhaustive_search() {
    let mut rng = rng(21);
    for trial in 0..50 {
        // Coarse quantization forces plenty of exact ties.
        let a = if trial % 2 == 0 {
            uniform(&mut rng, 64, 64)
        } else {
            uniform(&mut rng, 64, 64).mapv(|v| (v * 2.0).round())
        };
        let n = [4, 6, 8, 10][trial % 4];
        let ii = IntegralImages::from_array(&a);
        let fast = extremal_windows(&ii, (0, 0), 64, n);
        let (slow, values) = naive_extremal(&a, (0, 0), 64, n);
        assert_eq!(fast, slow, "trial {trial}");
        for (k, &(r, c)) in fast.iter().enumerate() {
            let (m, v) = naive_stats(&a, r, c, n);
            let got = if k < 2 { m } else { v };
            assert!((got - values[k]).abs() < 1e-9);
        }
    }
}

#[test]
fn reference_set_layout() {
    let mut rng = rng(22);
    let m = Micrograph::new(uniform(&mut rng, 130, 200)).unwrap();
    let refs = select_references(&m, 8, 40).unwrap();
    assert_eq!(refs.grid, (3, 5));
    assert_eq!(refs.len(), 4 * 15);
    for (w, p) in refs.windows.iter().zip(&refs.provenance) {
        let (r, c) = p.top_left;
        assert_eq!(w, &m.data().slice(s![r..r + 8, c..c + 8]).to_owned());
        let (gr, gc) = (p.container / 5, p.container % 5);
        assert!(r >= gr * 40 && r + 8 <= (gr + 1) * 40 && c >= gc * 40 && c + 8 <= (gc + 1) * 40);
    }
    let crit: Vec<Criterion> = refs.provenance[..4].iter().map(|p| p.criterion).collect();
    assert_eq!(crit, Criterion::ALL);
}

#[test]
fn dark_disk_wins_min_mean() {
    let a = Array2::from_shape_fn((64, 64), |(r, c)| {
        let d2 = (r as f64 - 40.0).powi(2) + (c as f64 - 20.0).powi(2);
        if d2 < 64.0 {
            0.0
        } else {
            1.0
        }
    });
    let ii = IntegralImages::from_array(&a);
    let [min_mean, max_mean, _, _] = extremal_windows(&ii, (0, 0), 64, 8);
    let overlaps = |(r, c): (usize, usize)| {
        (r..r + 8).any(|i| (c..c + 8).any(|j| a[[i, j]] == 0.0))
    };
    assert!(overlaps(min_mean));
    assert!(!overlaps(max_mean));
}

fn scored_synthetic() -> (Micrograph<f64>, apple_picker::response::ScoredQueries<f64>) {
    let p = SynthParams::new(384, 384, 12, 32.0, 1.0, 23);
    let (m, _) = generate::<f64>(&p).unwrap();
    let refs = select_references(&m, 24, 96).unwrap();
    let scored = score_micrograph_with(&m, &refs, 24, 20.0).unwrap();
    (m, scored)
}

#[test]
fn training_windows_are_disjoint_and_respect_masks() {
    let (m, scored) = scored_synthetic();
    let ii = IntegralImages::new(&m);
    let (q, k) = (&scored.queries, &scored.scores);
    let out = build_training_set(&ii, q, k, 5.0, 60.0).unwrap();
    let set = &out.set;
    let n = set.window_size;
    let order = ranked_queries(k);
    let top2: Vec<(usize, usize)> = order[..top_count(q.len(), out.tau2)].iter().map(|&i| q.positions[i]).collect();
    let intersects = |a: (usize, usize), b: (usize, usize)| {
        a.0 < b.0 + n && b.0 < a.0 + n && a.1 < b.1 + n && b.1 < a.1 + n
    };
    for label in [0u8, 1] {
        let pos: Vec<_> = set.positions.iter().zip(&set.labels).filter(|(_, &l)| l == label).map(|(p, _)| *p).collect();
        for i in 0..pos.len() {
            for j in i + 1..pos.len() {
                assert!(!intersects(pos[i], pos[j]));
            }
        }
        if label == 0 {
            for &p in &pos {
                assert!(top2.iter().all(|&t| !intersects(p, t)));
            }
        }
    }
    // Features agree with naive statistics.
    for (f, &(r, c)) in set.features.iter().zip(&set.positions) {
        let (mean, var) = naive_stats(m.data(), r, c, n);
        assert!(rel_close(f[0], mean, 1e-6) && rel_close(f[1], var.sqrt(), 1e-6));
    }
}

#[test]
fn particle_class_is_darker_and_busier() {
    let (m, scored) = scored_synthetic();
    let ii = IntegralImages::new(&m);
    let set = build_training_set(&ii, &scored.queries, &scored.scores, 5.0, 60.0).unwrap().set;
    let avg = |label: u8, k: usize| {
        let v: Vec<f64> = set.features.iter().zip(&set.labels).filter(|(_, &l)| l == label).map(|(f, _)| f[k]).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    assert!(avg(1, 0) < avg(0, 0));
    assert!(avg(1, 1) > avg(0, 1));
}

#[test]
fn noise_mask_avoids_the_blob() {
    let mut rng = rng(24);
    let mut a = uniform(&mut rng, 192, 192).mapv(|v| 0.2 * v);
    for r in 80..112 {
        for c in 80..112 {
            a[[r, c]] -= 2.0 + 0.5 * ((r + c) % 3) as f64;
        }
    }
    let m = Micrograph::new(a).unwrap();
    let refs = select_references(&m, 16, 64).unwrap();
    let scored = score_micrograph_with(&m, &refs, 16, 20.0).unwrap();
    let noise = noise_regions(&scored.queries, &scored.scores, 30.0).unwrap();
    assert!(!noise.slice(s![84..108, 84..108]).iter().any(|&b| b));
}

#[test]
fn tau_counts_and_ranking() {
    assert_eq!(top_count(100, 5.0), 5);
    assert_eq!(top_count(101, 5.0), 6);
    assert_eq!(top_count(10, 100.0), 10);
    assert_eq!(top_count(7, 0.1), 1);
}

#[test]
fn auto_lowering_reports_the_tau_used() {
    let (m, scored) = scored_synthetic();
    let ii = IntegralImages::new(&m);
    let out = build_training_set(&ii, &scored.queries, &scored.scores, 5.0, 100.0).unwrap();
    assert!(out.tau2 < 100.0 && out.tau2 >= 5.0);
    assert!((100.0 - out.tau2) % TAU2_STEP == 0.0);
    assert!(out.set.count(0) >= 1);
    assert!(build_training_set(&ii, &scored.queries, &scored.scores, 50.0, 40.0).is_err());
}
