mod common;

use common::{random_instance, rng};
use sparse_medoids::{dyn_build, sparse_pp, Coverage, LossPair, SparseCostMatrix};

#[test]
fn first_build_medoid_is_best_singleton() {
    let mut r = rng(100);
    for _ in 0..100 {
        let m = random_instance(&mut r, 30, 10, 0.25, true);
        let built = dyn_build(&m, 2, Coverage::Strict).unwrap();
        let mut best = (LossPair::new(f64::INFINITY, 0.0), usize::MAX);
        for j in 0..10 {
            let l = m.evaluate_loss(&[j]).unwrap();
            if l < best.0 {
                best = (l, j);
            }
        }
        assert_eq!(built.medoids[0], best.1);
        assert_eq!(built.trace[0], best.0);
    }
}

#[test]
fn build_running_loss_matches_scratch_and_covers() {
    let mut r = rng(101);
    for trial in 0..200 {
        let k = 1 + trial % 4;
        let m = random_instance(&mut r, 20, 9, 0.2, true);
        let built = dyn_build(&m, k, Coverage::Strict).unwrap();
        assert!(built.medoids.len() >= k);
        assert_eq!(built.loss.penalty, 0.0);
        assert_eq!(built.trace.len(), built.medoids.len());
        for (i, step) in built.trace.iter().enumerate() {
            let scratch = m.evaluate_loss(&built.medoids[..=i]).unwrap();
            assert_eq!(step.penalty, scratch.penalty);
            assert!(common::close(step.dist, scratch.dist, 1e-9), "{step} vs {scratch}");
        }
        // each added medoid is the best single addition
        for i in 1..built.medoids.len() {
            let prefix = &built.medoids[..i];
            let base = m.evaluate_loss(prefix).unwrap();
            let chosen = built.trace[i] - built.trace[i - 1];
            for j in (0..9).filter(|j| !prefix.contains(j)) {
                let mut with = prefix.to_vec();
                with.push(j);
                let gain = m.evaluate_loss(&with).unwrap() - base;
                assert!(
                    chosen.penalty < gain.penalty
                        || (chosen.penalty == gain.penalty && chosen.dist <= gain.dist + 1e-9),
                    "step {i}: chose {chosen}, candidate {j} gives {gain}"
                );
            }
        }
        let again = dyn_build(&m, k, Coverage::Strict).unwrap();
        assert_eq!(again.medoids, built.medoids);
        assert_eq!(again.assignment, built.assignment);
    }
}

#[test]
fn lenient_build_ignores_unreachable_demands() {
    let mut r = rng(102);
    for _ in 0..50 {
        let m = random_instance(&mut r, 15, 6, 0.15, false);
        let isolated = m.isolated_demands();
        let built = dyn_build(&m, 1, Coverage::Lenient).unwrap();
        let expect: f64 = isolated.iter().map(|&o| m.penalty(o)).sum();
        assert_eq!(built.loss.penalty, expect);
        if !isolated.is_empty() {
            assert!(dyn_build(&m, 1, Coverage::Strict).is_err());
        }
    }
}

#[test]
fn sparse_pp_first_draw_proportional() {
    // candidate 0 reaches three demands, candidate 1 one
    let m = SparseCostMatrix::new(4, 2, vec![(0, 0, 1.0), (1, 0, 1.0), (2, 0, 1.0), (3, 1, 1.0)], None).unwrap();
    let runs = 10_000;
    let big = (0..runs)
        .filter(|&s| sparse_pp(&m, 1, s, Coverage::Strict).unwrap()[0] == 0)
        .count() as f64;
    let p = 0.75;
    let sigma = (runs as f64 * p * (1.0 - p)).sqrt();
    assert!((big - runs as f64 * p).abs() <= 3.0 * sigma, "{big}");
}

#[test]
fn sparse_pp_multinomial_frequencies() {
    // disjoint neighborhoods with penalty masses 1, 2, 3 (one demand), 4
    let mut entries = Vec::new();
    let mut pen = Vec::new();
    let mut o = 0;
    for (j, demands) in [vec![1.0], vec![1.0, 1.0], vec![3.0], vec![1.0; 4]].iter().enumerate() {
        for &p in demands {
            entries.push((o, j, 1.0));
            pen.push(p);
            o += 1;
        }
    }
    let m = SparseCostMatrix::new(o, 4, entries, Some(pen)).unwrap();
    let runs = 10_000u64;
    let mut counts = [0f64; 4];
    for s in 0..runs {
        let meds = sparse_pp(&m, 1, s, Coverage::Strict).unwrap();
        assert_eq!(meds.len(), 4);
        counts[meds[0]] += 1.0;
    }
    for (j, c) in counts.iter().enumerate() {
        let p = (j + 1) as f64 / 10.0;
        let sigma = (runs as f64 * p * (1.0 - p)).sqrt();
        assert!((c - runs as f64 * p).abs() <= 3.0 * sigma, "candidate {j}: {c}");
    }
}

#[test]
fn sparse_pp_covers_everything() {
    let mut r = rng(103);
    for trial in 0..200u64 {
        let m = random_instance(&mut r, 25, 12, 0.15, true);
        let k = 1 + (trial % 5) as usize;
        let meds = sparse_pp(&m, k, trial, Coverage::Strict).unwrap();
        assert!(meds.len() >= k);
        assert_eq!(m.evaluate_loss(&meds).unwrap().penalty, 0.0);
        assert_eq!(meds, sparse_pp(&m, k, trial, Coverage::Strict).unwrap());
        let mut s = meds.clone();
        s.sort_unstable();
        s.dedup();
        assert_eq!(s.len(), meds.len());
    }
}
