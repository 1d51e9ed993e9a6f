#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparse_medoids::{LossPair, SparseCostMatrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random sparse instance; every demand gets at least one candidate when
/// `coverable` is set. Penalties are small integers so sums stay exact.
pub fn random_instance(rng: &mut ChaCha8Rng, n: usize, m: usize, density: f64, coverable: bool) -> SparseCostMatrix {
    let mut entries = Vec::new();
    for o in 0..n {
        let forced = if coverable { Some(rng.random_range(0..m)) } else { None };
        for j in 0..m {
            if Some(j) == forced || rng.random_bool(density) {
                entries.push((o, j, rng.random_range(0.0..10.0)));
            }
        }
    }
    let pen: Vec<f64> = (0..n).map(|_| rng.random_range(1..4) as f64).collect();
    SparseCostMatrix::new(n, m, entries, Some(pen)).unwrap()
}

/// Dense matrix with infinity for missing entries.
pub fn dense(matrix: &SparseCostMatrix) -> Vec<Vec<f64>> {
    let mut d = vec![vec![f64::INFINITY; matrix.n_candidates()]; matrix.n_demand()];
    for (o, j, c) in matrix.entries() {
        d[o][j] = c;
    }
    d
}

/// Loss from a dense matrix by direct double loop.
pub fn dense_loss(matrix: &SparseCostMatrix, medoids: &[usize]) -> LossPair {
    let d = dense(matrix);
    let mut loss = LossPair::ZERO;
    for (o, row) in d.iter().enumerate() {
        let best = medoids.iter().map(|&j| row[j]).fold(f64::INFINITY, f64::min);
        if best == f64::INFINITY {
            loss.penalty += matrix.penalty(o);
        } else {
            loss.dist += best;
        }
    }
    loss
}

/// Smallest subset size covering every demand, by enumeration.
pub fn min_cover(matrix: &SparseCostMatrix) -> Option<usize> {
    let m = matrix.n_candidates();
    let d = dense(matrix);
    (1..=m).find(|&k| {
        (0u64..1 << m)
            .filter(|mask| mask.count_ones() as usize == k)
            .any(|mask| {
                d.iter()
                    .all(|row| (0..m).any(|j| mask & (1 << j) != 0 && row[j].is_finite()))
            })
    })
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    a == b || (a - b).abs() <= rel * a.abs().max(b.abs())
}
