//! Initial medoid sets: greedy dynamic BUILD, uniform random, and Sparse++.

use log::warn;
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::assignment::Assignment;
use crate::error::{Error, Result};
use crate::loss::LossPair;
use crate::matrix::SparseCostMatrix;
use crate::rng::{seeded, STREAM_INIT};

/// How to treat demands that no candidate can reach.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Coverage {
    /// Unreachable demands are an error.
    #[default]
    Strict,
    /// Unreachable demands are ignored when deciding whether coverage is
    /// complete; they still contribute their penalty to the loss.
    Lenient,
}

/// Returns which demands can be covered at all, or an error in strict mode.
pub(crate) fn coverable_demands(matrix: &SparseCostMatrix, coverage: Coverage) -> Result<Vec<bool>> {
    let isolated = matrix.isolated_demands();
    if let Some(&first) = isolated.first() {
        match coverage {
            Coverage::Strict => return Err(Error::IsolatedDemand { demand: first }),
            Coverage::Lenient => warn!(
                "{} demand(s) unreachable from every candidate; excluded from coverage",
                isolated.len()
            ),
        }
    }
    let mut coverable = vec![true; matrix.n_demand()];
    for o in isolated {
        coverable[o] = false;
    }
    Ok(coverable)
}

#[derive(Debug, Clone)]
pub struct BuildResult {
    pub loss: LossPair,
    /// Medoids in the order they were chosen.
    pub medoids: Vec<usize>,
    pub assignment: Assignment,
    /// Running loss after each chosen medoid.
    pub trace: Vec<LossPair>,
}

/// Greedy BUILD for sparse asymmetric data that keeps adding medoids past `k`
/// until every coverable demand is covered.
///
/// The first medoid minimizes the total loss as a singleton; every further
/// medoid maximizes the loss reduction, where a neighbor contributes only if
/// it gains coverage or gets strictly closer. Ties go to the lowest candidate
/// id. If no candidate improves while fewer than `k` medoids are chosen, the
/// lowest unused candidate is added so the result always has
/// `min(k, m)` medoids or more.
pub fn dyn_build(matrix: &SparseCostMatrix, k: usize, coverage: Coverage) -> Result<BuildResult> {
    let m = matrix.n_candidates();
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("matrix has no candidates".into()));
    }
    let coverable = coverable_demands(matrix, coverage)?;
    let target = k.min(m);

    // first medoid: full loss of every singleton
    let total = matrix.total_penalty();
    let mut loss = LossPair::new(f64::INFINITY, f64::INFINITY);
    let mut first = 0;
    for j in 0..m {
        let mut lj = LossPair::new(total, 0.0);
        for nb in matrix.candidate_neighbors(j) {
            lj += LossPair::new(-matrix.penalty(nb.id), nb.cost);
        }
        if lj < loss {
            loss = lj;
            first = j;
        }
    }

    let mut is_medoid = vec![false; m];
    let mut assignment = Assignment::empty(matrix.n_demand());
    let mut missing = coverable.iter().filter(|&&c| c).count();
    let mut medoids = Vec::with_capacity(target);
    let mut trace = Vec::with_capacity(target);

    let add = |j: usize,
               is_medoid: &mut Vec<bool>,
               assignment: &mut Assignment,
               missing: &mut usize,
               medoids: &mut Vec<usize>| {
        is_medoid[j] = true;
        medoids.push(j);
        for nb in matrix.candidate_neighbors(j) {
            if !assignment.is_covered(nb.id) {
                *missing -= 1;
            }
            assignment.insert(nb.id, j, nb.cost);
        }
    };
    add(first, &mut is_medoid, &mut assignment, &mut missing, &mut medoids);
    trace.push(loss);

    while medoids.len() < m && (medoids.len() < target || missing > 0) {
        let mut best = LossPair::ZERO;
        let mut best_j = None;
        for j in (0..m).filter(|&j| !is_medoid[j]) {
            let mut delta = LossPair::ZERO;
            for nb in matrix.candidate_neighbors(j) {
                let d1 = assignment.d_nearest[nb.id];
                if d1 == f64::INFINITY {
                    delta += LossPair::new(-matrix.penalty(nb.id), nb.cost);
                } else if nb.cost < d1 {
                    delta.dist += nb.cost - d1;
                }
            }
            if delta < best {
                best = delta;
                best_j = Some(j);
            }
        }
        let j = match best_j {
            Some(j) => j,
            // nothing improves: pad up to k with the lowest unused ids
            None if medoids.len() < target => (0..m).find(|&j| !is_medoid[j]).unwrap(),
            None => break,
        };
        loss += best;
        add(j, &mut is_medoid, &mut assignment, &mut missing, &mut medoids);
        trace.push(loss);
    }

    Ok(BuildResult {
        loss,
        medoids,
        assignment,
        trace,
    })
}

/// Size of a uniform random initialization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RandomSize {
    /// Fraction of the candidates, rounded up.
    Fraction(f64),
    Count(usize),
}

impl RandomSize {
    pub fn resolve(self, m: usize) -> usize {
        match self {
            // absorb representation error of fractions like 0.05 * 20
            RandomSize::Fraction(p) => (p * m as f64 - 1e-9).ceil().max(0.0) as usize,
            RandomSize::Count(c) => c,
        }
    }
}

/// Uniform sample of candidates without replacement. No coverage guarantee.
pub fn random_init(matrix: &SparseCostMatrix, size: RandomSize, seed: u64) -> Result<Vec<usize>> {
    let m = matrix.n_candidates();
    let count = size.resolve(m);
    if count == 0 || count > m {
        return Err(Error::InvalidCount { count, n_candidates: m });
    }
    let mut rng = seeded(seed, STREAM_INIT);
    Ok(index::sample(&mut rng, m, count).into_vec())
}

/// k-means++-style seeding for sparse data: each draw picks a candidate with
/// probability proportional to the penalty mass of the still-uncovered
/// demands it reaches. Draws continue until at least `k` centers are chosen
/// and every coverable demand is covered.
pub fn sparse_pp(matrix: &SparseCostMatrix, k: usize, seed: u64, coverage: Coverage) -> Result<Vec<usize>> {
    let m = matrix.n_candidates();
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("matrix has no candidates".into()));
    }
    let coverable = coverable_demands(matrix, coverage)?;
    let target = k.min(m);
    let mut rng = seeded(seed, STREAM_INIT);
    let mut covered = vec![false; matrix.n_demand()];
    let mut missing = coverable.iter().filter(|&&c| c).count();
    let mut chosen = vec![false; m];
    let mut medoids = Vec::new();
    let mut weights = vec![0.0; m];

    while medoids.len() < m && (medoids.len() < target || missing > 0) {
        let mut total = 0.0;
        for j in 0..m {
            weights[j] = if chosen[j] {
                0.0
            } else {
                matrix
                    .candidate_neighbors(j)
                    .iter()
                    .filter(|nb| !covered[nb.id])
                    .map(|nb| matrix.penalty(nb.id))
                    .sum()
            };
            total += weights[j];
        }
        let j = if total > 0.0 {
            draw_proportional(&weights, total, &mut rng)
        } else if medoids.len() < target {
            // coverage complete before k: fill uniformly
            let free: Vec<usize> = (0..m).filter(|&j| !chosen[j]).collect();
            free[rng.random_range(0..free.len())]
        } else {
            break;
        };
        chosen[j] = true;
        medoids.push(j);
        for nb in matrix.candidate_neighbors(j) {
            if !covered[nb.id] {
                covered[nb.id] = true;
                missing -= 1;
            }
        }
    }
    Ok(medoids)
}

/// Index drawn with probability `weights[i] / total`; zero weights are never drawn.
fn draw_proportional<R: Rng>(weights: &[f64], total: f64, rng: &mut R) -> usize {
    let r = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = i;
        if r < acc {
            return i;
        }
    }
    last
}

#[cfg(test)]
mod tests {
    use super::*;

    fn star() -> SparseCostMatrix {
        // candidate 1 reaches all demands
        SparseCostMatrix::new(3, 2, vec![(0, 0, 1.0), (0, 1, 2.0), (1, 1, 2.0), (2, 1, 2.0)], None).unwrap()
    }

    fn two_components() -> SparseCostMatrix {
        SparseCostMatrix::new(4, 2, vec![(0, 0, 1.0), (1, 0, 1.0), (2, 1, 1.0), (3, 1, 2.0)], None).unwrap()
    }

    #[test]
    fn single_cover_candidate() {
        let r = dyn_build(&star(), 1, Coverage::Strict).unwrap();
        assert_eq!(r.medoids, vec![1]);
        assert_eq!(r.loss, LossPair::new(0.0, 6.0));
    }

    #[test]
    fn k_grows_until_covered() {
        let r = dyn_build(&two_components(), 1, Coverage::Strict).unwrap();
        assert_eq!(r.medoids, vec![0, 1]);
        assert_eq!(r.loss, LossPair::new(0.0, 5.0));
        assert_eq!(r.trace, vec![LossPair::new(2.0, 2.0), LossPair::new(0.0, 5.0)]);
    }

    #[test]
    fn pads_to_k_when_nothing_improves() {
        let r = dyn_build(&star(), 2, Coverage::Strict).unwrap();
        // candidate 0 improves demand 0 from 2 to 1
        assert_eq!(r.medoids, vec![1, 0]);
        let m = SparseCostMatrix::new(1, 3, vec![(0, 1, 1.0)], None).unwrap();
        let r = dyn_build(&m, 3, Coverage::Strict).unwrap();
        assert_eq!(r.medoids, vec![1, 0, 2]);
        assert_eq!(r.loss, LossPair::new(0.0, 1.0));
    }

    #[test]
    fn isolated_demand_handling() {
        let m = SparseCostMatrix::new(3, 1, vec![(0, 0, 1.0), (1, 0, 1.0)], None).unwrap();
        assert_eq!(
            dyn_build(&m, 1, Coverage::Strict).unwrap_err(),
            Error::IsolatedDemand { demand: 2 }
        );
        let r = dyn_build(&m, 1, Coverage::Lenient).unwrap();
        assert_eq!(r.medoids, vec![0]);
        assert_eq!(r.loss, LossPair::new(1.0, 2.0));
        assert!(sparse_pp(&m, 1, 0, Coverage::Strict).is_err());
        assert_eq!(sparse_pp(&m, 1, 0, Coverage::Lenient).unwrap(), vec![0]);
    }

    #[test]
    fn bad_arguments() {
        assert!(dyn_build(&star(), 0, Coverage::Strict).is_err());
        let empty = SparseCostMatrix::new(0, 0, vec![], None).unwrap();
        assert!(dyn_build(&empty, 1, Coverage::Strict).is_err());
    }

    #[test]
    fn random_sizes() {
        let entries: Vec<_> = (0..20).map(|j| (0, j, 1.0)).collect();
        let m = SparseCostMatrix::new(1, 20, entries, None).unwrap();
        let mut all = random_init(&m, RandomSize::Fraction(1.0), 3).unwrap();
        all.sort_unstable();
        assert_eq!(all, (0..20).collect::<Vec<_>>());
        assert_eq!(random_init(&m, RandomSize::Fraction(0.05), 3).unwrap().len(), 1);
        assert_eq!(random_init(&m, RandomSize::Fraction(0.10), 3).unwrap().len(), 2);
        assert_eq!(
            random_init(&m, RandomSize::Count(5), 9).unwrap(),
            random_init(&m, RandomSize::Count(5), 9).unwrap()
        );
        assert!(random_init(&m, RandomSize::Count(0), 3).is_err());
        assert!(random_init(&m, RandomSize::Count(21), 3).is_err());
        assert!(random_init(&m, RandomSize::Fraction(0.0), 3).is_err());
    }

    #[test]
    fn sparse_pp_single_cover() {
        // candidate 0 reaches nothing, so it carries no weight
        let m = SparseCostMatrix::new(3, 2, vec![(0, 1, 1.0), (1, 1, 2.0), (2, 1, 2.0)], None).unwrap();
        for seed in 0..20 {
            assert_eq!(sparse_pp(&m, 1, seed, Coverage::Strict).unwrap(), vec![1]);
        }
    }

    #[test]
    fn sparse_pp_covers_and_reaches_k() {
        for seed in 0..20 {
            let meds = sparse_pp(&two_components(), 1, seed, Coverage::Strict).unwrap();
            let mut s = meds.clone();
            s.sort_unstable();
            assert_eq!(s, vec![0, 1]);
            let meds = sparse_pp(&star(), 2, seed, Coverage::Strict).unwrap();
            assert_eq!(meds.len(), 2);
        }
    }

    #[test]
    fn draw_skips_zero_weights() {
        let mut rng = seeded(1, 0);
        for _ in 0..1000 {
            let i = draw_proportional(&[0.0, 2.0, 0.0, 1.0, 0.0], 3.0, &mut rng);
            assert!(i == 1 || i == 3);
        }
    }
}
