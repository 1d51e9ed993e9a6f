//! Yardsticks: a dense FasterPAM baseline, an exhaustive oracle for small
//! sparse instances, and the classic central points of a 2-D point set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::LossPair;
use crate::matrix::SparseCostMatrix;
use crate::rng::candidate_order;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseResult {
    /// Total deviation: sum of each point's cost to its nearest medoid.
    pub total_deviation: f64,
    pub medoids: Vec<usize>,
    pub sweeps: usize,
    pub swaps: usize,
}

#[derive(Debug, Clone, Copy)]
struct Nearest {
    slot: usize,
    d: f64,
}

const NONE: Nearest = Nearest {
    slot: usize::MAX,
    d: f64::INFINITY,
};

/// FasterPAM on a dense square cost matrix (`dense[o][j]` = cost of point `o`
/// to medoid `j`) from a seeded random start.
pub fn dense_fasterpam(dense: &[Vec<f64>], k: usize, seed: u64) -> Result<DenseResult> {
    let n = check_dense(dense)?;
    if k == 0 || k > n {
        return Err(Error::InvalidCount {
            count: k,
            n_candidates: n,
        });
    }
    let mut rng = crate::rng::seeded(seed, crate::rng::STREAM_INIT);
    let init = rand::seq::index::sample(&mut rng, n, k).into_vec();
    dense_fasterpam_from(dense, &init, seed, 100)
}

/// FasterPAM from given medoids, visiting candidates in the order
/// [`candidate_order`] derives from `seed`.
pub fn dense_fasterpam_from(dense: &[Vec<f64>], init: &[usize], seed: u64, max_sweeps: usize) -> Result<DenseResult> {
    let n = check_dense(dense)?;
    let k = init.len();
    if k == 0 || k > n {
        return Err(Error::InvalidCount {
            count: k,
            n_candidates: n,
        });
    }
    let mut medoids = init.to_vec();
    let mut is_medoid = vec![false; n];
    for &j in &medoids {
        if j >= n || is_medoid[j] {
            return Err(Error::InvalidArgument(format!("bad initial medoid {j}")));
        }
        is_medoid[j] = true;
    }

    let mut near = vec![NONE; n];
    let mut second = vec![NONE; n];
    for o in 0..n {
        assign_point(dense, &medoids, o, &mut near[o], &mut second[o]);
    }
    let mut td: f64 = near.iter().map(|r| r.d).sum();
    let mut removal = dense_removal(&near, &second, k);
    let mut ploss = vec![0.0; k];

    let order = candidate_order(n, seed);
    let mut last = None;
    let mut sweeps = 0;
    let mut swaps = 0;
    'outer: while sweeps < max_sweeps {
        sweeps += 1;
        for &c in &order {
            if last == Some(c) {
                break 'outer;
            }
            if is_medoid[c] {
                continue;
            }
            ploss.copy_from_slice(&removal);
            let mut acc = 0.0;
            for o in 0..n {
                let djo = dense[o][c];
                let (nr, sr) = (near[o], second[o]);
                if djo < nr.d {
                    acc += djo - nr.d;
                    ploss[nr.slot] += if sr.d == f64::INFINITY { nr.d } else { nr.d - sr.d };
                } else if sr.d == f64::INFINITY {
                    ploss[nr.slot] += djo;
                } else if djo < sr.d {
                    ploss[nr.slot] += djo - sr.d;
                }
            }
            let mut best = 0;
            for i in 1..k {
                if ploss[i] < ploss[best] {
                    best = i;
                }
            }
            let delta = ploss[best] + acc;
            if delta < 0.0 {
                is_medoid[medoids[best]] = false;
                is_medoid[c] = true;
                medoids[best] = c;
                for o in 0..n {
                    let djo = dense[o][c];
                    if near[o].slot == best || second[o].slot == best {
                        assign_point(dense, &medoids, o, &mut near[o], &mut second[o]);
                    } else if djo < near[o].d {
                        second[o] = near[o];
                        near[o] = Nearest { slot: best, d: djo };
                    } else if djo < second[o].d {
                        second[o] = Nearest { slot: best, d: djo };
                    }
                }
                td += delta;
                removal = dense_removal(&near, &second, k);
                swaps += 1;
                last = Some(c);
            }
        }
        if last.is_none() {
            break;
        }
    }
    Ok(DenseResult {
        total_deviation: td,
        medoids,
        sweeps,
        swaps,
    })
}

fn check_dense(dense: &[Vec<f64>]) -> Result<usize> {
    let n = dense.len();
    for row in dense {
        if row.len() != n {
            return Err(Error::InvalidArgument("dense matrix must be square".into()));
        }
        if row.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::InvalidArgument(
                "dense costs must be finite and non-negative".into(),
            ));
        }
    }
    Ok(n)
}

fn assign_point(dense: &[Vec<f64>], medoids: &[usize], o: usize, near: &mut Nearest, second: &mut Nearest) {
    *near = NONE;
    *second = NONE;
    for (slot, &j) in medoids.iter().enumerate() {
        let d = dense[o][j];
        if d < near.d {
            *second = *near;
            *near = Nearest { slot, d };
        } else if d < second.d {
            *second = Nearest { slot, d };
        }
    }
}

fn dense_removal(near: &[Nearest], second: &[Nearest], k: usize) -> Vec<f64> {
    let mut r = vec![0.0; k];
    for (nr, sr) in near.iter().zip(second) {
        // with k = 1 there is no second medoid: the point simply leaves
        r[nr.slot] += if sr.d == f64::INFINITY { -nr.d } else { sr.d - nr.d };
    }
    r
}

/// Largest candidate count accepted by [`brute_force`].
pub const BRUTE_FORCE_LIMIT: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimumAtK {
    pub k: usize,
    pub loss: LossPair,
    pub medoids: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BruteForceResult {
    /// Smallest medoid count covering every demand; `None` if some demand is
    /// unreachable.
    pub min_feasible_k: Option<usize>,
    /// Exact optimum for each `k` in `1..=min(k_max, m)`. The witness is the
    /// first optimal subset in lexicographic order.
    pub optima: Vec<OptimumAtK>,
}

/// Exhaustive search over candidate subsets. Limited to `m <= 20`.
pub fn brute_force(matrix: &SparseCostMatrix, k_max: usize) -> Result<BruteForceResult> {
    let m = matrix.n_candidates();
    let n = matrix.n_demand();
    if m > BRUTE_FORCE_LIMIT {
        return Err(Error::TooManyCandidates {
            m,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let mut dense = vec![f64::INFINITY; n * m];
    for (o, j, c) in matrix.entries() {
        dense[o * m + j] = c;
    }

    let mut optima = Vec::new();
    for k in 1..=k_max.min(m) {
        let mut best = LossPair::new(f64::INFINITY, f64::INFINITY);
        let mut witness = Vec::new();
        for_each_subset(m, k, |subset| {
            let mut loss = LossPair::ZERO;
            for o in 0..n {
                let row = &dense[o * m..(o + 1) * m];
                let d = subset.iter().map(|&j| row[j]).fold(f64::INFINITY, f64::min);
                if d == f64::INFINITY {
                    loss.penalty += matrix.penalty(o);
                } else {
                    loss.dist += d;
                }
            }
            if loss < best {
                best = loss;
                witness = subset.to_vec();
            }
        });
        optima.push(OptimumAtK {
            k,
            loss: best,
            medoids: witness,
        });
    }

    Ok(BruteForceResult {
        min_feasible_k: min_cover_size(matrix),
        optima,
    })
}

/// Smallest number of candidates covering all demands (exhaustive, m <= 20).
fn min_cover_size(matrix: &SparseCostMatrix) -> Option<usize> {
    let m = matrix.n_candidates();
    let n = matrix.n_demand();
    if n == 0 {
        return Some(0);
    }
    if !matrix.isolated_demands().is_empty() {
        return None;
    }
    let words = n.div_ceil(64);
    let masks: Vec<Vec<u64>> = (0..m)
        .map(|j| {
            let mut w = vec![0u64; words];
            for nb in matrix.candidate_neighbors(j) {
                w[nb.id / 64] |= 1 << (nb.id % 64);
            }
            w
        })
        .collect();
    let mut full = vec![u64::MAX; words];
    if !n.is_multiple_of(64) {
        full[words - 1] = (1u64 << (n % 64)) - 1;
    }
    let mut acc = vec![0u64; words];
    for k in 1..=m {
        let mut found = false;
        for_each_subset(m, k, |subset| {
            if found {
                return;
            }
            acc.iter_mut().for_each(|w| *w = 0);
            for &j in subset {
                for (a, b) in acc.iter_mut().zip(&masks[j]) {
                    *a |= b;
                }
            }
            found = acc == full;
        });
        if found {
            return Some(k);
        }
    }
    None
}

/// Visit all `k`-subsets of `0..m` in lexicographic order.
fn for_each_subset<F: FnMut(&[usize])>(m: usize, k: usize, mut f: F) {
    if k > m {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        // rightmost position that can still advance
        let mut i = k;
        while i > 0 && idx[i - 1] == m - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for t in i..k {
            idx[t] = idx[t - 1] + 1;
        }
    }
}

/// A center with its L2, squared L2 and L1 distance sums to all points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CenterSums {
    pub point: [f64; 2],
    pub l2: f64,
    pub l2_sq: f64,
    pub l1: f64,
}

impl CenterSums {
    fn new(point: [f64; 2], points: &[[f64; 2]]) -> Self {
        let mut s = CenterSums {
            point,
            l2: 0.0,
            l2_sq: 0.0,
            l1: 0.0,
        };
        for p in points {
            let (dx, dy) = (p[0] - point[0], p[1] - point[1]);
            let sq = dx * dx + dy * dy;
            s.l2 += sq.sqrt();
            s.l2_sq += sq;
            s.l1 += dx.abs() + dy.abs();
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CentralPoints {
    pub mean: CenterSums,
    pub median: CenterSums,
    pub geometric_median: CenterSums,
    pub medoid: CenterSums,
}

/// Arithmetic mean, per-axis median, geometric median (Weiszfeld) and
/// Euclidean medoid of a 2-D point set, each with its distance sums.
pub fn central_points(points: &[[f64; 2]]) -> Result<CentralPoints> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("no points".into()));
    }
    let n = points.len() as f64;
    let mean = [
        points.iter().map(|p| p[0]).sum::<f64>() / n,
        points.iter().map(|p| p[1]).sum::<f64>() / n,
    ];
    let median = [axis_median(points, 0), axis_median(points, 1)];
    let gmed = weiszfeld(points, mean, 1e-9);
    let medoid = points
        .iter()
        .map(|&p| CenterSums::new(p, points))
        .fold(None, |best: Option<CenterSums>, c| match best {
            Some(b) if b.l2 <= c.l2 => Some(b),
            _ => Some(c),
        })
        .unwrap();
    Ok(CentralPoints {
        mean: CenterSums::new(mean, points),
        median: CenterSums::new(median, points),
        geometric_median: CenterSums::new(gmed, points),
        medoid,
    })
}

fn axis_median(points: &[[f64; 2]], axis: usize) -> f64 {
    let mut v: Vec<f64> = points.iter().map(|p| p[axis]).collect();
    v.sort_by(f64::total_cmp);
    let h = v.len() / 2;
    if v.len() % 2 == 1 {
        v[h]
    } else {
        0.5 * (v[h - 1] + v[h])
    }
}

/// Weiszfeld iteration until the step is below `tol`. If an iterate hits a
/// data point exactly it is nudged off by a tiny offset and the iteration
/// continues.
fn weiszfeld(points: &[[f64; 2]], start: [f64; 2], tol: f64) -> [f64; 2] {
    let scale = points.iter().map(|p| p[0].abs().max(p[1].abs())).fold(1.0, f64::max);
    let nudge = 1e-10 * scale;
    let mut y = start;
    for _ in 0..100_000 {
        let (mut wx, mut wy, mut wsum) = (0.0, 0.0, 0.0);
        let mut on_point = false;
        for p in points {
            let d = ((p[0] - y[0]).powi(2) + (p[1] - y[1]).powi(2)).sqrt();
            if d == 0.0 {
                on_point = true;
                break;
            }
            wx += p[0] / d;
            wy += p[1] / d;
            wsum += 1.0 / d;
        }
        if on_point {
            if points.iter().all(|p| *p == points[0]) {
                return points[0];
            }
            y = [y[0] + nudge, y[1] + nudge];
            continue;
        }
        let next = [wx / wsum, wy / wsum];
        let step = ((next[0] - y[0]).powi(2) + (next[1] - y[1]).powi(2)).sqrt();
        y = next;
        if step < tol {
            break;
        }
    }
    y
}
