//! Eager swap local search over sparse asymmetric costs with dynamic k.
//!
//! The search keeps, per demand, the nearest medoid and the nearest and
//! second-nearest costs, plus the loss change of removing each medoid. For a
//! candidate `c` only the demands reachable from `c` are visited: a shared
//! accumulator collects the change that applies whichever medoid is replaced
//! (this is exactly the change of adding `c` as an extra medoid), and a
//! per-slot correction is applied to the removal loss of the nearest medoid.
//! The first strictly improving swap is executed.
//!
//! Two optional rules let the number of medoids move:
//! * decrease: after an executed swap, if some medoid can be removed without
//!   uncovering a demand, the medoid with the smallest removal loss is
//!   dropped (at most one per swap);
//! * increase: if a candidate is no improving swap but adding it covers at
//!   least one uncovered demand, it becomes an additional medoid.

use serde::{Deserialize, Serialize};

use crate::assignment::Assignment;
use crate::error::{Error, Result};
use crate::loss::LossPair;
use crate::matrix::SparseCostMatrix;
use crate::rng::candidate_order;

const NO_SLOT: usize = usize::MAX;

/// Which dynamic-k rules are enabled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DynMode {
    None,
    Down,
    Up,
    Both,
}

impl DynMode {
    pub fn allow_decrease(self) -> bool {
        matches!(self, DynMode::Down | DynMode::Both)
    }

    pub fn allow_increase(self) -> bool {
        matches!(self, DynMode::Up | DynMode::Both)
    }

    pub fn from_flags(decrease: bool, increase: bool) -> Self {
        match (decrease, increase) {
            (false, false) => DynMode::None,
            (true, false) => DynMode::Down,
            (false, true) => DynMode::Up,
            (true, true) => DynMode::Both,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DynMode::None => "none",
            DynMode::Down => "down",
            DynMode::Up => "up",
            DynMode::Both => "both",
        }
    }
}

impl std::str::FromStr for DynMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(DynMode::None),
            "down" => Ok(DynMode::Down),
            "up" => Ok(DynMode::Up),
            "both" => Ok(DynMode::Both),
            _ => Err(Error::InvalidArgument(format!("unknown dyn mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwapConfig {
    pub allow_decrease: bool,
    pub allow_increase: bool,
    /// Seeds the candidate visiting order.
    pub seed: u64,
    /// Upper bound on passes over the candidates.
    pub max_sweeps: usize,
    /// Cross-check every cache against a full recomputation after each
    /// mutation. Slow; meant for tests and debugging.
    pub verify: bool,
}

impl Default for SwapConfig {
    fn default() -> Self {
        SwapConfig {
            allow_decrease: false,
            allow_increase: false,
            seed: 0,
            max_sweeps: 100,
            verify: false,
        }
    }
}

impl SwapConfig {
    pub fn with_mode(mode: DynMode, seed: u64) -> Self {
        SwapConfig {
            allow_decrease: mode.allow_decrease(),
            allow_increase: mode.allow_increase(),
            seed,
            ..SwapConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwapStats {
    pub sweeps: usize,
    pub swaps: usize,
    pub removals: usize,
    pub additions: usize,
    /// Set when `max_sweeps` ran out before convergence.
    pub truncated: bool,
}

impl SwapStats {
    pub fn medoid_changes(&self) -> usize {
        self.swaps + self.removals + self.additions
    }
}

#[derive(Debug, Clone)]
pub struct SwapResult {
    pub loss: LossPair,
    pub medoids: Vec<usize>,
    pub assignment: Assignment,
    pub stats: SwapStats,
}

/// Loss changes of replacing each medoid slot with one candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateEval {
    /// Loss change of adding the candidate as an extra medoid.
    pub add_delta: LossPair,
    /// Slot with the best swap, if any medoid exists.
    pub best_slot: Option<usize>,
    /// Loss change of swapping the candidate into `best_slot`.
    pub swap_delta: LossPair,
}

/// Mutable search state: medoids by slot plus incrementally maintained
/// caches.
#[derive(Debug, Clone)]
pub struct SwapState<'a> {
    matrix: &'a SparseCostMatrix,
    medoids: Vec<usize>,
    slot_of: Vec<usize>,
    is_medoid: Vec<bool>,
    assignment: Assignment,
    removal: Vec<LossPair>,
    loss: LossPair,
    scratch: Vec<LossPair>,
}

impl<'a> SwapState<'a> {
    /// Set up caches for `medoids` from scratch. An empty list is allowed here.
    pub fn new(matrix: &'a SparseCostMatrix, medoids: &[usize]) -> Result<Self> {
        let m = matrix.n_candidates();
        let mut slot_of = vec![NO_SLOT; m];
        let mut is_medoid = vec![false; m];
        for (i, &j) in medoids.iter().enumerate() {
            if j >= m {
                return Err(Error::CandidateOutOfRange {
                    candidate: j,
                    n_candidates: m,
                });
            }
            if is_medoid[j] {
                return Err(Error::DuplicateMedoid(j));
            }
            is_medoid[j] = true;
            slot_of[j] = i;
        }
        let assignment = Assignment::compute(matrix, &is_medoid);
        let loss = loss_of(matrix, &assignment);
        let mut state = SwapState {
            matrix,
            medoids: medoids.to_vec(),
            slot_of,
            is_medoid,
            assignment,
            removal: Vec::new(),
            loss,
            scratch: Vec::new(),
        };
        state.update_removal();
        Ok(state)
    }

    pub fn loss(&self) -> LossPair {
        self.loss
    }

    pub fn medoids(&self) -> &[usize] {
        &self.medoids
    }

    pub fn k(&self) -> usize {
        self.medoids.len()
    }

    pub fn assignment(&self) -> &Assignment {
        &self.assignment
    }

    /// Removal loss per medoid slot.
    pub fn removal(&self) -> &[LossPair] {
        &self.removal
    }

    #[inline]
    pub fn is_medoid(&self, j: usize) -> bool {
        self.is_medoid[j]
    }

    /// Loss changes for candidate `c` (not currently a medoid), visiting only
    /// the demands `c` reaches.
    pub fn evaluate(&mut self, c: usize) -> CandidateEval {
        debug_assert!(!self.is_medoid[c]);
        let matrix = self.matrix;
        let a = &self.assignment;
        self.scratch.clear();
        self.scratch.extend_from_slice(&self.removal);
        let mut acc = LossPair::ZERO;
        for nb in matrix.candidate_neighbors(c) {
            let o = nb.id;
            let d_oc = nb.cost;
            let (d1, d2) = (a.d_nearest[o], a.d_second[o]);
            if d1 == f64::INFINITY {
                // not covered yet
                acc += LossPair::new(-matrix.penalty(o), d_oc);
                continue;
            }
            let s = self.slot_of[a.nearest[o].expect("covered demand has a nearest medoid")];
            if d_oc < d1 {
                // new nearest; cancel the removal loss already booked for s
                acc.dist += d_oc - d1;
                if d2 == f64::INFINITY {
                    self.scratch[s] += LossPair::new(-matrix.penalty(o), d1);
                } else {
                    self.scratch[s].dist += d1 - d2;
                }
            } else if d2 == f64::INFINITY {
                self.scratch[s] += LossPair::new(-matrix.penalty(o), d_oc);
            } else if d_oc < d2 {
                self.scratch[s].dist += d_oc - d2;
            }
        }
        let mut best_slot = None;
        let mut best = LossPair::new(f64::INFINITY, f64::INFINITY);
        for (i, d) in self.scratch.iter().enumerate() {
            if *d < best {
                best = *d;
                best_slot = Some(i);
            }
        }
        CandidateEval {
            add_delta: acc,
            best_slot,
            swap_delta: best + acc,
        }
    }

    /// Add candidate `c` as an extra medoid.
    pub fn add(&mut self, c: usize) -> Result<LossPair> {
        self.check_candidate(c)?;
        if self.is_medoid[c] {
            return Err(Error::DuplicateMedoid(c));
        }
        let delta = self.add_delta(c);
        self.attach(c, self.medoids.len());
        self.medoids.push(c);
        self.loss += delta;
        self.update_removal();
        Ok(delta)
    }

    /// Remove the medoid in `slot`; the last slot moves into its place.
    pub fn remove(&mut self, slot: usize) -> Result<LossPair> {
        if slot >= self.medoids.len() {
            return Err(Error::InvalidArgument(format!("no medoid slot {slot}")));
        }
        let delta = self.removal[slot];
        let c = self.medoids[slot];
        self.detach(c);
        self.medoids.swap_remove(slot);
        if slot < self.medoids.len() {
            self.slot_of[self.medoids[slot]] = slot;
        }
        self.loss += delta;
        self.update_removal();
        Ok(delta)
    }

    /// Replace the medoid in `slot` with candidate `c`.
    pub fn swap(&mut self, slot: usize, c: usize) -> Result<LossPair> {
        self.check_candidate(c)?;
        if slot >= self.medoids.len() {
            return Err(Error::InvalidArgument(format!("no medoid slot {slot}")));
        }
        if self.is_medoid[c] {
            return Err(Error::DuplicateMedoid(c));
        }
        let eval = self.evaluate(c);
        let delta = self.scratch[slot] + eval.add_delta;
        self.apply_swap(slot, c, delta);
        Ok(delta)
    }

    fn apply_swap(&mut self, slot: usize, c: usize, delta: LossPair) {
        let old = self.medoids[slot];
        self.detach(old);
        self.attach(c, slot);
        self.medoids[slot] = c;
        self.loss += delta;
        self.update_removal();
    }

    fn check_candidate(&self, c: usize) -> Result<()> {
        if c >= self.matrix.n_candidates() {
            return Err(Error::CandidateOutOfRange {
                candidate: c,
                n_candidates: self.matrix.n_candidates(),
            });
        }
        Ok(())
    }

    fn add_delta(&self, c: usize) -> LossPair {
        let mut acc = LossPair::ZERO;
        for nb in self.matrix.candidate_neighbors(c) {
            let d1 = self.assignment.d_nearest[nb.id];
            if d1 == f64::INFINITY {
                acc += LossPair::new(-self.matrix.penalty(nb.id), nb.cost);
            } else if nb.cost < d1 {
                acc.dist += nb.cost - d1;
            }
        }
        acc
    }

    /// Mark `c` as medoid in `slot` and fold it into the caches of its demands.
    fn attach(&mut self, c: usize, slot: usize) {
        self.is_medoid[c] = true;
        self.slot_of[c] = slot;
        for nb in self.matrix.candidate_neighbors(c) {
            self.assignment.insert(nb.id, c, nb.cost);
        }
    }

    /// Unmark `c`; demands for which it was nearest or possibly second
    /// nearest are rescanned.
    fn detach(&mut self, c: usize) {
        self.is_medoid[c] = false;
        self.slot_of[c] = NO_SLOT;
        for nb in self.matrix.candidate_neighbors(c) {
            let o = nb.id;
            if self.assignment.nearest[o] == Some(c) || nb.cost <= self.assignment.d_second[o] {
                self.assignment.rescan(self.matrix, &self.is_medoid, o);
            }
        }
    }

    fn update_removal(&mut self) {
        self.removal = removal_losses_by_slot(self.matrix, &self.assignment, &self.slot_of, self.medoids.len());
    }

    /// Compare every incrementally maintained quantity with a from-scratch
    /// recomputation. Penalties must match exactly, distances within
    /// `rel_tol` relative to the larger of the two values and the largest
    /// stored cost (sums that cancel to zero carry rounding noise of that
    /// order).
    pub fn check_consistency(&self, rel_tol: f64) -> Result<()> {
        let fresh = refresh_caches(self.matrix, &self.medoids)?;
        let scale = self.matrix.max_cost();
        self.assignment.validate().map_err(Error::CacheMismatch)?;
        self.assignment.matches(&fresh, rel_tol).map_err(Error::CacheMismatch)?;
        let scratch_removal = removal_losses(self.matrix, &fresh, &self.medoids)?;
        for (i, (a, b)) in self.removal.iter().zip(&scratch_removal).enumerate() {
            if !pair_close(*a, *b, rel_tol, scale) {
                return Err(Error::CacheMismatch(format!("removal loss of slot {i}: {a} vs {b}")));
            }
        }
        let scratch_loss = self.matrix.evaluate_loss(&self.medoids)?;
        if !pair_close(self.loss, scratch_loss, rel_tol, scale) {
            return Err(Error::CacheMismatch(format!("loss {} vs {}", self.loss, scratch_loss)));
        }
        Ok(())
    }

    pub fn into_result(self, stats: SwapStats) -> SwapResult {
        SwapResult {
            loss: self.loss,
            medoids: self.medoids,
            assignment: self.assignment,
            stats,
        }
    }
}

/// Penalty exact, distance within `rel_tol` relative to the larger magnitude
/// (at least `scale`).
fn pair_close(a: LossPair, b: LossPair, rel_tol: f64, scale: f64) -> bool {
    a.penalty == b.penalty
        && (a.dist == b.dist || (a.dist - b.dist).abs() <= rel_tol * a.dist.abs().max(b.dist.abs()).max(scale))
}

fn loss_of(matrix: &SparseCostMatrix, a: &Assignment) -> LossPair {
    let mut loss = LossPair::ZERO;
    for o in 0..a.len() {
        if a.nearest[o].is_some() {
            loss.dist += a.d_nearest[o];
        } else {
            loss.penalty += matrix.penalty(o);
        }
    }
    loss
}

fn removal_losses_by_slot(matrix: &SparseCostMatrix, a: &Assignment, slot_of: &[usize], k: usize) -> Vec<LossPair> {
    let mut out = vec![LossPair::ZERO; k];
    for o in 0..a.len() {
        let Some(n1) = a.nearest[o] else { continue };
        let r = &mut out[slot_of[n1]];
        if a.d_second[o] == f64::INFINITY {
            *r += LossPair::new(matrix.penalty(o), -a.d_nearest[o]);
        } else {
            r.dist += a.d_second[o] - a.d_nearest[o];
        }
    }
    out
}

/// Loss change of removing each medoid (indexed like `medoids`), computed
/// from an assignment consistent with `medoids`.
pub fn removal_losses(matrix: &SparseCostMatrix, assignment: &Assignment, medoids: &[usize]) -> Result<Vec<LossPair>> {
    let mut slot_of = vec![NO_SLOT; matrix.n_candidates()];
    for (i, &j) in medoids.iter().enumerate() {
        if j >= matrix.n_candidates() {
            return Err(Error::CandidateOutOfRange {
                candidate: j,
                n_candidates: matrix.n_candidates(),
            });
        }
        slot_of[j] = i;
    }
    if let Some(o) = (0..assignment.len()).find(|&o| assignment.nearest[o].is_some_and(|n| slot_of[n] == NO_SLOT)) {
        return Err(Error::InvalidArgument(format!("demand {o} assigned to a non-medoid")));
    }
    Ok(removal_losses_by_slot(matrix, assignment, &slot_of, medoids.len()))
}

/// Nearest / second-nearest caches for `medoids` recomputed from scratch.
pub fn refresh_caches(matrix: &SparseCostMatrix, medoids: &[usize]) -> Result<Assignment> {
    let mut is_medoid = vec![false; matrix.n_candidates()];
    for &j in medoids {
        if j >= matrix.n_candidates() {
            return Err(Error::CandidateOutOfRange {
                candidate: j,
                n_candidates: matrix.n_candidates(),
            });
        }
        is_medoid[j] = true;
    }
    Ok(Assignment::compute(matrix, &is_medoid))
}

/// Run the swap search from `initial` medoids.
///
/// Candidates are visited in a seeded random order, repeated until a whole
/// pass since the last change brings no improvement or `max_sweeps` passes
/// are used up.
pub fn dyn_swap(matrix: &SparseCostMatrix, initial: &[usize], config: &SwapConfig) -> Result<SwapResult> {
    if initial.is_empty() {
        return Err(Error::EmptyMedoids);
    }
    let mut state = SwapState::new(matrix, initial)?;
    let order = candidate_order(matrix.n_candidates(), config.seed);
    let mut stats = SwapStats::default();
    let mut last: Option<usize> = None;
    let verify = |state: &SwapState| -> Result<()> {
        if config.verify {
            state.check_consistency(1e-9)?;
        }
        Ok(())
    };
    verify(&state)?;

    'outer: loop {
        if stats.sweeps >= config.max_sweeps {
            stats.truncated = true;
            break;
        }
        stats.sweeps += 1;
        for &c in &order {
            if last == Some(c) {
                break 'outer;
            }
            if state.is_medoid(c) {
                continue;
            }
            let eval = state.evaluate(c);
            let Some(slot) = eval.best_slot else { continue };
            if eval.swap_delta.is_negative() {
                state.apply_swap(slot, c, eval.swap_delta);
                stats.swaps += 1;
                last = Some(c);
                verify(&state)?;
                if config.allow_decrease && state.k() > 1 {
                    if let Some(r) = removable_slot(state.removal()) {
                        state.remove(r)?;
                        stats.removals += 1;
                        verify(&state)?;
                    }
                }
            } else if config.allow_increase && eval.add_delta.penalty < 0.0 {
                state.add(c)?;
                stats.additions += 1;
                last = Some(c);
                verify(&state)?;
            }
        }
        if last.is_none() {
            break;
        }
    }
    Ok(state.into_result(stats))
}

/// Slot with the lexicographically smallest removal loss, provided some
/// medoid can go without uncovering a demand.
fn removable_slot(removal: &[LossPair]) -> Option<usize> {
    if !removal.iter().any(|r| r.penalty == 0.0) {
        return None;
    }
    let mut best = 0;
    for (i, r) in removal.iter().enumerate().skip(1) {
        if *r < removal[best] {
            best = i;
        }
    }
    Some(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_by_two() -> SparseCostMatrix {
        SparseCostMatrix::new(2, 2, vec![(0, 0, 1.0), (1, 0, 5.0), (1, 1, 1.0), (0, 1, 5.0)], None).unwrap()
    }

    #[test]
    fn removal_loss_single_medoid() {
        let m = SparseCostMatrix::new(1, 1, vec![(0, 0, 2.0)], None).unwrap();
        let a = refresh_caches(&m, &[0]).unwrap();
        assert_eq!(removal_losses(&m, &a, &[0]).unwrap(), vec![LossPair::new(1.0, -2.0)]);
    }

    #[test]
    fn removal_loss_with_second_nearest() {
        let m = SparseCostMatrix::new(1, 2, vec![(0, 0, 2.0), (0, 1, 5.0)], None).unwrap();
        let a = refresh_caches(&m, &[0, 1]).unwrap();
        assert_eq!(
            removal_losses(&m, &a, &[0, 1]).unwrap(),
            vec![LossPair::new(0.0, 3.0), LossPair::ZERO]
        );
    }

    #[test]
    fn removal_losses_rejects_inconsistent_assignment() {
        let m = two_by_two();
        let a = refresh_caches(&m, &[0]).unwrap();
        assert!(removal_losses(&m, &a, &[1]).is_err());
    }

    #[test]
    fn refresh_caches_edge_cases() {
        let m = two_by_two();
        assert_eq!(refresh_caches(&m, &[]).unwrap(), Assignment::empty(2));
        let a = refresh_caches(&m, &[0, 1]).unwrap();
        assert_eq!(a.d_nearest, vec![1.0, 1.0]);
        assert_eq!(a.nearest, vec![Some(0), Some(1)]);
    }

    #[test]
    fn empty_start_is_an_error() {
        assert_eq!(
            dyn_swap(&two_by_two(), &[], &SwapConfig::default()).unwrap_err(),
            Error::EmptyMedoids
        );
    }

    #[test]
    fn two_by_two_single_medoid_is_fixed_point() {
        let m = two_by_two();
        for start in [0, 1] {
            let r = dyn_swap(
                &m,
                &[start],
                &SwapConfig {
                    allow_increase: true,
                    allow_decrease: true,
                    verify: true,
                    ..SwapConfig::default()
                },
            )
            .unwrap();
            assert_eq!(r.loss, LossPair::new(0.0, 6.0));
            assert_eq!(r.medoids, vec![start]);
            assert_eq!(r.stats.medoid_changes(), 0);
        }
    }

    #[test]
    fn dyn_up_adds_covering_candidate() {
        // candidate 1 alone reaches demand 1
        let m = SparseCostMatrix::new(2, 2, vec![(0, 0, 1.0), (1, 1, 1.0)], None).unwrap();
        let mut cfg = SwapConfig {
            verify: true,
            ..SwapConfig::default()
        };
        let r = dyn_swap(&m, &[0], &cfg).unwrap();
        assert_eq!(r.loss, LossPair::new(1.0, 1.0));
        cfg.allow_increase = true;
        let r = dyn_swap(&m, &[0], &cfg).unwrap();
        assert_eq!(r.loss, LossPair::new(0.0, 2.0));
        assert_eq!(r.medoids, vec![0, 1]);
        assert_eq!(r.stats.additions, 1);
    }

    #[test]
    fn dyn_down_drops_redundant_medoid_after_swap() {
        // demands 0,1 reachable by all; candidate 2 dominates
        let m = SparseCostMatrix::new(
            2,
            3,
            vec![
                (0, 0, 5.0),
                (1, 0, 9.0),
                (0, 1, 9.0),
                (1, 1, 5.0),
                (0, 2, 1.0),
                (1, 2, 1.0),
            ],
            None,
        )
        .unwrap();
        let cfg = SwapConfig {
            allow_decrease: true,
            verify: true,
            ..SwapConfig::default()
        };
        let r = dyn_swap(&m, &[0, 1], &cfg).unwrap();
        assert_eq!(r.medoids, vec![2]);
        assert_eq!(r.loss, LossPair::new(0.0, 2.0));
        assert_eq!(r.stats.swaps, 1);
        assert_eq!(r.stats.removals, 1);
    }

    #[test]
    fn max_sweeps_truncates() {
        let m = SparseCostMatrix::new(2, 3, vec![(0, 0, 5.0), (1, 0, 9.0), (0, 2, 1.0), (1, 2, 1.0)], None).unwrap();
        let cfg = SwapConfig {
            max_sweeps: 0,
            ..SwapConfig::default()
        };
        let r = dyn_swap(&m, &[0], &cfg).unwrap();
        assert!(r.stats.truncated);
        assert_eq!(r.medoids, vec![0]);
    }

    #[test]
    fn state_mutations_keep_caches_consistent() {
        let m = SparseCostMatrix::new(
            4,
            4,
            vec![
                (0, 0, 1.0),
                (0, 1, 2.0),
                (1, 1, 1.0),
                (1, 2, 3.0),
                (2, 2, 2.0),
                (2, 3, 2.0),
                (3, 3, 4.0),
                (3, 0, 4.0),
            ],
            None,
        )
        .unwrap();
        let mut s = SwapState::new(&m, &[0]).unwrap();
        s.check_consistency(1e-12).unwrap();
        s.add(2).unwrap();
        s.check_consistency(1e-12).unwrap();
        s.swap(0, 3).unwrap();
        s.check_consistency(1e-12).unwrap();
        s.add(1).unwrap();
        s.remove(0).unwrap();
        s.check_consistency(1e-12).unwrap();
        assert!(s.add(1).is_err());
        assert!(s.remove(9).is_err());
    }
}
