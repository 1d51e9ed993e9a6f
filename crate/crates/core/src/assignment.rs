//! Per-demand nearest / second-nearest medoid caches.

use crate::matrix::SparseCostMatrix;

/// Nearest medoid, its cost, and the cost of the second-nearest medoid for
/// every demand. Uncovered demands have no nearest medoid and both costs at
/// infinity. The identity of the second-nearest medoid is not tracked.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub nearest: Vec<Option<usize>>,
    pub d_nearest: Vec<f64>,
    pub d_second: Vec<f64>,
}

impl Assignment {
    /// Everything unassigned.
    pub fn empty(n_demand: usize) -> Self {
        Assignment {
            nearest: vec![None; n_demand],
            d_nearest: vec![f64::INFINITY; n_demand],
            d_second: vec![f64::INFINITY; n_demand],
        }
    }

    /// Full recomputation by scanning each demand's candidate list filtered to
    /// medoids. Ties on the nearest cost go to the lowest candidate id.
    pub fn compute(matrix: &SparseCostMatrix, is_medoid: &[bool]) -> Self {
        let mut a = Assignment::empty(matrix.n_demand());
        for o in 0..matrix.n_demand() {
            a.rescan(matrix, is_medoid, o);
        }
        a
    }

    pub fn len(&self) -> usize {
        self.nearest.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nearest.is_empty()
    }

    #[inline]
    pub fn is_covered(&self, o: usize) -> bool {
        self.nearest[o].is_some()
    }

    pub fn uncovered(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&o| self.nearest[o].is_none())
    }

    /// Recompute the caches of demand `o` from its candidate list.
    pub fn rescan(&mut self, matrix: &SparseCostMatrix, is_medoid: &[bool], o: usize) {
        let mut n1 = None;
        let mut d1 = f64::INFINITY;
        let mut d2 = f64::INFINITY;
        for nb in matrix.demand_neighbors(o) {
            if !is_medoid[nb.id] {
                continue;
            }
            if nb.cost < d1 {
                d2 = d1;
                d1 = nb.cost;
                n1 = Some(nb.id);
            } else if nb.cost < d2 {
                d2 = nb.cost;
            }
        }
        self.nearest[o] = n1;
        self.d_nearest[o] = d1;
        self.d_second[o] = d2;
    }

    /// Account for a new medoid `j` reaching demand `o` at cost `d`.
    #[inline]
    pub fn insert(&mut self, o: usize, j: usize, d: f64) {
        if d < self.d_nearest[o] {
            self.d_second[o] = self.d_nearest[o];
            self.d_nearest[o] = d;
            self.nearest[o] = Some(j);
        } else if d < self.d_second[o] {
            self.d_second[o] = d;
        }
    }

    /// Check the structural invariants; returns a description of the first
    /// violation.
    pub fn validate(&self) -> Result<(), String> {
        for o in 0..self.len() {
            let (d1, d2) = (self.d_nearest[o], self.d_second[o]);
            match self.nearest[o] {
                None if d1 != f64::INFINITY || d2 != f64::INFINITY => {
                    return Err(format!("demand {o} unassigned but has finite costs"));
                }
                Some(_) if !d1.is_finite() => {
                    return Err(format!("demand {o} assigned with infinite cost"));
                }
                _ => {}
            }
            if d1 > d2 {
                return Err(format!("demand {o}: nearest {d1} beyond second {d2}"));
            }
        }
        Ok(())
    }

    /// Compare against another assignment: nearest costs must agree within
    /// `rel_tol` relative, coverage exactly. Nearest identities may differ
    /// only where costs tie.
    pub fn matches(&self, other: &Assignment, rel_tol: f64) -> Result<(), String> {
        if self.len() != other.len() {
            return Err("length mismatch".into());
        }
        let close = |a: f64, b: f64| a == b || (a - b).abs() <= rel_tol * a.abs().max(b.abs()).max(1.0);
        for o in 0..self.len() {
            if self.nearest[o].is_some() != other.nearest[o].is_some() {
                return Err(format!("demand {o}: coverage differs"));
            }
            if !close(self.d_nearest[o], other.d_nearest[o]) {
                return Err(format!(
                    "demand {o}: d_nearest {} vs {}",
                    self.d_nearest[o], other.d_nearest[o]
                ));
            }
            if !close(self.d_second[o], other.d_second[o]) {
                return Err(format!(
                    "demand {o}: d_second {} vs {}",
                    self.d_second[o], other.d_second[o]
                ));
            }
            if self.nearest[o] != other.nearest[o] && self.d_nearest[o] != self.d_second[o] {
                return Err(format!(
                    "demand {o}: nearest {:?} vs {:?} without a tie",
                    self.nearest[o], other.nearest[o]
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> SparseCostMatrix {
        SparseCostMatrix::new(
            3,
            3,
            vec![(0, 0, 1.0), (0, 1, 4.0), (0, 2, 2.0), (1, 1, 3.0), (2, 2, 5.0)],
            None,
        )
        .unwrap()
    }

    #[test]
    fn no_medoids_leaves_everything_unassigned() {
        let a = Assignment::compute(&toy(), &[false; 3]);
        assert_eq!(a, Assignment::empty(3));
        a.validate().unwrap();
    }

    #[test]
    fn all_medoids_gives_row_minimum() {
        let a = Assignment::compute(&toy(), &[true; 3]);
        assert_eq!(a.nearest, vec![Some(0), Some(1), Some(2)]);
        assert_eq!(a.d_nearest, vec![1.0, 3.0, 5.0]);
        assert_eq!(a.d_second, vec![2.0, f64::INFINITY, f64::INFINITY]);
    }

    #[test]
    fn insert_agrees_with_rescan() {
        let m = toy();
        let mut is_med = [false; 3];
        let mut a = Assignment::empty(3);
        for j in [2, 0, 1] {
            is_med[j] = true;
            for nb in m.candidate_neighbors(j) {
                a.insert(nb.id, j, nb.cost);
            }
            assert_eq!(a, Assignment::compute(&m, &is_med));
        }
    }
}
