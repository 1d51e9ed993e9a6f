//! Two-component loss values.
//!
//! A solution's loss is `penalty * pi + dist` with `pi -> infinity`. Instead of
//! materializing the limit we keep the two sums apart and order them
//! lexicographically, so any amount of penalty outweighs any finite distance.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

/// Loss (or loss change) split into the penalty mass of uncovered demands and
/// the summed assignment cost of covered demands.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossPair {
    pub penalty: f64,
    pub dist: f64,
}

impl LossPair {
    pub const ZERO: LossPair = LossPair {
        penalty: 0.0,
        dist: 0.0,
    };

    /// Panics on NaN components.
    pub fn new(penalty: f64, dist: f64) -> Self {
        assert!(!penalty.is_nan() && !dist.is_nan(), "loss components must not be NaN");
        LossPair { penalty, dist }
    }

    /// Lexicographic total order: penalty first, distance second.
    #[inline]
    pub fn compare(&self, other: &LossPair) -> Ordering {
        self.partial_cmp(other).expect("loss components must not be NaN")
    }

    #[inline]
    pub fn is_negative(&self) -> bool {
        self.compare(&LossPair::ZERO) == Ordering::Less
    }

    /// True when no demand is left uncovered.
    #[inline]
    pub fn is_feasible(&self) -> bool {
        self.penalty == 0.0
    }
}

/// Free-function form of [`LossPair::compare`].
pub fn loss_compare(a: LossPair, b: LossPair) -> Ordering {
    a.compare(&b)
}

impl PartialOrd for LossPair {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.penalty.partial_cmp(&other.penalty)? {
            Ordering::Equal => self.dist.partial_cmp(&other.dist),
            ord => Some(ord),
        }
    }
}

impl Add for LossPair {
    type Output = LossPair;
    #[inline]
    fn add(self, rhs: LossPair) -> LossPair {
        LossPair {
            penalty: self.penalty + rhs.penalty,
            dist: self.dist + rhs.dist,
        }
    }
}

impl AddAssign for LossPair {
    #[inline]
    fn add_assign(&mut self, rhs: LossPair) {
        self.penalty += rhs.penalty;
        self.dist += rhs.dist;
    }
}

impl Sub for LossPair {
    type Output = LossPair;
    #[inline]
    fn sub(self, rhs: LossPair) -> LossPair {
        LossPair {
            penalty: self.penalty - rhs.penalty,
            dist: self.dist - rhs.dist,
        }
    }
}

impl SubAssign for LossPair {
    #[inline]
    fn sub_assign(&mut self, rhs: LossPair) {
        self.penalty -= rhs.penalty;
        self.dist -= rhs.dist;
    }
}

impl Neg for LossPair {
    type Output = LossPair;
    fn neg(self) -> LossPair {
        LossPair {
            penalty: -self.penalty,
            dist: -self.dist,
        }
    }
}

impl Sum for LossPair {
    fn sum<I: Iterator<Item = LossPair>>(iter: I) -> LossPair {
        iter.fold(LossPair::ZERO, Add::add)
    }
}

impl fmt::Display for LossPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.penalty, self.dist)
    }
}
