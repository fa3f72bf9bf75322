//! Scalar-generic similarity primitives.
//!
//! Set overlap and coverage are ratios of counts, so they are defined for any
//! [`Scalar`] including exact rationals. Cosine needs a square root and is
//! restricted to [`Float`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Debug;

use num_rational::Ratio;
use num_traits::{Float, Num, ToPrimitive};

/// A numeric type scores can be computed in.
pub trait Scalar: Num + Copy + PartialOrd + ToPrimitive + Debug + Send + Sync + 'static {
    /// Absolute slack allowed when checking that values sum to one.
    const SUM_TOLERANCE: f64;

    fn from_count(n: usize) -> Self;

    fn from_f64_lossy(x: f64) -> Self;
}

macro_rules! float_scalar {
    ($($t:ty => $tol:expr),*) => {$(
        impl Scalar for $t {
            const SUM_TOLERANCE: f64 = $tol;

            fn from_count(n: usize) -> Self {
                n as $t
            }

            fn from_f64_lossy(x: f64) -> Self {
                x as $t
            }
        }
    )*};
}

float_scalar!(f32 => 1e-6, f64 => 1e-9);

macro_rules! ratio_scalar {
    ($($t:ty),*) => {$(
        impl Scalar for Ratio<$t> {
            const SUM_TOLERANCE: f64 = 0.0;

            fn from_count(n: usize) -> Self {
                Ratio::from_integer(n as $t)
            }

            fn from_f64_lossy(x: f64) -> Self {
                Ratio::approximate_float(x).unwrap_or_else(|| Ratio::from_integer(0))
            }
        }
    )*};
}

ratio_scalar!(i64, i128);

/// `num / den`, or zero when `den` is zero.
pub fn ratio_or_zero<T: Scalar>(num: usize, den: usize) -> T {
    if den == 0 {
        T::zero()
    } else {
        T::from_count(num) / T::from_count(den)
    }
}

/// `|a ∩ b| / |a ∪ b|`; zero when both sets are empty.
pub fn jaccard<T: Scalar, K: Ord>(a: &BTreeSet<K>, b: &BTreeSet<K>) -> T {
    let intersection = a.intersection(b).count();
    let union = a.len() + b.len() - intersection;
    ratio_or_zero(intersection, union)
}

/// A sparse term-frequency vector.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TermVector<K: Ord> {
    counts: BTreeMap<K, u64>,
}

impl<K: Ord> TermVector<K> {
    pub fn new() -> Self {
        Self { counts: BTreeMap::new() }
    }

    pub fn add(&mut self, term: K) {
        *self.counts.entry(term).or_insert(0) += 1;
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn get(&self, term: &K) -> u64 {
        self.counts.get(term).copied().unwrap_or(0)
    }

    pub fn dot(&self, other: &Self) -> u64 {
        let (small, large) = if self.counts.len() <= other.counts.len() { (self, other) } else { (other, self) };
        small.counts.iter().map(|(term, n)| n * large.get(term)).sum()
    }

    pub fn squared_norm(&self) -> u64 {
        self.counts.values().map(|n| n * n).sum()
    }

    /// Cosine similarity; zero when either vector is empty.
    pub fn cosine<T: Float + Scalar>(&self, other: &Self) -> T {
        let dot = self.dot(other);
        if dot == 0 {
            return T::zero();
        }
        // dot / sqrt(|a|²·|b|²) keeps self-similarity exactly one.
        let to_t = |n: u64| T::from(n).unwrap_or_else(T::infinity);
        let denom = (to_t(self.squared_norm()) * to_t(other.squared_norm())).sqrt();
        let value = to_t(dot) / denom;
        if value > T::one() {
            T::one()
        } else {
            value
        }
    }
}

impl<K: Ord> FromIterator<K> for TermVector<K> {
    fn from_iter<I: IntoIterator<Item = K>>(iter: I) -> Self {
        let mut v = Self::new();
        for term in iter {
            v.add(term);
        }
        v
    }
}

/// Fraction of `items` satisfying `pred`; zero for an empty slice.
pub fn fraction_where<T: Scalar, I>(items: &[I], pred: impl Fn(&I) -> bool) -> T {
    ratio_or_zero(items.iter().filter(|i| pred(i)).count(), items.len())
}
