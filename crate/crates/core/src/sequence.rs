//! Finitely supported points of the non-negative double-sided sequence space.
//!
//! The space carries the metric
//!
//! ```text
//! d(x, y) = sum_{i in Z} (|x_i - y_i| ∧ 1) / 2^(|i| + 1)
//! ```
//!
//! which metrizes coordinatewise convergence. All sequences handled here have
//! finite support, so the metric is evaluated exactly over the union of the
//! two windows.

use std::fmt;

use crate::error::{param, Result};

/// Total weight `sum_{i in Z} 2^-(|i|+1)`; an upper bound for the metric.
pub const METRIC_DIAMETER: f64 = 1.5;

/// Weight of coordinate `i` in the metric.
#[inline]
pub fn coordinate_weight(i: i64) -> f64 {
    (-((i.unsigned_abs() as f64) + 1.0)).exp2()
}

/// Non-negative sequence that vanishes outside `[lo, lo + values.len())`.
///
/// Stored in canonical form: no leading or trailing zeros, and the zero
/// sequence is the empty window at `lo = 0`. Equality is coordinatewise.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WindowSeq {
    lo: i64,
    values: Vec<f64>,
}

/// Number of strictly positive coordinates; `j` means membership in `C_{=j}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConeLabel(pub usize);

impl ConeLabel {
    pub fn positive_count(self) -> usize {
        self.0
    }

    /// Membership in `C_{<=j}`.
    pub fn within(self, j: usize) -> bool {
        self.0 <= j
    }
}

impl WindowSeq {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn new(lo: i64, values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return param(format!(
                "sequence values must be finite and non-negative, got {v}"
            ));
        }
        Ok(Self::from_raw(lo, values))
    }

    /// Canonicalizes without validation; callers guarantee finite non-negative values.
    pub(crate) fn from_raw(lo: i64, mut values: Vec<f64>) -> Self {
        let Some(first) = values.iter().position(|&v| v != 0.0) else {
            return Self::zero();
        };
        let last = values.iter().rposition(|&v| v != 0.0).unwrap_or(first);
        values.truncate(last + 1);
        values.drain(..first);
        for v in &mut values {
            // normalize -0.0
            *v += 0.0;
        }
        Self {
            lo: lo + first as i64,
            values,
        }
    }

    /// Builds a sequence from `(index, value)` pairs; repeated indices add up.
    pub fn from_pairs<I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (i64, f64)>,
    {
        let pairs: Vec<(i64, f64)> = pairs.into_iter().collect();
        let Some(lo) = pairs.iter().map(|p| p.0).min() else {
            return Ok(Self::zero());
        };
        let hi = pairs.iter().map(|p| p.0).max().unwrap_or(lo);
        let mut values = vec![0.0; (hi - lo + 1) as usize];
        for (i, v) in pairs {
            values[(i - lo) as usize] += v;
        }
        Self::new(lo, values)
    }

    /// `lam * e_i`.
    pub fn spike(i: i64, lam: f64) -> Result<Self> {
        if !(lam > 0.0 && lam.is_finite()) {
            return param(format!("spike height must be positive, got {lam}"));
        }
        Ok(Self {
            lo: i,
            values: vec![lam],
        })
    }

    pub fn is_zero(&self) -> bool {
        self.values.is_empty()
    }

    /// Lowest index of the window (meaningless for the zero sequence).
    pub fn lo(&self) -> i64 {
        self.lo
    }

    /// Highest index with a nonzero value, `None` for the zero sequence.
    pub fn hi(&self) -> Option<i64> {
        (!self.values.is_empty()).then(|| self.lo + self.values.len() as i64 - 1)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: i64) -> f64 {
        let off = i - self.lo;
        if off < 0 {
            return 0.0;
        }
        self.values.get(off as usize).copied().unwrap_or(0.0)
    }

    /// `(index, value)` over the stored window, zeros inside it included.
    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(k, &v)| (self.lo + k as i64, v))
    }

    pub fn scale(&self, lam: f64) -> Result<Self> {
        if !(lam > 0.0 && lam.is_finite()) {
            return param(format!("scale factor must be positive, got {lam}"));
        }
        Ok(Self::from_raw(
            self.lo,
            self.values.iter().map(|v| v * lam).collect(),
        ))
    }

    /// Coordinatewise sum.
    pub fn add(&self, other: &Self) -> Self {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        let lo = self.lo.min(other.lo);
        let hi = self.hi().unwrap().max(other.hi().unwrap());
        let values = (lo..=hi).map(|i| self.get(i) + other.get(i)).collect();
        Self::from_raw(lo, values)
    }

    /// Exact value of the sequence-space metric.
    pub fn dist(&self, other: &Self) -> f64 {
        let (lo, hi) = match (self.hi(), other.hi()) {
            (None, None) => return 0.0,
            (Some(h), None) => (self.lo, h),
            (None, Some(h)) => (other.lo, h),
            (Some(a), Some(b)) => (self.lo.min(other.lo), a.max(b)),
        };
        (lo..=hi)
            .map(|i| (self.get(i) - other.get(i)).abs().min(1.0) * coordinate_weight(i))
            .sum()
    }

    /// Number of coordinates strictly above `u`.
    pub fn exceedance_count(&self, u: f64) -> usize {
        self.values.iter().filter(|&&v| v > u).count()
    }

    pub fn cone_label(&self) -> ConeLabel {
        ConeLabel(self.exceedance_count(0.0))
    }
}

impl fmt::Display for WindowSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, v) in self.iter().filter(|p| p.1 != 0.0) {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{v}·e_{i}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(i: i64) -> WindowSeq {
        WindowSeq::spike(i, 1.0).unwrap()
    }

    #[test]
    fn dist_examples() {
        let x = WindowSeq::new(-3, vec![0.2, 4.0, 0.0, 1.5]).unwrap();
        assert_eq!(x.dist(&x), 0.0);
        assert_eq!(WindowSeq::zero().dist(&e(0)), 0.5);
        assert_eq!(e(0).dist(&e(1)), 0.75);
        assert_eq!(e(-2).dist(&WindowSeq::zero()), 0.125);
    }

    #[test]
    fn spike_examples() {
        let s = WindowSeq::spike(3, 2.5).unwrap();
        assert_eq!(s.get(3), 2.5);
        assert_eq!(s.get(2), 0.0);
        assert_eq!(s.lo(), 3);
        assert_eq!(s.hi(), Some(3));
        assert_eq!(WindowSeq::spike(-2, 1.0).unwrap().get(-2), 1.0);
        assert!(WindowSeq::spike(0, 0.0).is_err());
        assert!(WindowSeq::spike(0, -1.0).is_err());
    }

    #[test]
    fn exceedance_examples() {
        assert_eq!(e(0).add(&e(5)).exceedance_count(0.0), 2);
        assert_eq!(WindowSeq::zero().exceedance_count(0.3), 0);
        let x = e(0).add(&WindowSeq::spike(1, 0.5).unwrap());
        assert_eq!(x.exceedance_count(0.7), 1);
    }

    #[test]
    fn scale_examples() {
        assert_eq!(e(0).scale(2.0).unwrap(), WindowSeq::spike(0, 2.0).unwrap());
        let x = WindowSeq::new(2, vec![1.0, 0.0, 3.0]).unwrap();
        assert_eq!(x.scale(1.0).unwrap(), x);
        assert_eq!(WindowSeq::spike(1, 2.0).unwrap().scale(0.5).unwrap(), e(1));
        assert!(x.scale(0.0).is_err());
    }

    #[test]
    fn canonical_form_trims_zeros() {
        let x = WindowSeq::new(-2, vec![0.0, 0.0, 1.0, 0.0, 2.0, 0.0]).unwrap();
        assert_eq!(x.lo(), 0);
        assert_eq!(x.values(), &[1.0, 0.0, 2.0]);
        assert_eq!(
            WindowSeq::new(5, vec![0.0, -0.0]).unwrap(),
            WindowSeq::zero()
        );
        assert!(WindowSeq::new(0, vec![1.0, -0.5]).is_err());
        assert!(WindowSeq::new(0, vec![f64::NAN]).is_err());
    }

    #[test]
    fn from_pairs_accumulates() {
        let x = WindowSeq::from_pairs([(2, 1.0), (-1, 0.5), (2, 0.25)]).unwrap();
        assert_eq!(x.lo(), -1);
        assert_eq!(x.get(2), 1.25);
        assert_eq!(x.get(0), 0.0);
    }

    #[test]
    fn finite_dimensional_convergence() {
        // x^n -> x coordinatewise, with a wandering unit bump at index n
        let x = WindowSeq::new(-2, vec![1.0, 3.0, 0.5, 2.0]).unwrap();
        let mut prev = f64::INFINITY;
        for n in 1..60 {
            let perturb: Vec<f64> = x.values().iter().map(|v| v + 1.0 / n as f64).collect();
            let xn = WindowSeq::new(-2, perturb)
                .unwrap()
                .add(&WindowSeq::spike(n, 5.0).unwrap());
            let d = xn.dist(&x);
            assert!(d <= prev);
            prev = d;
        }
        assert!(prev < 0.05);
    }
}
