//! Convergent series values with rigorous error bounds.

use serde::Serialize;

/// Value of a convergent series together with an absolute error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesSum {
    pub value: f64,
    pub error_bound: f64,
}

impl SeriesSum {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            error_bound: 0.0,
        }
    }
}

const ZETA_TERMS: u64 = 10_000;

/// `sum_{n >= 1} n^(-p)` for `p > 1`.
///
/// Direct partial sum over `n < N`, then Euler-Maclaurin for the tail:
/// `sum_{n >= N} f(n) = int_N^inf f + f(N)/2 + R` with `|R| <= |f'(N)| / 12`
/// for the convex decreasing `f(x) = x^(-p)`.
pub fn zeta(p: f64) -> Option<SeriesSum> {
    if !(p > 1.0) {
        return None;
    }
    // small terms first for accuracy
    let head: f64 = (1..ZETA_TERMS).rev().map(|n| (n as f64).powf(-p)).sum();
    let n = ZETA_TERMS as f64;
    let tail = n.powf(1.0 - p) / (p - 1.0) + 0.5 * n.powf(-p);
    let bound = p * n.powf(-p - 1.0) / 12.0;
    Some(SeriesSum {
        value: head + tail,
        error_bound: bound + 1e-15 * (head + tail),
    })
}

/// Upper bound on `sum_{n > N} n^(-p)` via `int_N^inf x^(-p) dx`; infinite for `p <= 1`.
pub fn power_tail_bound(n: u64, p: f64) -> f64 {
    if !(p > 1.0) {
        return f64::INFINITY;
    }
    if n == 0 {
        return zeta(p).map_or(f64::INFINITY, |z| z.value + z.error_bound);
    }
    (n as f64).powf(1.0 - p) / (p - 1.0)
}
