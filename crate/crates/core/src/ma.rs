//! Moving-average maps and process simulation.
//!
//! For non-negative coefficients `psi` the finite-order map is
//!
//! ```text
//! (T^m z)_k = sum_{j=0}^{m} psi_j z_{k-j}
//! ```
//!
//! and `X^m = T^m(Z)` for i.i.d. innovations `Z`. The infinite-order process
//! is simulated as `X^N` with `N` chosen so that `sum_{j>N} psi_j` falls below
//! a tolerance; `truncation_diagnostic` estimates the tail mass left behind.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::innovations::TailModel;
use crate::rng::{UniformStream, STREAM_DIAGNOSTIC, STREAM_INNOVATIONS};
use crate::sequence::WindowSeq;
use crate::series::{power_tail_bound, zeta, SeriesSum};

/// Largest truncation depth the simulator accepts.
pub const MAX_SIMULATION_DEPTH: usize = 1 << 22;

/// Relative tolerance used to pick the reference depth of the truncation diagnostic.
pub const DIAGNOSTIC_REL_EPS: f64 = 1e-15;

/// Default MA(∞) truncation tolerance, relative to `sum_j psi_j`.
pub const DEFAULT_TRUNC_REL_EPS: f64 = 1e-8;

const BLOCK_REPLICATES: usize = 4096;

/// Coefficient sequence `(psi_j, j >= 0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CoefficientSeq {
    /// `psi_j` as listed, zero beyond the list.
    ExplicitFinite { psi: Vec<f64> },
    /// `psi_j = rho^j`.
    Geometric { rho: f64 },
    /// `psi_j = (j + 1)^(-beta)`.
    Polynomial { beta: f64 },
}

impl CoefficientSeq {
    pub fn explicit(psi: Vec<f64>) -> Result<Self> {
        let c = Self::ExplicitFinite { psi };
        c.validate()?;
        Ok(c)
    }

    pub fn geometric(rho: f64) -> Result<Self> {
        let c = Self::Geometric { rho };
        c.validate()?;
        Ok(c)
    }

    pub fn polynomial(beta: f64) -> Result<Self> {
        let c = Self::Polynomial { beta };
        c.validate()?;
        Ok(c)
    }

    /// Parameter ranges, non-negativity and `psi_0 > 0`.
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::ExplicitFinite { psi } => {
                if psi.is_empty() {
                    return param("explicit coefficient list is empty");
                }
                if let Some(v) = psi.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                    return param(format!(
                        "coefficients must be finite and non-negative, got {v}"
                    ));
                }
                if psi[0] <= 0.0 {
                    return Err(Error::AssumptionViolation(format!(
                        "(A1) requires psi_0 > 0, got {}",
                        psi[0]
                    )));
                }
            }
            Self::Geometric { rho } => {
                if !(*rho > 0.0 && *rho < 1.0) {
                    return param(format!("geometric ratio must lie in (0, 1), got {rho}"));
                }
            }
            Self::Polynomial { beta } => {
                if !(*beta > 0.0 && beta.is_finite()) {
                    return param(format!("polynomial exponent must be positive, got {beta}"));
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn psi(&self, j: usize) -> f64 {
        match self {
            Self::ExplicitFinite { psi } => psi.get(j).copied().unwrap_or(0.0),
            Self::Geometric { rho } => rho.powf(j as f64),
            Self::Polynomial { beta } => ((j + 1) as f64).powf(-beta),
        }
    }

    /// `psi_0, ..., psi_m`.
    pub fn head(&self, m: usize) -> Vec<f64> {
        (0..=m).map(|j| self.psi(j)).collect()
    }

    /// Index of the last listed coefficient for finite sequences.
    pub fn finite_order(&self) -> Option<usize> {
        match self {
            Self::ExplicitFinite { psi } => Some(psi.len() - 1),
            _ => None,
        }
    }

    /// `sum_j psi_j^p`, `None` when the series diverges.
    pub fn power_sum(&self, p: f64) -> Option<SeriesSum> {
        match self {
            Self::ExplicitFinite { psi } => {
                Some(SeriesSum::exact(psi.iter().map(|v| v.powf(p)).sum()))
            }
            Self::Geometric { rho } => Some(SeriesSum::exact(1.0 / (1.0 - rho.powf(p)))),
            Self::Polynomial { beta } => zeta(beta * p),
        }
    }

    /// Upper bound on `sum_{j > n} psi_j^p` (infinite when divergent).
    pub fn power_tail_bound(&self, n: usize, p: f64) -> f64 {
        match self {
            Self::ExplicitFinite { psi } => psi.iter().skip(n + 1).map(|v| v.powf(p)).sum(),
            Self::Geometric { rho } => {
                let r = rho.powf(p);
                r.powf((n + 1) as f64) / (1.0 - r)
            }
            // sum_{j>n} (j+1)^(-bp) = sum_{k > n+1} k^(-bp)
            Self::Polynomial { beta } => power_tail_bound(n as u64 + 1, beta * p),
        }
    }

    /// Upper bound on `sum_{j > n} psi_j`.
    pub fn tail_bound(&self, n: usize) -> f64 {
        self.power_tail_bound(n, 1.0)
    }
}

/// Outcome of checking (A1)/(A2) and the series they control.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub a1_holds: bool,
    /// A `delta < alpha ∧ 1` with `sum psi_j^delta < inf`, certified analytically.
    pub a2_delta: Option<f64>,
    /// `S = sum psi_j`, absent when divergent.
    pub sum_psi: Option<SeriesSum>,
    /// `sum psi_j^alpha`, absent when divergent.
    pub sum_psi_alpha: Option<SeriesSum>,
    pub alpha: f64,
    #[serde(skip)]
    coeffs: CoefficientSeq,
}

impl AssumptionReport {
    /// Truncation depth `N` with `sum_{j>N} psi_j < eps`.
    pub fn tail_bound_n(&self, eps: f64) -> Result<usize> {
        choose_truncation(&self.coeffs, eps)
    }
}

pub fn check_assumptions(coeffs: &CoefficientSeq, alpha: f64) -> Result<AssumptionReport> {
    coeffs.validate()?;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return param(format!("tail index must be positive, got {alpha}"));
    }
    let cap = alpha.min(1.0);
    let a2_delta = match coeffs {
        CoefficientSeq::ExplicitFinite { .. } | CoefficientSeq::Geometric { .. } => Some(cap / 2.0),
        // sum (j+1)^(-beta delta) < inf  iff  beta delta > 1
        CoefficientSeq::Polynomial { beta } => {
            (*beta * cap > 1.0).then(|| 0.5 * (1.0 / beta + cap))
        }
    };
    Ok(AssumptionReport {
        a1_holds: true,
        a2_delta,
        sum_psi: coeffs.power_sum(1.0),
        sum_psi_alpha: coeffs.power_sum(alpha),
        alpha,
        coeffs: coeffs.clone(),
    })
}

/// Smallest `N` with `sum_{j>N} psi_j < eps`, using the exact geometric tail and
/// the integral bound for polynomial decay. Finite lists return their last index.
pub fn choose_truncation(coeffs: &CoefficientSeq, eps: f64) -> Result<usize> {
    coeffs.validate()?;
    if !(eps > 0.0) {
        return param(format!("truncation tolerance must be positive, got {eps}"));
    }
    let guess = match coeffs {
        CoefficientSeq::ExplicitFinite { psi } => return Ok(psi.len() - 1),
        CoefficientSeq::Geometric { rho } => (eps * (1.0 - rho)).ln() / rho.ln() - 1.0,
        CoefficientSeq::Polynomial { beta } => {
            if *beta <= 1.0 {
                return Err(Error::Unsupported(format!(
                    "sum of (j+1)^-{beta} diverges; no truncation depth exists"
                )));
            }
            // (N+1)^(1-beta) / (beta-1) < eps
            (eps * (beta - 1.0)).powf(-1.0 / (beta - 1.0)) - 1.0
        }
    };
    if !(guess < 9e15) {
        return Err(Error::Unsupported(format!(
            "truncation depth for eps={eps} is not representable"
        )));
    }
    let mut n = guess.max(0.0).ceil() as usize;
    while coeffs.tail_bound(n) >= eps {
        n += 1;
    }
    while n > 0 && coeffs.tail_bound(n - 1) < eps {
        n -= 1;
    }
    Ok(n)
}

/// `T^m z`; the result lives on `[z.lo, z.hi + m]`.
pub fn apply_tm(coeffs: &CoefficientSeq, m: usize, z: &WindowSeq) -> WindowSeq {
    if z.is_zero() {
        return WindowSeq::zero();
    }
    let psi = coeffs.head(m);
    let zs = z.values();
    let out = (0..zs.len() + m)
        .map(|k| {
            let j_lo = k.saturating_sub(zs.len() - 1);
            let j_hi = k.min(m);
            (j_lo..=j_hi).map(|j| psi[j] * zs[k - j]).sum()
        })
        .collect();
    WindowSeq::from_raw(z.lo(), out)
}

/// A `delta` such that `d(x, y) < delta` implies `d(T^m x, T^m y) < eps`.
///
/// With `M` the least integer having `2 * 2^-M < eps / 2` and `S_m = sum_{j<=m} psi_j`,
/// `delta = min(1, eps / (4 S_m)) * 2^-(M+m)`: coordinates with `|i| < M + m`
/// then differ by less than `eps / (4 S_m)`, the images on `|i| < M` by less
/// than `eps / 4`, and the coordinates `|i| >= M` carry weight below `eps / 2`.
pub fn tm_continuity_modulus(coeffs: &CoefficientSeq, m: usize, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return param(format!("continuity tolerance must be positive, got {eps}"));
    }
    let s_m: f64 = coeffs.head(m).iter().sum();
    let mut big_m: i32 = 0;
    while 2.0 * (-(big_m as f64)).exp2() >= eps / 2.0 {
        big_m += 1;
    }
    Ok((eps / (4.0 * s_m)).min(1.0) * (-((big_m as f64) + m as f64)).exp2())
}

/// Process order: `Finite(m)` for MA(m), `Infinite` for the truncated MA(∞).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Order {
    Finite(usize),
    Infinite,
}

/// Closed index interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexWindow {
    pub lo: i64,
    pub hi: i64,
}

impl IndexWindow {
    pub fn new(lo: i64, hi: i64) -> Result<Self> {
        if lo > hi {
            return param(format!("empty index window [{lo}, {hi}]"));
        }
        Ok(Self { lo, hi })
    }

    pub fn single(k: i64) -> Self {
        Self { lo: k, hi: k }
    }

    pub fn width(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }
}

/// Batch simulator for `X^m` or the truncated `X` on a fixed index window.
///
/// Replicate `r` reads draws `r * D .. (r + 1) * D` of the innovation stream,
/// `D = depth + width`, as `Z_{lo - depth}, ..., Z_{hi}` in index order.
#[derive(Debug, Clone)]
pub struct Simulator {
    psi: Vec<f64>,
    model: TailModel,
    window: IndexWindow,
    replicates: usize,
    seed: u64,
}

impl Simulator {
    /// `trunc_eps` only matters for `Order::Infinite`; `None` means
    /// `DEFAULT_TRUNC_REL_EPS * sum_j psi_j`.
    pub fn new(
        coeffs: &CoefficientSeq,
        order: Order,
        model: TailModel,
        window: IndexWindow,
        replicates: usize,
        seed: u64,
        trunc_eps: Option<f64>,
    ) -> Result<Self> {
        coeffs.validate()?;
        model.validate()?;
        IndexWindow::new(window.lo, window.hi)?;
        if replicates == 0 {
            return param("replicate count must be positive");
        }
        let depth = match order {
            Order::Finite(m) => m,
            Order::Infinite => {
                let s = coeffs.power_sum(1.0).ok_or_else(|| {
                    Error::Unsupported("MA(∞) needs sum psi_j < inf, which fails here".into())
                })?;
                choose_truncation(coeffs, trunc_eps.unwrap_or(DEFAULT_TRUNC_REL_EPS * s.value))?
            }
        };
        if depth > MAX_SIMULATION_DEPTH {
            return Err(Error::Unsupported(format!(
                "truncation depth {depth} exceeds {MAX_SIMULATION_DEPTH}"
            )));
        }
        Ok(Self {
            psi: coeffs.head(depth),
            model,
            window,
            replicates,
            seed,
        })
    }

    /// Number of lagged coefficients in use (`m`, or the truncation depth).
    pub fn depth(&self) -> usize {
        self.psi.len() - 1
    }

    pub fn window(&self) -> IndexWindow {
        self.window
    }

    pub fn replicates(&self) -> usize {
        self.replicates
    }

    pub fn model(&self) -> &TailModel {
        &self.model
    }

    pub fn draws_per_replicate(&self) -> usize {
        self.depth() + self.window.width()
    }

    fn stream_for(&self, replicate: usize) -> UniformStream {
        UniformStream::at(
            self.seed,
            STREAM_INNOVATIONS,
            (replicate * self.draws_per_replicate()) as u64,
        )
    }

    fn fill_innovations(&self, stream: &mut UniformStream, z: &mut [f64]) {
        for v in z.iter_mut() {
            *v = self.model.inverse_survival(stream.next_open_closed());
        }
    }

    /// Window values from an innovation buffer `Z_{lo - depth}, ..., Z_{hi}`.
    pub fn evaluate(&self, innovations: &[f64], out: &mut [f64]) {
        let depth = self.depth();
        debug_assert_eq!(innovations.len(), depth + out.len());
        for (w, x) in out.iter_mut().enumerate() {
            *x = self
                .psi
                .iter()
                .enumerate()
                .map(|(j, p)| p * innovations[depth + w - j])
                .sum();
        }
    }

    /// Logged innovations of one replicate, indexed from `lo - depth`.
    pub fn innovations(&self, replicate: usize) -> WindowSeq {
        let mut z = vec![0.0; self.draws_per_replicate()];
        self.fill_innovations(&mut self.stream_for(replicate), &mut z);
        WindowSeq::from_raw(self.window.lo - self.depth() as i64, z)
    }

    pub fn replicate(&self, replicate: usize) -> WindowSeq {
        let mut z = vec![0.0; self.draws_per_replicate()];
        let mut x = vec![0.0; self.window.width()];
        self.fill_innovations(&mut self.stream_for(replicate), &mut z);
        self.evaluate(&z, &mut x);
        WindowSeq::from_raw(self.window.lo, x)
    }

    /// All replicates, in replicate order.
    pub fn run(&self) -> Vec<WindowSeq> {
        self.fold(
            Vec::new,
            |mut acc, _, x| {
                acc.push(WindowSeq::from_raw(self.window.lo, x.to_vec()));
                acc
            },
            |mut a, b| {
                a.extend(b);
                a
            },
        )
    }

    /// Parallel fold over replicates without materializing them.
    ///
    /// `step` sees `(acc, replicate index, window values)`. Blocks of
    /// replicates are folded independently and combined left to right, so the
    /// result does not depend on scheduling.
    pub fn fold<T, I, F, R>(&self, identity: I, step: F, combine: R) -> T
    where
        T: Send,
        I: Fn() -> T + Sync,
        F: Fn(T, usize, &[f64]) -> T + Sync,
        R: Fn(T, T) -> T,
    {
        let draws = self.draws_per_replicate();
        let width = self.window.width();
        let blocks = self.replicates.div_ceil(BLOCK_REPLICATES);
        let parts: Vec<T> = (0..blocks)
            .into_par_iter()
            .map(|b| {
                let start = b * BLOCK_REPLICATES;
                let end = (start + BLOCK_REPLICATES).min(self.replicates);
                let mut stream = self.stream_for(start);
                let mut z = vec![0.0; draws];
                let mut x = vec![0.0; width];
                let mut acc = identity();
                for r in start..end {
                    self.fill_innovations(&mut stream, &mut z);
                    self.evaluate(&z, &mut x);
                    acc = step(acc, r, &x);
                }
                acc
            })
            .collect();
        parts.into_iter().reduce(combine).unwrap_or_else(identity)
    }
}

/// Simulates and collects all replicates.
#[allow(clippy::too_many_arguments)]
pub fn simulate(
    coeffs: &CoefficientSeq,
    order: Order,
    model: &TailModel,
    window: IndexWindow,
    replicates: usize,
    seed: u64,
    trunc_eps: Option<f64>,
) -> Result<Vec<WindowSeq>> {
    Ok(Simulator::new(coeffs, order, *model, window, replicates, seed, trunc_eps)?.run())
}

/// Monte Carlo estimate of `t * P[sum_{N < j <= N_max} psi_j Z_{-j} > b(t) x]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationDiagnostic {
    pub value: f64,
    pub stderr: f64,
    pub count: u64,
    pub replicates: usize,
    /// Reference depth standing in for infinity.
    pub n_max: usize,
}

pub fn truncation_diagnostic(
    coeffs: &CoefficientSeq,
    model: &TailModel,
    n: usize,
    t: f64,
    x: f64,
    replicates: usize,
    seed: u64,
) -> Result<TruncationDiagnostic> {
    model.validate()?;
    if replicates == 0 {
        return param("replicate count must be positive");
    }
    if !(x > 0.0) {
        return param(format!("threshold multiplier must be positive, got {x}"));
    }
    let threshold = model.quantile_b(t)? * x;
    let s = coeffs
        .power_sum(1.0)
        .ok_or_else(|| Error::Unsupported("sum psi_j diverges".into()))?;
    let n_max = choose_truncation(coeffs, DIAGNOSTIC_REL_EPS * s.value)?;
    if n_max > MAX_SIMULATION_DEPTH {
        return Err(Error::Unsupported(format!(
            "reference depth {n_max} exceeds {MAX_SIMULATION_DEPTH}"
        )));
    }
    if n_max <= n {
        return Ok(TruncationDiagnostic {
            value: 0.0,
            stderr: 0.0,
            count: 0,
            replicates,
            n_max,
        });
    }
    let tail_psi: Vec<f64> = (n + 1..=n_max).map(|j| coeffs.psi(j)).collect();
    let draws = tail_psi.len();
    let blocks = replicates.div_ceil(BLOCK_REPLICATES);
    let count: u64 = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let start = b * BLOCK_REPLICATES;
            let end = (start + BLOCK_REPLICATES).min(replicates);
            let mut stream = UniformStream::at(seed, STREAM_DIAGNOSTIC, (start * draws) as u64);
            let mut hits = 0u64;
            for _ in start..end {
                let sum: f64 = tail_psi
                    .iter()
                    .map(|p| p * model.inverse_survival(stream.next_open_closed()))
                    .sum();
                hits += (sum > threshold) as u64;
            }
            hits
        })
        .sum();
    let scale = t / replicates as f64;
    Ok(TruncationDiagnostic {
        value: scale * count as f64,
        stderr: scale * (count as f64).sqrt(),
        count,
        replicates,
        n_max,
    })
}
