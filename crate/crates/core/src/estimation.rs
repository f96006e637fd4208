//! Empirical tail measures and their comparison with the limit measures.
//!
//! The order-`j` estimate of a rectangle `A` at tail level `t` is
//! `(t / n) * #{r : X_r / b(t^(1/(j+1))) in A}` over `n` independent
//! replicates, with Poisson standard error `(t / n) * sqrt(count)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{param, Error, Result};
use crate::innovations::TailModel;
use crate::limits::{
    mu_j_rect, nu_inf_0_rect, nu_m0_rect, nu_m_j_rect, spike_cover_number, MeasureValue, UpperRect,
};
use crate::ma::{CoefficientSeq, IndexWindow, Order, Simulator, DEFAULT_TRUNC_REL_EPS};
use crate::sequence::WindowSeq;

/// Target number of exceedances behind the default tail level `t = n / K_TARGET`.
pub const K_TARGET: f64 = 1000.0;

/// Default integration budget for `nu_m_j_rect` inside scans.
pub const DEFAULT_INTEGRATION_BUDGET: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailMeasureEstimate {
    pub value: f64,
    pub t: f64,
    /// `n / t`, the exceedance count expected for a set of unit limit mass.
    pub k_exceed: f64,
    pub n: usize,
    pub count: u64,
    pub stderr: f64,
    /// No replicate fell in the set.
    pub degenerate: bool,
}

impl TailMeasureEstimate {
    pub fn from_count(t: f64, n: usize, count: u64) -> Self {
        let scale = t / n as f64;
        Self {
            value: scale * count as f64,
            t,
            k_exceed: n as f64 / t,
            n,
            count,
            stderr: scale * (count as f64).sqrt(),
            degenerate: count == 0,
        }
    }
}

/// `t` such that about `K_TARGET` exceedances are expected, at least 1.
pub fn default_tail_level(n: usize) -> f64 {
    (n as f64 / K_TARGET).max(1.0)
}

fn check_level(t: f64, exponent: f64) -> Result<()> {
    if !(t >= 1.0 && t.is_finite()) {
        return param(format!("tail level t must be >= 1, got {t}"));
    }
    if !(exponent > 0.0 && exponent <= 1.0) {
        return param(format!(
            "scaling exponent must lie in (0, 1], got {exponent}"
        ));
    }
    Ok(())
}

#[inline]
fn in_scaled_rect(x: impl Fn(i64) -> f64, b: f64, rect: &UpperRect) -> bool {
    rect.iter().all(|(k, a)| x(k) / b > a)
}

/// `(t / n) * #{i : samples_i / b(t^exponent) in rect}`.
pub fn empirical_tail_measure(
    samples: &[WindowSeq],
    model: &TailModel,
    t: f64,
    scaling_exponent: f64,
    rect: &UpperRect,
) -> Result<TailMeasureEstimate> {
    check_level(t, scaling_exponent)?;
    if samples.is_empty() {
        return param("no samples");
    }
    let b = model.quantile_b(t.powf(scaling_exponent))?;
    let count = samples
        .par_iter()
        .filter(|x| in_scaled_rect(|k| x.get(k), b, rect))
        .count() as u64;
    Ok(TailMeasureEstimate::from_count(t, samples.len(), count))
}

/// Hill estimate `k / sum_{i<=k} ln(X_(n-i+1) / X_(n-k))` of the tail index.
pub fn hill(values: &[f64], k: usize) -> Result<f64> {
    let n = values.len();
    if k < 2 || k >= n {
        return param(format!("Hill estimator needs 2 <= k < n, got k={k}, n={n}"));
    }
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return param(format!("Hill estimator needs positive values, got {v}"));
    }
    let mut sorted = values.to_vec();
    // descending: the k largest land in sorted[..k], X_(n-k) at sorted[k]
    sorted.select_nth_unstable_by(k, |a, b| b.total_cmp(a));
    let pivot = sorted[k];
    let sum: f64 = sorted[..k].iter().map(|x| (x / pivot).ln()).sum();
    if sum <= 0.0 {
        return param("top order statistics are tied; Hill estimate undefined");
    }
    Ok(k as f64 / sum)
}

/// Model shared by every row of a scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanSetup {
    pub coeffs: CoefficientSeq,
    pub order: Order,
    pub model: TailModel,
    /// MA(∞) truncation tolerance; `None` means `1e-8 * sum psi_j`.
    pub trunc_eps: Option<f64>,
    pub integration_budget: usize,
}

impl ScanSetup {
    pub fn new(coeffs: CoefficientSeq, order: Order, model: TailModel) -> Self {
        Self {
            coeffs,
            order,
            model,
            trunc_eps: None,
            integration_budget: DEFAULT_INTEGRATION_BUDGET,
        }
    }

    fn resolved_trunc_eps(&self) -> Result<f64> {
        match self.trunc_eps {
            Some(e) => Ok(e),
            None => {
                let s = self.coeffs.power_sum(1.0).ok_or_else(|| {
                    Error::Unsupported("MA(∞) needs sum psi_j < inf, which fails here".into())
                })?;
                Ok(DEFAULT_TRUNC_REL_EPS * s.value)
            }
        }
    }
}

/// One target set of a scan: order `j` and rectangle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    pub j: usize,
    pub rect: UpperRect,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HrvRow {
    pub j: usize,
    pub scaling_exponent: f64,
    pub rect: UpperRect,
    pub empirical: TailMeasureEstimate,
    pub theoretical: MeasureValue,
}

impl HrvRow {
    pub fn abs_error(&self) -> f64 {
        (self.empirical.value - self.theoretical.value).abs()
    }

    /// Difference in units of the combined standard error.
    pub fn z_score(&self) -> f64 {
        let diff = self.empirical.value - self.theoretical.value;
        let se = self.empirical.stderr.hypot(self.theoretical.stderr());
        if se > 0.0 {
            diff / se
        } else if diff == 0.0 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        }
    }
}

/// A scan row, or the reason it could not be evaluated.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ScanEntry {
    Ok(HrvRow),
    Failed {
        j: usize,
        rect: UpperRect,
        reason: String,
    },
}

impl ScanEntry {
    pub fn row(&self) -> Option<&HrvRow> {
        match self {
            Self::Ok(r) => Some(r),
            Self::Failed { .. } => None,
        }
    }
}

/// The limit measure matching `row` under `setup`.
///
/// Integration for row number `index` uses seed `seed + 1 + index`.
pub fn theoretical_value(
    setup: &ScanSetup,
    row: &ScanRow,
    index: usize,
    seed: u64,
) -> Result<MeasureValue> {
    let alpha = setup.model.alpha;
    let rect = &row.rect;
    match (setup.order, row.j) {
        (Order::Infinite, 0) => {
            nu_inf_0_rect(&setup.coeffs, alpha, rect, setup.resolved_trunc_eps()?)
        }
        (Order::Infinite, _) => Err(Error::Unsupported(
            "hidden limits of order j >= 1 are only available for finite-order processes".into(),
        )),
        (Order::Finite(m), 0) => nu_m0_rect(&setup.coeffs, m, alpha, rect),
        (Order::Finite(0), j) => {
            // X = psi_0 Z
            let psi0 = setup.coeffs.psi(0);
            mu_j_rect(j, alpha, &rect.scaled(1.0 / psi0)?)
        }
        (Order::Finite(m), j) => nu_m_j_rect(
            &setup.coeffs,
            m,
            alpha,
            j,
            rect,
            setup.integration_budget,
            seed.wrapping_add(1 + index as u64),
        ),
    }
}

fn check_feasible(setup: &ScanSetup, row: &ScanRow) -> Result<()> {
    let m = match setup.order {
        Order::Finite(m) => m,
        Order::Infinite if row.j == 0 => return Ok(()),
        Order::Infinite => {
            return Err(Error::Unsupported(
                "hidden limits of order j >= 1 are only available for finite-order processes"
                    .into(),
            ))
        }
    };
    let cover = spike_cover_number(&setup.coeffs, m, &row.rect)?;
    if cover < row.j + 1 {
        return Err(Error::InfiniteMass(format!(
            "rectangle {} is not bounded away from T^{m}(C_<={}): spike cover number {cover} < {}",
            row.rect,
            row.j,
            row.j + 1
        )));
    }
    Ok(())
}

/// Smallest index window holding every constrained index.
fn rows_window(rows: &[ScanRow]) -> Option<IndexWindow> {
    let lo = rows.iter().map(|r| r.rect.min_index()).min()?;
    let hi = rows.iter().map(|r| r.rect.max_index()).max()?;
    Some(IndexWindow { lo, hi })
}

/// One row of the convergence table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceCell {
    pub t: f64,
    pub row: usize,
    pub entry: ScanEntry,
}

impl ConvergenceCell {
    pub fn abs_error(&self) -> Option<f64> {
        self.entry.row().map(HrvRow::abs_error)
    }
}

/// `hrv_scan` at each level of `t_grid`, sharing one simulation.
///
/// Every level reuses the same replicates (same `seed`), so each column
/// equals what `hrv_scan` returns for that `t` alone.
pub fn convergence_table(
    setup: &ScanSetup,
    rows: &[ScanRow],
    n: usize,
    t_grid: &[f64],
    seed: u64,
) -> Result<Vec<ConvergenceCell>> {
    if t_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return param("t grid must be strictly increasing");
    }
    for &t in t_grid {
        check_level(t, 1.0)?;
    }
    if n == 0 {
        return param("replicate count must be positive");
    }
    setup.model.validate()?;
    setup.coeffs.validate()?;
    if t_grid.is_empty() || rows.is_empty() {
        return Ok(Vec::new());
    }

    // theoretical side, per row
    let prepared: Vec<Result<MeasureValue>> = rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            check_feasible(setup, row)?;
            theoretical_value(setup, row, i, seed)
        })
        .collect();

    // empirical side: counts for every (t, feasible row)
    let live: Vec<usize> = (0..rows.len()).filter(|&i| prepared[i].is_ok()).collect();
    let mut counts = vec![vec![0u64; rows.len()]; t_grid.len()];
    if let Some(window) = rows_window(&live.iter().map(|&i| rows[i].clone()).collect::<Vec<_>>()) {
        let sim = Simulator::new(
            &setup.coeffs,
            setup.order,
            setup.model,
            window,
            n,
            seed,
            match setup.order {
                Order::Infinite => Some(setup.resolved_trunc_eps()?),
                Order::Finite(_) => None,
            },
        )?;
        let mut cells: Vec<(usize, usize, f64)> = Vec::new();
        for (ti, &t) in t_grid.iter().enumerate() {
            for &ri in &live {
                let exponent = 1.0 / (rows[ri].j + 1) as f64;
                cells.push((ti, ri, setup.model.quantile_b(t.powf(exponent))?));
            }
        }
        let lo = window.lo;
        let hits = sim.fold(
            || vec![0u64; cells.len()],
            |mut acc, _, x| {
                for (c, &(_, ri, b)) in cells.iter().enumerate() {
                    if in_scaled_rect(|k| x[(k - lo) as usize], b, &rows[ri].rect) {
                        acc[c] += 1;
                    }
                }
                acc
            },
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
        for (&(ti, ri, _), h) in cells.iter().zip(hits) {
            counts[ti][ri] = h;
        }
    }

    let mut out = Vec::with_capacity(t_grid.len() * rows.len());
    for (ti, &t) in t_grid.iter().enumerate() {
        for (ri, row) in rows.iter().enumerate() {
            let entry = match &prepared[ri] {
                Ok(theoretical) => ScanEntry::Ok(HrvRow {
                    j: row.j,
                    scaling_exponent: 1.0 / (row.j + 1) as f64,
                    rect: row.rect.clone(),
                    empirical: TailMeasureEstimate::from_count(t, n, counts[ti][ri]),
                    theoretical: theoretical.clone(),
                }),
                Err(e) => ScanEntry::Failed {
                    j: row.j,
                    rect: row.rect.clone(),
                    reason: e.to_string(),
                },
            };
            out.push(ConvergenceCell { t, row: ri, entry });
        }
    }
    Ok(out)
}

/// Simulates `n` replicates once and pairs each row's empirical tail measure
/// (at scaling `b(t^(1/(j+1)))`) with the matching limit measure.
pub fn hrv_scan(
    setup: &ScanSetup,
    rows: &[ScanRow],
    n: usize,
    t: f64,
    seed: u64,
) -> Result<Vec<ScanEntry>> {
    Ok(convergence_table(setup, rows, n, &[t], seed)?
        .into_iter()
        .map(|c| c.entry)
        .collect())
}
