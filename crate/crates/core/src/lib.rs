//! Heavy-tailed moving-average processes in sequence space.
//!
//! `X_k = sum_j psi_j Z_{k-j}` with non-negative coefficients and i.i.d.
//! Pareto-type innovations. The crate simulates `X^m` and a truncated `X`,
//! evaluates the regular-variation limit measures of these processes on
//! upper rectangles (including the hidden limits at scalings
//! `b(t^(1/(j+1)))`), and estimates the same quantities by Monte Carlo.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimation;
pub mod innovations;
pub mod limits;
pub mod ma;
pub mod rng;
pub mod sequence;
pub mod series;

pub use error::{Error, Result};
pub use estimation::{
    convergence_table, default_tail_level, empirical_tail_measure, hill, hrv_scan,
    theoretical_value, ConvergenceCell, HrvRow, ScanEntry, ScanRow, ScanSetup, TailMeasureEstimate,
    DEFAULT_INTEGRATION_BUDGET,
};
pub use innovations::{sample, TailFamily, TailModel};
pub use limits::{
    marginal_tail_constant, mu_j_rect, nu_alpha_tail, nu_inf_0_rect, nu_m0_rect, nu_m_j_rect,
    spike_cover_number, EvalMethod, MeasureValue, UpperRect,
};
pub use ma::{
    apply_tm, check_assumptions, choose_truncation, simulate, tm_continuity_modulus,
    truncation_diagnostic, AssumptionReport, CoefficientSeq, IndexWindow, Order, Simulator,
    TruncationDiagnostic,
};
pub use sequence::{ConeLabel, WindowSeq};
pub use series::SeriesSum;
