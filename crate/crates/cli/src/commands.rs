use std::path::Path;

use marv::{
    convergence_table, hill as hill_estimate, theoretical_value, EvalMethod, MeasureValue, Order,
    ScanEntry, Simulator, WindowSeq,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::output::write_table;
use crate::CliError;

/// Replicates simulated per parallel batch while streaming `simulate` output.
const SIMULATE_BATCH: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub replicate_id: usize,
    pub index: i64,
    pub value: f64,
}

const SAMPLE_COLUMNS: &[&str] = &["replicate_id", "index", "value"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitRecord {
    pub row: usize,
    pub j: usize,
    pub rect: String,
    /// `ok`, `infinite` or `error`.
    pub status: &'static str,
    pub value: Option<f64>,
    pub method: Option<&'static str>,
    pub stderr: Option<f64>,
    pub truncation_bound: Option<f64>,
    pub note: Option<String>,
}

const LIMIT_COLUMNS: &[&str] = &[
    "row",
    "j",
    "rect",
    "status",
    "value",
    "method",
    "stderr",
    "truncation_bound",
    "note",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyRecord {
    pub t: f64,
    pub row: usize,
    pub j: usize,
    pub rect: String,
    pub status: &'static str,
    pub empirical: Option<f64>,
    pub stderr: Option<f64>,
    pub count: Option<u64>,
    pub degenerate: Option<bool>,
    pub theoretical: Option<f64>,
    pub theoretical_stderr: Option<f64>,
    pub method: Option<&'static str>,
    pub abs_error: Option<f64>,
    pub z_score: Option<f64>,
    pub reason: Option<String>,
}

const VERIFY_COLUMNS: &[&str] = &[
    "t",
    "row",
    "j",
    "rect",
    "status",
    "empirical",
    "stderr",
    "count",
    "degenerate",
    "theoretical",
    "theoretical_stderr",
    "method",
    "abs_error",
    "z_score",
    "reason",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HillRecord {
    pub alpha_hat: f64,
    pub k: usize,
    pub n_values: usize,
    pub source: String,
}

const HILL_COLUMNS: &[&str] = &["alpha_hat", "k", "n_values", "source"];

fn header(command: &str, cfg: &ExperimentConfig, extra: serde_json::Value) -> serde_json::Value {
    let mut h = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
    });
    if let (Some(h), serde_json::Value::Object(extra)) = (h.as_object_mut(), extra) {
        h.extend(extra);
    }
    h
}

fn method_name(m: &EvalMethod) -> &'static str {
    match m {
        EvalMethod::ClosedForm => "closed_form",
        EvalMethod::Enumeration => "enumeration",
        EvalMethod::MonteCarloIntegration { .. } => "monte_carlo_integration",
        EvalMethod::NotBoundedAway { .. } => "not_bounded_away",
    }
}

fn infinite_note(v: &MeasureValue) -> String {
    match v.method {
        EvalMethod::NotBoundedAway {
            cover_number,
            required,
        } => format!("+inf (not bounded away: spike cover number {cover_number} < {required})"),
        _ => "+inf (not bounded away)".into(),
    }
}

fn require_rows(cfg: &ExperimentConfig) -> Result<(), CliError> {
    if cfg.rows.is_empty() {
        return Err(CliError::Config(
            "at least one [[rows]] entry is required".into(),
        ));
    }
    Ok(())
}

fn build_simulator(cfg: &ExperimentConfig) -> Result<Simulator, CliError> {
    let resolved = cfg.resolve()?;
    let n = cfg.n()?;
    let window = cfg.window(&resolved.rows)?;
    let s = &resolved.setup;
    let trunc = match s.order {
        Order::Infinite => s.trunc_eps,
        Order::Finite(_) => None,
    };
    Ok(Simulator::new(
        &s.coeffs,
        s.order,
        s.model,
        window,
        n,
        cfg.run.seed,
        trunc,
    )?)
}

/// Sparse `(replicate, index, value)` records in replicate then index order.
fn sample_records(sim: &Simulator) -> impl Iterator<Item = SampleRecord> + '_ {
    (0..sim.replicates())
        .step_by(SIMULATE_BATCH)
        .flat_map(move |start| {
            let end = (start + SIMULATE_BATCH).min(sim.replicates());
            let batch: Vec<WindowSeq> = (start..end)
                .into_par_iter()
                .map(|r| sim.replicate(r))
                .collect();
            batch.into_iter().enumerate().flat_map(move |(offset, x)| {
                x.iter()
                    .filter(|&(_, v)| v != 0.0)
                    .map(|(index, value)| SampleRecord {
                        replicate_id: start + offset,
                        index,
                        value,
                    })
                    .collect::<Vec<_>>()
            })
        })
}

pub fn simulate(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let sim = build_simulator(cfg)?;
    let w = sim.window();
    let h = header(
        "simulate",
        cfg,
        json!({
            "seed": cfg.run.seed,
            "replicates": sim.replicates(),
            "window": [w.lo, w.hi],
            "truncation_depth": sim.depth(),
        }),
    );
    write_table(
        cfg.output.path.as_deref(),
        cfg.output.format,
        &h,
        SAMPLE_COLUMNS,
        sample_records(&sim).map(Ok),
    )
}

pub fn limits(cfg: &ExperimentConfig) -> Result<(), CliError> {
    require_rows(cfg)?;
    let resolved = cfg.resolve()?;
    let records: Vec<LimitRecord> = resolved
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let base = LimitRecord {
                row: i,
                j: row.j,
                rect: row.rect.to_string(),
                status: "ok",
                value: None,
                method: None,
                stderr: None,
                truncation_bound: None,
                note: None,
            };
            match theoretical_value(&resolved.setup, row, i, cfg.run.seed) {
                Ok(v) if v.is_infinite() => LimitRecord {
                    status: "infinite",
                    method: Some(method_name(&v.method)),
                    note: Some(infinite_note(&v)),
                    ..base
                },
                Ok(v) => LimitRecord {
                    value: Some(v.value),
                    method: Some(method_name(&v.method)),
                    stderr: Some(v.stderr()),
                    truncation_bound: v.truncation_bound,
                    ..base
                },
                Err(e) => LimitRecord {
                    status: "error",
                    note: Some(e.to_string()),
                    ..base
                },
            }
        })
        .collect();
    let h = header("limits", cfg, json!({ "seed": cfg.run.seed }));
    write_table(
        cfg.output.path.as_deref(),
        cfg.output.format,
        &h,
        LIMIT_COLUMNS,
        records.into_iter().map(Ok),
    )
}

pub fn verify(cfg: &ExperimentConfig) -> Result<(), CliError> {
    require_rows(cfg)?;
    let resolved = cfg.resolve()?;
    let n = cfg.n()?;
    let grid = cfg.t_grid()?;
    let cells = convergence_table(&resolved.setup, &resolved.rows, n, &grid, cfg.run.seed)?;
    let records = cells.into_iter().map(|c| {
        Ok(match c.entry {
            ScanEntry::Ok(r) => VerifyRecord {
                t: c.t,
                row: c.row,
                j: r.j,
                rect: r.rect.to_string(),
                status: "ok",
                empirical: Some(r.empirical.value),
                stderr: Some(r.empirical.stderr),
                count: Some(r.empirical.count),
                degenerate: Some(r.empirical.degenerate),
                theoretical: Some(r.theoretical.value),
                theoretical_stderr: Some(r.theoretical.stderr()),
                method: Some(method_name(&r.theoretical.method)),
                abs_error: Some(r.abs_error()),
                z_score: Some(r.z_score()),
                reason: None,
            },
            ScanEntry::Failed { j, rect, reason } => VerifyRecord {
                t: c.t,
                row: c.row,
                j,
                rect: rect.to_string(),
                status: "error",
                empirical: None,
                stderr: None,
                count: None,
                degenerate: None,
                theoretical: None,
                theoretical_stderr: None,
                method: None,
                abs_error: None,
                z_score: None,
                reason: Some(reason),
            },
        })
    });
    let h = header(
        "verify",
        cfg,
        json!({ "seed": cfg.run.seed, "n": n, "t_grid": grid }),
    );
    write_table(
        cfg.output.path.as_deref(),
        cfg.output.format,
        &h,
        VERIFY_COLUMNS,
        records,
    )
}

#[derive(Deserialize)]
struct JsonSamples {
    rows: Vec<SampleRecord>,
}

/// Positive values of a `simulate` output file, in file order.
pub fn read_samples(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", path.display())))?;
    let bad = |e: String| CliError::Validation(format!("{}: {e}", path.display()));
    let records: Vec<SampleRecord> = if text.trim_start().starts_with('{') {
        serde_json::from_str::<JsonSamples>(&text)
            .map_err(|e| bad(e.to_string()))?
            .rows
    } else {
        csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes())
            .deserialize()
            .collect::<Result<_, _>>()
            .map_err(|e| bad(e.to_string()))?
    };
    Ok(records.into_iter().map(|r| r.value).collect())
}

/// Positive values of a fresh simulation, in the order `simulate` writes them.
pub fn simulated_values(cfg: &ExperimentConfig) -> Result<Vec<f64>, CliError> {
    let sim = build_simulator(cfg)?;
    Ok(sample_records(&sim).map(|r| r.value).collect())
}

pub fn hill(cfg: &ExperimentConfig, input: Option<&Path>) -> Result<(), CliError> {
    let (values, source) = match input {
        Some(p) => (read_samples(p)?, p.display().to_string()),
        None => (simulated_values(cfg)?, "simulation".to_string()),
    };
    let k = match cfg.run.k {
        Some(k) => k,
        None => (marv::estimation::K_TARGET as usize).min(values.len().saturating_sub(1)),
    };
    let alpha_hat = hill_estimate(&values, k)?;
    let h = header("hill", cfg, json!({ "seed": cfg.run.seed, "k": k }));
    let record = HillRecord {
        alpha_hat,
        k,
        n_values: values.len(),
        source,
    };
    write_table(
        cfg.output.path.as_deref(),
        cfg.output.format,
        &h,
        HILL_COLUMNS,
        [Ok(record)],
    )
}
