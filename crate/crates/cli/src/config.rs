//! Experiment configuration: a TOML file plus `--set key=value` overrides.

use std::path::{Path, PathBuf};

use marv::{
    check_assumptions, CoefficientSeq, IndexWindow, Order, ScanRow, ScanSetup, TailFamily,
    TailModel, UpperRect, DEFAULT_INTEGRATION_BUDGET,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub coefficients: CoefficientsConfig,
    #[serde(default)]
    pub tail: TailConfig,
    #[serde(default)]
    pub rows: Vec<RowConfig>,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientsConfig {
    /// `explicit_finite`, `geometric` or `polynomial`.
    #[serde(default = "explicit_finite")]
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Integer `m` or `"infinite"`; explicit lists default to their last index.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<OrderSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trunc_eps: Option<f64>,
}

impl Default for CoefficientsConfig {
    fn default() -> Self {
        Self {
            family: "explicit_finite".into(),
            psi: Some(vec![1.0]),
            rho: None,
            beta: None,
            order: None,
            trunc_eps: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OrderSpec {
    Finite(usize),
    Named(OrderName),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderName {
    Infinite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailConfig {
    #[serde(default = "standard_pareto")]
    pub family: TailFamily,
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default = "one")]
    pub scale: f64,
}

impl Default for TailConfig {
    fn default() -> Self {
        Self {
            family: TailFamily::StandardPareto,
            alpha: 1.0,
            scale: 1.0,
        }
    }
}

fn one() -> f64 {
    1.0
}

fn explicit_finite() -> String {
    "explicit_finite".into()
}

fn standard_pareto() -> TailFamily {
    TailFamily::StandardPareto
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowConfig {
    #[serde(default)]
    pub j: usize,
    /// `"index:threshold, ..."`.
    pub rect: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Defaults to `n / 1000`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
    /// `[lo, hi]`; defaults to the span of the rows, else `[0, 0]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<[i64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integration_budget: Option<usize>,
    /// Hill order statistic count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    // not echoed: where a file lands has no bearing on its content
    #[serde(default, skip_serializing)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

/// Reads `path` (if any) and applies `overrides` in order.
pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<ExperimentConfig, CliError> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?,
        None => String::new(),
    };
    let mut doc: toml::Table = text
        .parse()
        .map_err(|e| CliError::Config(format!("config is not valid TOML: {e}")))?;
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    toml::Value::Table(doc)
        .try_into()
        .map_err(|e| CliError::Config(format!("bad config: {e}")))
}

/// `a.b.c=value`; the value is read as TOML and falls back to a bare string.
fn apply_override(doc: &mut toml::Table, spec: &str) -> Result<(), CliError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--set expects key=value, got {spec:?}")))?;
    let value = parse_value(raw.trim());
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("bad --set key {key:?}")));
    }
    let (last, parents) = parts.split_last().unwrap();
    let mut table = doc;
    for p in parents {
        let entry = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("--set {key}: {p} is not a section")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Everything a command needs, validated before any work starts.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub setup: ScanSetup,
    pub rows: Vec<ScanRow>,
    pub config: ExperimentConfig,
}

impl ExperimentConfig {
    pub fn coefficients(&self) -> Result<CoefficientSeq, CliError> {
        let c = &self.coefficients;
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| {
                CliError::Config(format!(
                    "coefficients.{name} is required for family {}",
                    c.family
                ))
            })
        };
        let coeffs = match c.family.as_str() {
            "explicit_finite" => CoefficientSeq::explicit(c.psi.clone().ok_or_else(|| {
                CliError::Config("coefficients.psi is required for explicit_finite".into())
            })?),
            "geometric" => CoefficientSeq::geometric(need(c.rho, "rho")?),
            "polynomial" => CoefficientSeq::polynomial(need(c.beta, "beta")?),
            other => {
                return Err(CliError::Config(format!(
                    "unknown coefficient family {other:?}"
                )))
            }
        };
        Ok(coeffs?)
    }

    pub fn order(&self, coeffs: &CoefficientSeq) -> Result<Order, CliError> {
        match (self.coefficients.order, coeffs.finite_order()) {
            (Some(OrderSpec::Named(OrderName::Infinite)), _) => Ok(Order::Infinite),
            (Some(OrderSpec::Finite(m)), _) => Ok(Order::Finite(m)),
            (None, Some(m)) => Ok(Order::Finite(m)),
            (None, None) => Err(CliError::Config(
                "coefficients.order is required for infinite coefficient families".into(),
            )),
        }
    }

    pub fn model(&self) -> Result<TailModel, CliError> {
        Ok(TailModel::new(
            self.tail.family,
            self.tail.alpha,
            self.tail.scale,
        )?)
    }

    pub fn scan_rows(&self) -> Result<Vec<ScanRow>, CliError> {
        self.rows
            .iter()
            .map(|r| {
                let rect: UpperRect = r
                    .rect
                    .parse()
                    .map_err(|e| CliError::Config(format!("row rect {:?}: {e}", r.rect)))?;
                Ok(ScanRow { j: r.j, rect })
            })
            .collect()
    }

    pub fn n(&self) -> Result<usize, CliError> {
        match self.run.n {
            Some(n) if n > 0 => Ok(n),
            Some(_) => Err(CliError::Config("run.n must be positive".into())),
            None => Err(CliError::Config("run.n is required".into())),
        }
    }

    /// Explicit grid, else the single level `t`, else `n / 1000`.
    pub fn t_grid(&self) -> Result<Vec<f64>, CliError> {
        let grid = match (&self.run.t_grid, self.run.t) {
            (Some(g), _) => g.clone(),
            (None, Some(t)) => vec![t],
            (None, None) => vec![marv::default_tail_level(self.n()?)],
        };
        if grid.iter().any(|t| !(t.is_finite() && *t >= 1.0)) {
            return Err(CliError::Config(format!(
                "tail levels must be finite and >= 1, got {grid:?}"
            )));
        }
        if grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(CliError::Config(
                "run.t_grid must be strictly increasing".into(),
            ));
        }
        Ok(grid)
    }

    pub fn window(&self, rows: &[ScanRow]) -> Result<IndexWindow, CliError> {
        if let Some([lo, hi]) = self.run.window {
            return Ok(IndexWindow::new(lo, hi)?);
        }
        let lo = rows.iter().map(|r| r.rect.min_index()).min().unwrap_or(0);
        let hi = rows.iter().map(|r| r.rect.max_index()).max().unwrap_or(0);
        Ok(IndexWindow::new(lo, hi)?)
    }

    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let coeffs = self.coefficients()?;
        let model = self.model()?;
        let order = self.order(&coeffs)?;
        let report = check_assumptions(&coeffs, model.alpha)?;
        if order == Order::Infinite && report.a2_delta.is_none() {
            return Err(CliError::Assumption(format!(
                "(A2) cannot be certified for {:?} with alpha = {}",
                coeffs, model.alpha
            )));
        }
        if let Some(eps) = self.coefficients.trunc_eps {
            if !(eps > 0.0) {
                return Err(CliError::Config(format!(
                    "coefficients.trunc_eps must be positive, got {eps}"
                )));
            }
        }
        let budget = self
            .run
            .integration_budget
            .unwrap_or(DEFAULT_INTEGRATION_BUDGET);
        if budget == 0 {
            return Err(CliError::Config(
                "run.integration_budget must be positive".into(),
            ));
        }
        let mut setup = ScanSetup::new(coeffs, order, model);
        setup.trunc_eps = self.coefficients.trunc_eps;
        setup.integration_budget = budget;
        Ok(Resolved {
            setup,
            rows: self.scan_rows()?,
            config: self.clone(),
        })
    }
}
