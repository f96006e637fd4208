//! Limit measures evaluated on upper rectangles `{x : x_k > a_k, k in K}`.
//!
//! * `mu_j_rect`: the i.i.d. limit `mu^(j)`, a sum over `(j+1)`-point spike
//!   configurations of products of `nu_alpha(x, inf) = x^-alpha`.
//! * `nu_m0_rect`: the MA(m) limit at the coarsest scaling, one spike
//!   `z e_i` pushed through `T^m`.
//! * `nu_m_j_rect`: the MA(m) limit at scaling `b(t^(1/(j+1)))`, integrated
//!   over `(j+1)`-spike configurations by Monte Carlo.
//! * `nu_inf_0_rect`: the MA(∞) limit at the coarsest scaling, by enumeration
//!   up to a truncation depth, with a bound on the omitted spikes.
//!
//! A rectangle has finite measure under the order-`j` limit exactly when it is
//! bounded away from `T^m(C_{<=j})`, i.e. when no `j` spikes can make every
//! constrained coordinate positive (`spike_cover_number >= j + 1`).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{param, Error, Result};
use crate::ma::{choose_truncation, CoefficientSeq};
use crate::rng::{UniformStream, STREAM_INTEGRATION};
use crate::sequence::WindowSeq;
use crate::series::SeriesSum;

/// Largest truncation depth `nu_inf_0_rect` enumerates.
pub const MAX_ENUMERATION_DEPTH: usize = 1 << 24;

/// `{x : x_k > a_k for all k in K}` with `K` finite and nonempty, `a_k > 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UpperRect {
    constraints: BTreeMap<i64, f64>,
}

impl UpperRect {
    pub fn new<I>(constraints: I) -> Result<Self>
    where
        I: IntoIterator<Item = (i64, f64)>,
    {
        let mut map = BTreeMap::new();
        for (k, a) in constraints {
            if !(a > 0.0 && a.is_finite()) {
                return param(format!("threshold at index {k} must be positive, got {a}"));
            }
            if map.insert(k, a).is_some() {
                return param(format!("index {k} constrained twice"));
            }
        }
        if map.is_empty() {
            return param("rectangle needs at least one constrained index");
        }
        Ok(Self { constraints: map })
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.constraints.iter().map(|(&k, &a)| (k, a))
    }

    pub fn thresholds(&self) -> impl Iterator<Item = f64> + '_ {
        self.constraints.values().copied()
    }

    pub fn min_index(&self) -> i64 {
        *self.constraints.keys().next().unwrap()
    }

    pub fn max_index(&self) -> i64 {
        *self.constraints.keys().next_back().unwrap()
    }

    /// `lam * rect`.
    pub fn scaled(&self, lam: f64) -> Result<Self> {
        if !(lam > 0.0 && lam.is_finite()) {
            return param(format!("scale factor must be positive, got {lam}"));
        }
        Self::new(self.iter().map(|(k, a)| (k, a * lam)))
    }

    pub fn contains(&self, x: &WindowSeq) -> bool {
        self.iter().all(|(k, a)| x.get(k) > a)
    }
}

impl fmt::Display for UpperRect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.iter().map(|(k, a)| format!("{k}:{a}")).collect();
        write!(f, "{}", parts.join(","))
    }
}

/// Parses `"0:1, 2:1.5"`.
impl FromStr for UpperRect {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, a) = part.split_once(':').ok_or_else(|| {
                Error::Parameter(format!("expected index:threshold, got {part:?}"))
            })?;
            let k: i64 = k
                .trim()
                .parse()
                .map_err(|_| Error::Parameter(format!("bad index in {part:?}")))?;
            let a: f64 = a
                .trim()
                .parse()
                .map_err(|_| Error::Parameter(format!("bad threshold in {part:?}")))?;
            pairs.push((k, a));
        }
        Self::new(pairs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EvalMethod {
    ClosedForm,
    Enumeration,
    MonteCarloIntegration {
        stderr: f64,
    },
    /// The set meets every neighbourhood of the removed cone; the value is `+inf`.
    NotBoundedAway {
        cover_number: usize,
        required: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureValue {
    pub value: f64,
    pub method: EvalMethod,
    /// Bound on the mass omitted by truncating an infinite enumeration.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation_bound: Option<f64>,
}

impl MeasureValue {
    fn new(value: f64, method: EvalMethod) -> Self {
        Self {
            value,
            method,
            truncation_bound: None,
        }
    }

    fn unbounded(cover_number: usize, required: usize) -> Self {
        Self::new(
            f64::INFINITY,
            EvalMethod::NotBoundedAway {
                cover_number,
                required,
            },
        )
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self.method, EvalMethod::NotBoundedAway { .. })
    }

    /// Monte Carlo standard error, zero for deterministic methods.
    pub fn stderr(&self) -> f64 {
        match self.method {
            EvalMethod::MonteCarloIntegration { stderr } => stderr,
            _ => 0.0,
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return param(format!("tail index must be positive, got {alpha}"));
    }
    Ok(())
}

/// `nu_alpha((a, inf)) = a^-alpha`.
pub fn nu_alpha_tail(a: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(a > 0.0) {
        return Err(Error::InfiniteMass(format!(
            "nu_alpha((a, inf)) is infinite for a = {a}"
        )));
    }
    Ok(a.powf(-alpha))
}

fn product_of_tails(thresholds: impl Iterator<Item = f64>, alpha: f64) -> f64 {
    thresholds.map(|a| a.powf(-alpha)).product()
}

/// `mu^(j)(rect)` for i.i.d. innovations.
pub fn mu_j_rect(j: usize, alpha: f64, rect: &UpperRect) -> Result<MeasureValue> {
    check_alpha(alpha)?;
    let k = rect.len();
    Ok(if k < j + 1 {
        MeasureValue::unbounded(k, j + 1)
    } else if k == j + 1 {
        MeasureValue::new(
            product_of_tails(rect.thresholds(), alpha),
            EvalMethod::ClosedForm,
        )
    } else {
        // mu^(j) lives on sequences with exactly j+1 positive coordinates
        MeasureValue::new(0.0, EvalMethod::ClosedForm)
    })
}

/// Spike position together with the bitmask of constrained coordinates it reaches.
#[derive(Debug, Clone, Copy)]
struct Reach {
    position: i64,
    mask: u64,
}

type Reaches = (Vec<(i64, f64)>, Vec<Reach>);

/// Constrained coordinates in index order, and every spike position that touches one.
fn reaches(coeffs: &CoefficientSeq, m: usize, rect: &UpperRect) -> Result<Reaches> {
    coeffs.validate()?;
    if rect.len() > 64 {
        return param(format!(
            "at most 64 constrained indices supported, got {}",
            rect.len()
        ));
    }
    let coords: Vec<(i64, f64)> = rect.iter().collect();
    let psi = coeffs.head(m);
    let reach = (rect.min_index() - m as i64..=rect.max_index())
        .filter_map(|i| {
            let mask = coords
                .iter()
                .enumerate()
                .filter(|(_, (k, _))| {
                    let lag = k - i;
                    (0..=m as i64).contains(&lag) && psi[lag as usize] > 0.0
                })
                .fold(0u64, |acc, (b, _)| acc | (1 << b));
            (mask != 0).then_some(Reach { position: i, mask })
        })
        .collect();
    Ok((coords, reach))
}

fn full_mask(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

fn min_cover(reach: &[Reach], full: u64) -> usize {
    fn search(reach: &[Reach], full: u64, covered: u64, used: usize, best: &mut usize) {
        if covered == full {
            *best = (*best).min(used);
            return;
        }
        if used + 1 >= *best {
            return;
        }
        let next = (!covered & full).trailing_zeros();
        for r in reach.iter().filter(|r| r.mask >> next & 1 == 1) {
            search(reach, full, covered | r.mask, used + 1, best);
        }
    }
    let mut best = full.count_ones() as usize;
    search(reach, full, 0, 0, &mut best);
    best
}

/// Fewest spikes whose `T^m` images make every constrained coordinate positive.
///
/// The rectangle is bounded away from `T^m(C_{<=j})` iff the result is `>= j + 1`.
pub fn spike_cover_number(coeffs: &CoefficientSeq, m: usize, rect: &UpperRect) -> Result<usize> {
    let (coords, reach) = reaches(coeffs, m, rect)?;
    Ok(min_cover(&reach, full_mask(coords.len())))
}

/// `nu^{m,(0)}(rect) = sum_i (max_{k in K} a_k / psi_{k-i})^-alpha` over
/// positions `i` whose spike reaches every constrained index.
pub fn nu_m0_rect(
    coeffs: &CoefficientSeq,
    m: usize,
    alpha: f64,
    rect: &UpperRect,
) -> Result<MeasureValue> {
    check_alpha(alpha)?;
    coeffs.validate()?;
    Ok(MeasureValue::new(
        single_spike_sum(coeffs, m, alpha, rect),
        EvalMethod::Enumeration,
    ))
}

fn single_spike_sum(coeffs: &CoefficientSeq, m: usize, alpha: f64, rect: &UpperRect) -> f64 {
    let (lo, hi) = (rect.max_index() - m as i64, rect.min_index());
    let mut total = 0.0;
    for i in lo..=hi {
        let mut threshold = 0.0f64;
        let mut feasible = true;
        for (k, a) in rect.iter() {
            let psi = coeffs.psi((k - i) as usize);
            if psi <= 0.0 {
                feasible = false;
                break;
            }
            threshold = threshold.max(a / psi);
        }
        if feasible {
            total += threshold.powf(-alpha);
        }
    }
    total
}

/// Sum of `psi_l^alpha`, i.e. the marginal limit `t P[X_k > b(t) x] -> c x^-alpha`.
pub fn marginal_tail_constant(coeffs: &CoefficientSeq, alpha: f64) -> Result<SeriesSum> {
    check_alpha(alpha)?;
    coeffs.validate()?;
    coeffs
        .power_sum(alpha)
        .ok_or_else(|| Error::Unsupported(format!("sum psi_l^{alpha} diverges for {coeffs:?}")))
}

/// `nu^(0)(rect)` for MA(∞): single-spike enumeration up to the depth
/// `N = choose_truncation(trunc_eps)`. Spikes further left reach the last
/// constrained index `k*` only through lags `l > N` and contribute at most
/// `a_{k*}^-alpha sum_{l>N} psi_l^alpha`, reported as `truncation_bound`.
pub fn nu_inf_0_rect(
    coeffs: &CoefficientSeq,
    alpha: f64,
    rect: &UpperRect,
    trunc_eps: f64,
) -> Result<MeasureValue> {
    marginal_tail_constant(coeffs, alpha)?;
    let n = choose_truncation(coeffs, trunc_eps)?;
    if n > MAX_ENUMERATION_DEPTH {
        return Err(Error::Unsupported(format!(
            "enumeration depth {n} exceeds {MAX_ENUMERATION_DEPTH}"
        )));
    }
    let mut value = nu_m0_rect(coeffs, n, alpha, rect)?;
    let last = rect.iter().last().unwrap().1;
    value.truncation_bound = Some(coeffs.power_tail_bound(n, alpha) * last.powf(-alpha));
    Ok(value)
}

/// Per-tuple integration plan: spike positions, their lower bounds, and the
/// coordinates that are not implied by those bounds.
struct TuplePlan {
    lags: Vec<Vec<(usize, f64)>>,
    lower: Vec<f64>,
    open: Vec<usize>,
}

fn plan_tuple(
    positions: &[i64],
    masks: &[u64],
    coords: &[(i64, f64)],
    psi: &[f64],
) -> Result<TuplePlan> {
    let m = psi.len() as i64 - 1;
    // (spike, psi) pairs acting on each coordinate
    let lags: Vec<Vec<(usize, f64)>> = coords
        .iter()
        .map(|(k, _)| {
            positions
                .iter()
                .enumerate()
                .filter_map(|(s, i)| {
                    let lag = k - i;
                    ((0..=m).contains(&lag) && psi[lag as usize] > 0.0)
                        .then(|| (s, psi[lag as usize]))
                })
                .collect()
        })
        .collect();
    let mut lower = vec![0.0f64; positions.len()];
    for (c, acting) in lags.iter().enumerate() {
        if let [(s, p)] = acting[..] {
            lower[s] = lower[s].max(coords[c].1 / p);
        }
    }
    if let Some(s) = lower.iter().position(|&l| l == 0.0) {
        // a spike with no coordinate of its own can shrink to zero
        return Err(Error::InfiniteMass(format!(
            "spike at {} is redundant in tuple {positions:?} (masks {masks:?})",
            positions[s]
        )));
    }
    let open = lags
        .iter()
        .enumerate()
        .filter(|(c, acting)| {
            let at_lower: f64 = acting.iter().map(|&(s, p)| lower[s] * p).sum();
            at_lower < coords[*c].1
        })
        .map(|(c, _)| c)
        .collect();
    Ok(TuplePlan { lags, lower, open })
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct TupleEstimate {
    value: f64,
    variance: f64,
}

fn integrate_tuple(
    plan: &TuplePlan,
    coords: &[(i64, f64)],
    alpha: f64,
    samples: usize,
    seed: u64,
    stream: u64,
) -> TupleEstimate {
    let mass = product_of_tails(plan.lower.iter().copied(), alpha);
    if plan.open.is_empty() {
        return TupleEstimate {
            value: mass,
            variance: 0.0,
        };
    }
    let mut rng = UniformStream::new(seed, stream);
    let mut z = vec![0.0; plan.lower.len()];
    let mut hits = 0u64;
    for _ in 0..samples {
        for (zs, l) in z.iter_mut().zip(&plan.lower) {
            *zs = l * rng.next_open_closed().powf(-1.0 / alpha);
        }
        let inside = plan.open.iter().all(|&c| {
            let x: f64 = plan.lags[c].iter().map(|&(s, p)| z[s] * p).sum();
            x > coords[c].1
        });
        hits += inside as u64;
    }
    let n = samples as f64;
    let p = hits as f64 / n;
    TupleEstimate {
        value: mass * p,
        variance: mass * mass * p * (1.0 - p) / n,
    }
}

/// Strictly increasing `size`-tuples of candidate indices whose masks cover `full`.
fn covering_tuples(reach: &[Reach], size: usize, full: u64) -> Vec<Vec<usize>> {
    fn go(
        reach: &[Reach],
        size: usize,
        full: u64,
        start: usize,
        covered: u64,
        cur: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if cur.len() == size {
            if covered == full {
                out.push(cur.clone());
            }
            return;
        }
        let needed = size - cur.len();
        for idx in start..reach.len() {
            if reach.len() - idx < needed {
                break;
            }
            cur.push(idx);
            go(
                reach,
                size,
                full,
                idx + 1,
                covered | reach[idx].mask,
                cur,
                out,
            );
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(reach, size, full, 0, 0, &mut Vec::new(), &mut out);
    out
}

/// `nu^{m,(j)}(rect)`: sum over increasing `(j+1)`-tuples of spike positions of
/// the `nu_alpha^{j+1}` mass of spike heights whose `T^m` image lies in `rect`.
///
/// Only tuples that jointly reach every constrained index contribute. When
/// the cover number equals `j + 1` each spike of such a tuple is the only one
/// acting on some coordinate `c`, which forces `z > a_c / psi`; heights are
/// proposed from `nu_alpha` conditioned above these bounds (mass
/// `prod L^-alpha`) and the remaining constraints are checked by sampling.
/// `integration_budget` samples are split evenly across tuples that need
/// sampling; tuple `i` draws from integration stream `i` of `seed`.
pub fn nu_m_j_rect(
    coeffs: &CoefficientSeq,
    m: usize,
    alpha: f64,
    j: usize,
    rect: &UpperRect,
    integration_budget: usize,
    seed: u64,
) -> Result<MeasureValue> {
    check_alpha(alpha)?;
    if integration_budget == 0 {
        return param("integration budget must be positive");
    }
    let (coords, reach) = reaches(coeffs, m, rect)?;
    let full = full_mask(coords.len());
    let cover = min_cover(&reach, full);
    if cover < j + 1 {
        return Ok(MeasureValue::unbounded(cover, j + 1));
    }
    let psi = coeffs.head(m);
    let plans: Vec<TuplePlan> = covering_tuples(&reach, j + 1, full)
        .into_iter()
        .map(|tuple| {
            let positions: Vec<i64> = tuple.iter().map(|&t| reach[t].position).collect();
            let masks: Vec<u64> = tuple.iter().map(|&t| reach[t].mask).collect();
            plan_tuple(&positions, &masks, &coords, &psi)
        })
        .collect::<Result<_>>()?;
    let sampled = plans.iter().filter(|p| !p.open.is_empty()).count().max(1);
    let per_tuple = (integration_budget / sampled).max(1);
    let estimates: Vec<TupleEstimate> = plans
        .par_iter()
        .enumerate()
        .map(|(i, plan)| {
            integrate_tuple(
                plan,
                &coords,
                alpha,
                per_tuple,
                seed,
                STREAM_INTEGRATION + i as u64,
            )
        })
        .collect();
    let value = estimates.iter().map(|e| e.value).sum();
    let variance: f64 = estimates.iter().map(|e| e.variance).sum();
    Ok(MeasureValue::new(
        value,
        EvalMethod::MonteCarloIntegration {
            stderr: variance.sqrt(),
        },
    ))
}
