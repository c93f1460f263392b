//! Pluggable convergence structures `(𝒮, ℓ)` and their limit-superior
//! companions, evaluated at a finite horizon.
//!
//! Every limit statement about an infinite sequence is answered from the
//! terms `x_1, …, x_N` only, so verdicts are three-valued: a sequence can
//! pass, fail, or be unresolved at the horizon.

mod audit;
mod bank;
mod filter;
mod limsup;
mod sequence;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{LatticeElement, OSequence, OrderUnit};

pub use audit::{axiom_audit, AuditReport, AxiomResult, SignFlipped, Witness};
pub use bank::{standard_bank, BankEntry, BankKind, BankLimits};
pub use filter::FilterSpec;
pub use limsup::{
    filter_limsup, h_restriction, order_limsup, HRestriction, LimsupEstimate, LimsupKind,
    LimsupOperator,
};
pub use sequence::{LatticeSequence, SequenceTable};
pub(crate) use filter::tail_start;
pub(crate) use limsup::h_restriction_table;

use filter::cofinite_decision;

/// Three-valued outcome of a finite-horizon check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }

    pub fn from_bool(b: bool) -> Self {
        if b {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    /// Conjunction: any failure fails, otherwise any unresolved part leaves
    /// the whole unresolved.
    pub fn and(self, other: Verdict) -> Verdict {
        match (self, other) {
            (Verdict::Fail, _) | (_, Verdict::Fail) => Verdict::Fail,
            (Verdict::Inconclusive, _) | (_, Verdict::Inconclusive) => Verdict::Inconclusive,
            _ => Verdict::Pass,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// The convergence notions supported by [`ConvergenceStructure`].
#[derive(Clone, Debug)]
pub enum ConvergenceKind {
    /// Usual convergence: relative uniform along the cofinite filter with
    /// the all-ones regulator.
    Ordinary,
    /// `(r)`-convergence with regulator `u`.
    RelativeUniform { regulator: OrderUnit },
    /// `(o)`-convergence dominated by the `(o)`-sequence `σ_l`.
    Order { regulator: OSequence },
    /// `(r𝓕)`-convergence; the regulator defaults to all-ones.
    Filter {
        filter: FilterSpec,
        regulator: Option<OrderUnit>,
    },
    /// Almost convergence; `offsets` is the number `M` of window shifts,
    /// defaulting to `⌊N/10⌋`.
    Almost { offsets: Option<usize> },
    /// Cesàro convergence of prefix averages.
    Cesaro,
}

impl ConvergenceKind {
    pub fn label(&self) -> String {
        match self {
            ConvergenceKind::Ordinary => "ordinary".into(),
            ConvergenceKind::RelativeUniform { .. } => "relative-uniform".into(),
            ConvergenceKind::Order { .. } => "order".into(),
            ConvergenceKind::Filter { filter, .. } => match filter {
                FilterSpec::Cofinite => "filter(cofinite)".into(),
                FilterSpec::Density { theta } => format!("filter(density {theta})"),
                FilterSpec::Explicit { sets } => format!("filter(explicit, {} sets)", sets.len()),
            },
            ConvergenceKind::Almost { .. } => "almost".into(),
            ConvergenceKind::Cesaro => "cesaro".into(),
        }
    }
}

/// A finite-horizon realization of a convergence `(𝒮, ℓ)`.
#[derive(Clone, Debug)]
pub struct ConvergenceStructure {
    pub kind: ConvergenceKind,
    /// Evaluation horizon; `None` uses the sequence's own horizon.
    pub horizon: Option<usize>,
    /// Regulator scale `ε` and density band.
    pub tol: f64,
    /// Fraction of the horizon treated as the tail for cofinite checks.
    pub tail_fraction: f64,
}

/// Estimated limit together with the verdict that the sequence converges
/// to it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LimitEstimate {
    pub value: LatticeElement,
    pub verdict: Verdict,
    /// Worst distance of the evaluated tail from `value`, in regulator units.
    pub residual: f64,
}

impl ConvergenceStructure {
    pub fn new(kind: ConvergenceKind, tol: f64) -> Self {
        Self {
            kind,
            horizon: None,
            tol,
            tail_fraction: 0.5,
        }
    }

    pub fn ordinary(tol: f64) -> Self {
        Self::new(ConvergenceKind::Ordinary, tol)
    }

    pub fn cesaro(tol: f64) -> Self {
        Self::new(ConvergenceKind::Cesaro, tol)
    }

    pub fn almost(tol: f64) -> Self {
        Self::new(ConvergenceKind::Almost { offsets: None }, tol)
    }

    /// Statistical convergence: the density filter with `θ = 1 − η`.
    pub fn density(eta: f64, tol: f64) -> Self {
        Self::new(
            ConvergenceKind::Filter {
                filter: FilterSpec::density(eta),
                regulator: None,
            },
            tol,
        )
    }

    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.horizon = Some(horizon);
        self
    }

    pub fn with_tail_fraction(mut self, f: f64) -> Self {
        self.tail_fraction = f;
        self
    }

    pub fn label(&self) -> String {
        self.kind.label()
    }

    fn table(&self, seq: &LatticeSequence) -> Result<SequenceTable> {
        let n = self.horizon.unwrap_or(seq.horizon()).min(seq.horizon());
        seq.with_horizon(n).table()
    }

    /// Estimates `ℓ((x_n)_n)`.
    /// The limsup operator naturally paired with this structure.
    pub fn companion_limsup(&self) -> LimsupOperator {
        let kind = match &self.kind {
            ConvergenceKind::Ordinary
            | ConvergenceKind::RelativeUniform { .. }
            | ConvergenceKind::Order { .. } => LimsupKind::Order,
            ConvergenceKind::Filter { filter, .. } => LimsupKind::Filter(filter.clone()),
            ConvergenceKind::Almost { offsets } => LimsupKind::Almost { offsets: *offsets },
            ConvergenceKind::Cesaro => LimsupKind::Cesaro,
        };
        let mut op = LimsupOperator::new(kind);
        op.tail_fraction = self.tail_fraction;
        op.horizon = self.horizon;
        op
    }

    pub fn limit(&self, seq: &LatticeSequence) -> Result<LimitEstimate> {
        self.limit_table(&self.table(seq)?)
    }

    /// Whether `(x_n)_n` converges to `candidate`.
    pub fn estimate_limit(
        &self,
        seq: &LatticeSequence,
        candidate: &LatticeElement,
    ) -> Result<Verdict> {
        self.converges_table(&self.table(seq)?, candidate)
    }

    pub(crate) fn limit_table(&self, t: &SequenceTable) -> Result<LimitEstimate> {
        if t.is_empty() {
            return Err(Error::Precondition("empty sequence".into()));
        }
        let value = match &self.kind {
            ConvergenceKind::Cesaro => return cesaro_table(t, self.tol, self.tail_fraction),
            ConvergenceKind::Almost { offsets } => {
                let est = almost_table(t, *offsets, self.tol)?;
                return Ok(LimitEstimate {
                    value: est.value,
                    verdict: est.verdict,
                    residual: est.deviation / self.tol,
                });
            }
            ConvergenceKind::Filter { filter, .. } => match filter {
                FilterSpec::Cofinite => t.element(t.len()),
                _ => {
                    let hi = limsup::filter_limsup_table(t, filter)?;
                    let lo = limsup::filter_limsup_table(&t.map(|v| -v), filter)?;
                    midpoint(&hi, &lo)?
                }
            },
            _ => t.element(t.len()),
        };
        if !value.is_finite() {
            return Ok(LimitEstimate {
                value,
                verdict: Verdict::Fail,
                residual: f64::INFINITY,
            });
        }
        let severity = self.severity(t, &value)?;
        let verdict = self.decide(&severity);
        let start = filter::tail_start(severity.len(), self.tail_fraction);
        let residual = severity[start..].iter().copied().fold(0.0, f64::max);
        Ok(LimitEstimate {
            value,
            verdict,
            residual,
        })
    }

    pub(crate) fn converges_table(
        &self,
        t: &SequenceTable,
        candidate: &LatticeElement,
    ) -> Result<Verdict> {
        if candidate.dim() != t.dim() {
            return Err(Error::DimensionMismatch {
                left: t.dim(),
                right: candidate.dim(),
            });
        }
        if !candidate.is_finite() {
            return Ok(Verdict::Fail);
        }
        match &self.kind {
            ConvergenceKind::Cesaro => {
                let means = t.cesaro_means()?;
                let s = self.norm_severity(&means, candidate, None)?;
                Ok(cofinite_decision(&s, self.tail_fraction))
            }
            ConvergenceKind::Almost { offsets } => {
                almost_to_candidate(t, *offsets, candidate, self.tol)
            }
            _ => {
                let s = self.severity(t, candidate)?;
                Ok(self.decide(&s))
            }
        }
    }

    fn decide(&self, severity: &[f64]) -> Verdict {
        match &self.kind {
            ConvergenceKind::Filter { filter, .. } => {
                filter.decide(severity, self.tail_fraction, self.tol)
            }
            _ => cofinite_decision(severity, self.tail_fraction),
        }
    }

    fn severity(&self, t: &SequenceTable, c: &LatticeElement) -> Result<Vec<f64>> {
        match &self.kind {
            ConvergenceKind::Order { regulator } => {
                let check = regulator.is_o_sequence(self.tol);
                if !check.holds {
                    return Err(Error::Precondition(format!(
                        "regulator is not an (o)-sequence at l = {:?}: {}",
                        check.violation,
                        check.reason.unwrap_or_default()
                    )));
                }
                let sigma = regulator.term(regulator.horizon());
                if sigma.dim() != t.dim() {
                    return Err(Error::DimensionMismatch {
                        left: t.dim(),
                        right: sigma.dim(),
                    });
                }
                Ok(t.rows()
                    .map(|row| {
                        row.iter()
                            .zip(c.values())
                            .zip(sigma.values())
                            .fold(0.0f64, |m, ((x, c), s)| {
                                let d = (x - c).abs();
                                let r = if d == 0.0 {
                                    0.0
                                } else if *s == 0.0 {
                                    f64::INFINITY
                                } else {
                                    d / s
                                };
                                m.max(r)
                            })
                    })
                    .collect())
            }
            ConvergenceKind::RelativeUniform { regulator } => {
                self.norm_severity(t, c, Some(regulator))
            }
            ConvergenceKind::Filter { regulator, .. } => {
                self.norm_severity(t, c, regulator.as_ref())
            }
            _ => self.norm_severity(t, c, None),
        }
    }

    fn norm_severity(
        &self,
        t: &SequenceTable,
        c: &LatticeElement,
        unit: Option<&OrderUnit>,
    ) -> Result<Vec<f64>> {
        if let Some(u) = unit {
            if u.dim() != t.dim() {
                return Err(Error::DimensionMismatch {
                    left: t.dim(),
                    right: u.dim(),
                });
            }
        }
        let ones = vec![1.0; t.dim()];
        let u = unit.map_or(ones.as_slice(), |u| u.element().values());
        Ok(t.rows()
            .map(|row| {
                row.iter()
                    .zip(c.values())
                    .zip(u)
                    .fold(0.0f64, |m, ((x, c), u)| m.max((x - c).abs() / u))
                    / self.tol
            })
            .collect())
    }
}

fn midpoint(hi: &LatticeElement, lo_neg: &LatticeElement) -> Result<LatticeElement> {
    // lo_neg is the upper limit of −x, so the lower limit of x is −lo_neg.
    if !hi.is_finite() || !lo_neg.is_finite() {
        return Ok(LatticeElement::infinity(hi.dim()));
    }
    Ok(LatticeElement::from_finite_vec(
        hi.values()
            .iter()
            .zip(lo_neg.values())
            .map(|(h, l)| 0.5 * (h - l))
            .collect(),
    ))
}

/// Cesàro estimate `(x_1 + … + x_N)/N` with a verdict that the prefix
/// averages stabilize within `tol` over the tail.
pub fn cesaro_limit(seq: &LatticeSequence, tol: f64) -> Result<LimitEstimate> {
    if seq.horizon() < 10 {
        return Err(Error::Precondition("Cesàro estimate needs N ≥ 10".into()));
    }
    cesaro_table(&seq.table()?, tol, 0.5)
}

fn cesaro_table(t: &SequenceTable, tol: f64, tail_fraction: f64) -> Result<LimitEstimate> {
    let means = t.cesaro_means()?;
    let value = means.element(means.len());
    let severity: Vec<f64> = means
        .rows()
        .map(|row| {
            row.iter()
                .zip(value.values())
                .fold(0.0f64, |m, (a, v)| m.max((a - v).abs()))
                / tol
        })
        .collect();
    let start = filter::tail_start(severity.len(), tail_fraction);
    Ok(LimitEstimate {
        value,
        verdict: cofinite_decision(&severity, tail_fraction),
        residual: severity[start..].iter().copied().fold(0.0, f64::max),
    })
}

/// Result of [`almost_limit`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlmostEstimate {
    pub value: LatticeElement,
    /// `sup_m ‖(x_{m+1} + … + x_{m+W})/W − value‖` at the largest window.
    pub deviation: f64,
    pub window: usize,
    pub offsets: usize,
    pub verdict: Verdict,
}

/// Window averages `(x_{m+1}+…+x_{m+w})/w` for `m = 0..=offsets`, as rows.
fn window_averages(t: &SequenceTable, offsets: usize, w: usize) -> Result<Vec<Vec<f64>>> {
    if let Some(n) = t.first_infinite_term() {
        return Err(Error::UndefinedAverage { n });
    }
    let dim = t.dim();
    let mut prefix = vec![0.0; (t.len() + 1) * dim];
    for n in 1..=t.len() {
        for i in 0..dim {
            prefix[n * dim + i] = prefix[(n - 1) * dim + i] + t.row(n)[i];
        }
    }
    Ok((0..=offsets)
        .map(|m| {
            (0..dim)
                .map(|i| (prefix[(m + w) * dim + i] - prefix[m * dim + i]) / w as f64)
                .collect()
        })
        .collect())
}

fn almost_geometry(len: usize, offsets: Option<usize>) -> Option<(usize, usize)> {
    let m = offsets.unwrap_or(len / 10);
    if m + 2 > len {
        return None;
    }
    Some((m, len - m))
}

fn midrange(rows: &[Vec<f64>]) -> (Vec<f64>, f64) {
    let dim = rows[0].len();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for r in rows {
        for i in 0..dim {
            lo[i] = lo[i].min(r[i]);
            hi[i] = hi[i].max(r[i]);
        }
    }
    let mid = (0..dim).map(|i| 0.5 * (lo[i] + hi[i])).collect();
    let dev = (0..dim).fold(0.0f64, |m, i| m.max(0.5 * (hi[i] - lo[i])));
    (mid, dev)
}

fn sup_distance(rows: &[Vec<f64>], c: &[f64]) -> f64 {
    rows.iter().fold(0.0f64, |m, r| {
        r.iter().zip(c).fold(m, |m, (a, b)| m.max((a - b).abs()))
    })
}

/// Almost-limit estimate: the `x` minimizing `sup_m |window average − x|`
/// over offsets `m ≤ M`, with window length `W = N − M`.
pub fn almost_limit(seq: &LatticeSequence, offsets: Option<usize>, tol: f64) -> Result<AlmostEstimate> {
    almost_table(&seq.table()?, offsets, tol)
}

fn almost_table(t: &SequenceTable, offsets: Option<usize>, tol: f64) -> Result<AlmostEstimate> {
    let Some((m, w)) = almost_geometry(t.len(), offsets) else {
        return Ok(AlmostEstimate {
            value: LatticeElement::zeros(t.dim()),
            deviation: f64::INFINITY,
            window: 0,
            offsets: offsets.unwrap_or(0),
            verdict: Verdict::Inconclusive,
        });
    };
    let rows = window_averages(t, m, w)?;
    let (mid, dev) = midrange(&rows);
    let verdict = if dev <= tol {
        Verdict::Pass
    } else {
        let (_, dev_half) = midrange(&window_averages(t, m, w / 2)?);
        if dev >= dev_half {
            Verdict::Fail
        } else {
            Verdict::Inconclusive
        }
    };
    Ok(AlmostEstimate {
        value: LatticeElement::from_finite_vec(mid),
        deviation: dev,
        window: w,
        offsets: m,
        verdict,
    })
}

fn almost_to_candidate(
    t: &SequenceTable,
    offsets: Option<usize>,
    c: &LatticeElement,
    tol: f64,
) -> Result<Verdict> {
    let Some((m, w)) = almost_geometry(t.len(), offsets) else {
        return Ok(Verdict::Inconclusive);
    };
    let d = sup_distance(&window_averages(t, m, w)?, c.values());
    if d <= tol {
        return Ok(Verdict::Pass);
    }
    let d_half = sup_distance(&window_averages(t, m, w / 2)?, c.values());
    Ok(if d >= d_half {
        Verdict::Fail
    } else {
        Verdict::Inconclusive
    })
}

/// Any realization of a limit functional that the axiom audit can probe.
pub trait LimitRule: Sync {
    fn label(&self) -> String;
    fn tol(&self) -> f64;
    fn bank_kind(&self) -> Option<BankKind>;
    fn limit(&self, t: &SequenceTable) -> Result<LimitEstimate>;
    fn converges_to(&self, t: &SequenceTable, candidate: &LatticeElement) -> Result<Verdict>;
}

impl LimitRule for ConvergenceStructure {
    fn label(&self) -> String {
        ConvergenceStructure::label(self)
    }

    fn tol(&self) -> f64 {
        self.tol
    }

    fn bank_kind(&self) -> Option<BankKind> {
        match &self.kind {
            ConvergenceKind::Ordinary
            | ConvergenceKind::RelativeUniform { .. }
            | ConvergenceKind::Order { .. } => Some(BankKind::Ordinary),
            ConvergenceKind::Filter { filter, .. } => match filter {
                FilterSpec::Cofinite => Some(BankKind::Ordinary),
                FilterSpec::Density { .. } => Some(BankKind::Density),
                FilterSpec::Explicit { .. } => None,
            },
            ConvergenceKind::Almost { .. } => Some(BankKind::Almost),
            ConvergenceKind::Cesaro => Some(BankKind::Cesaro),
        }
    }

    fn limit(&self, t: &SequenceTable) -> Result<LimitEstimate> {
        let t = match self.horizon {
            Some(n) => t.truncate(n),
            None => t.clone(),
        };
        self.limit_table(&t)
    }

    fn converges_to(&self, t: &SequenceTable, candidate: &LatticeElement) -> Result<Verdict> {
        let t = match self.horizon {
            Some(n) => t.truncate(n),
            None => t.clone(),
        };
        self.converges_table(&t, candidate)
    }
}
