use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::convergence::{ConvergenceStructure, SequenceTable, Verdict};
use crate::error::{Error, Result};
use crate::lattice::LatticeElement;

use super::{FunctionSequence, Interval, IntervalSet, LatticeFunction, MeasureSpace};

/// Quadrature tolerance used for the shell-divergence check in audits.
const AUDIT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InMeasureMode {
    /// Ky Fan distance `κ_n = inf{λ : μ(|f_n − f| > λ) ≤ λ}`; the
    /// exceptional sets are `A_n = {|f_n − f| > κ_n}`.
    KyFan,
    /// Empty exceptional sets; tracks `sup_A |f_n − f|`.
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InMeasureReport {
    pub mode: InMeasureMode,
    pub verdict: Verdict,
    /// `κ_n` (Ky Fan) or the sup distance (uniform), per `n`.
    pub distance: Vec<f64>,
    /// `μ(A_n)`.
    pub exceptional_mass: Vec<f64>,
    /// `sup_{A∖A_n} |f_n − f|`.
    pub sup_off: Vec<f64>,
    pub cells: usize,
}

fn scalar_table(v: &[f64]) -> Result<SequenceTable> {
    SequenceTable::from_rows(1, v.to_vec())
}

fn tends_to_zero(cs: &ConvergenceStructure, v: &[f64]) -> Result<Verdict> {
    if v.is_empty() {
        return Ok(Verdict::Inconclusive);
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Ok(Verdict::Fail);
    }
    cs.converges_table(&scalar_table(v)?, &LatticeElement::zeros(1))
}

/// Whether `f_n → f` in μ-measure on `A`, judged on a uniform grid of
/// `cells` cells in the metric coordinate. Distances are taken in the
/// order-unit norm of the all-ones unit.
pub fn converges_in_measure(
    fseq: &FunctionSequence,
    f: &LatticeFunction,
    set: &Interval,
    ms: &MeasureSpace,
    cs: &ConvergenceStructure,
    mode: InMeasureMode,
    cells: usize,
) -> Result<InMeasureReport> {
    if !ms.measure(set).is_finite() {
        return Err(Error::Precondition("in-measure check needs μ(A) < ∞".into()));
    }
    let grid = ms.grid(set, cells)?;
    let dim = f.dim();
    let target: Vec<f64> = {
        let mut buf = vec![0.0; dim];
        grid.iter()
            .flat_map(|&(t, _)| {
                f.eval_into(t, &mut buf);
                buf.clone()
            })
            .collect()
    };
    let mut distance = Vec::with_capacity(fseq.horizon);
    let mut mass = Vec::with_capacity(fseq.horizon);
    let mut sup_off = Vec::with_capacity(fseq.horizon);
    let mut buf = vec![0.0; dim];
    let mut d: Vec<(f64, f64)> = Vec::with_capacity(grid.len());
    for n in 1..=fseq.horizon {
        let fn_ = fseq.term(n);
        if fn_.dim() != dim {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: fn_.dim(),
            });
        }
        d.clear();
        for (i, &(t, w)) in grid.iter().enumerate() {
            fn_.eval_into(t, &mut buf);
            let gap = buf
                .iter()
                .zip(&target[i * dim..(i + 1) * dim])
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            d.push((if gap.is_nan() { f64::INFINITY } else { gap }, w));
        }
        match mode {
            InMeasureMode::Uniform => {
                let s = d.iter().fold(0.0f64, |m, &(g, _)| m.max(g));
                distance.push(s);
                mass.push(0.0);
                sup_off.push(s);
            }
            InMeasureMode::KyFan => {
                d.sort_by(|a, b| b.0.total_cmp(&a.0));
                // κ = min_k max(d_(k+1), mass of the k largest cells)
                let mut best = (f64::INFINITY, 0.0, 0usize);
                let mut acc = 0.0;
                for k in 0..=d.len() {
                    let next = d.get(k).map_or(0.0, |p| p.0);
                    let cand = next.max(acc);
                    if cand < best.0 {
                        best = (cand, acc, k);
                    }
                    if k < d.len() {
                        acc += d[k].1;
                    }
                }
                distance.push(best.0);
                mass.push(best.1);
                sup_off.push(d.get(best.2).map_or(0.0, |p| p.0));
            }
        }
    }
    Ok(InMeasureReport {
        mode,
        verdict: tends_to_zero(cs, &distance)?,
        distance,
        exceptional_mass: mass,
        sup_off,
        cells,
    })
}

/// Probe sets for the first equiabsolute-continuity clause.
#[derive(Clone)]
pub enum Probe {
    /// `n ↦ A_n`, expected to satisfy `μ(A_n) → 0`.
    Explicit(Arc<dyn Fn(usize) -> IntervalSet + Send + Sync>),
    /// The set of measure `1/n` on which `|f_n|` is largest, found on the
    /// grid over `window`.
    WorstCase,
}

impl fmt::Debug for Probe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Probe::Explicit(_) => f.write_str("Probe::Explicit"),
            Probe::WorstCase => f.write_str("Probe::WorstCase"),
        }
    }
}

impl Probe {
    pub fn explicit(p: impl Fn(usize) -> IntervalSet + Send + Sync + 'static) -> Self {
        Probe::Explicit(Arc::new(p))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EacReport {
    /// eac.1: `∫_{A_n} |f_n| → 0` along the probes.
    pub eac1: Verdict,
    /// eac.2: `ℓ(ℓ̄(∫_{G∖B_m} |f_n|)) = 0` as `m` grows.
    pub eac2: Verdict,
    pub probe_mass: Vec<f64>,
    /// `‖∫_{A_n} |f_n|‖` per `n`.
    pub probe_integrals: Vec<f64>,
    /// `‖ℓ̄_n ∫_{G∖B_m} |f_n|‖` per `m = 1..`.
    pub outer_limsup: Vec<f64>,
    /// Name of the first failing clause, if any.
    pub failing: Option<&'static str>,
}

impl EacReport {
    pub fn verdict(&self) -> Verdict {
        self.eac1.and(self.eac2)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Audits both clauses of μ-equiabsolute continuity for `(f_n)`. The
/// worst-case probe and the grid live on `window`, which must have finite
/// measure; the exhausting sets `B_1, …, B_exhaust` come from `ms`.
#[allow(clippy::too_many_arguments)]
pub fn equiabsolute_continuity_audit(
    fseq: &FunctionSequence,
    ms: &MeasureSpace,
    probe: &Probe,
    window: &Interval,
    cs: &ConvergenceStructure,
    exhaust: usize,
    cells: usize,
) -> Result<EacReport> {
    let mut probe_mass = Vec::with_capacity(fseq.horizon);
    let mut probe_integrals = Vec::with_capacity(fseq.horizon);
    let grid = match probe {
        Probe::WorstCase => ms.grid(window, cells)?,
        Probe::Explicit(_) => Vec::new(),
    };
    for n in 1..=fseq.horizon {
        let a = fseq.term(n).abs();
        match probe {
            Probe::Explicit(p) => {
                let set = p(n);
                probe_mass.push(ms.measure_set(&set));
                let r = ms.quadrature(&a, &set, AUDIT_TOL)?;
                probe_integrals.push(norm(&r.value));
            }
            Probe::WorstCase => {
                let budget = 1.0 / n as f64;
                let mut buf = vec![0.0; a.dim()];
                let mut vals: Vec<(f64, f64)> = grid
                    .iter()
                    .map(|&(t, w)| {
                        a.eval_into(t, &mut buf);
                        (norm(&buf), w)
                    })
                    .collect();
                vals.sort_by(|x, y| y.0.total_cmp(&x.0));
                let (mut used, mut acc) = (0.0, 0.0);
                for (v, w) in vals {
                    let take = w.min(budget - used);
                    if take <= 0.0 {
                        break;
                    }
                    used += take;
                    acc += v * take;
                }
                probe_mass.push(used);
                probe_integrals.push(acc);
            }
        }
    }
    let eac1 = tends_to_zero(cs, &probe_integrals)?;

    let ls = cs.companion_limsup();
    let carrier = ms.domain.carrier;
    let mut outer_limsup = Vec::with_capacity(exhaust);
    let mut dim = None;
    for m in 1..=exhaust {
        let outside = IntervalSet::single(ms.exhausting_set(m)).complement_in(&carrier);
        let mut rows = Vec::new();
        for n in 1..=fseq.horizon {
            let a = fseq.term(n).abs();
            dim.get_or_insert(a.dim());
            let r = ms.quadrature(&a, &outside, AUDIT_TOL)?;
            rows.extend(r.value);
        }
        let t = SequenceTable::from_rows(dim.unwrap_or(1), rows)?;
        outer_limsup.push(norm(ls.apply_table(&t)?.value.values()));
    }
    // The m-limit is an ordinary one: the outer masses must settle at 0.
    let eac2 = tends_to_zero(&ConvergenceStructure::ordinary(cs.tol), &outer_limsup)?;
    let failing = if eac1 == Verdict::Fail {
        Some("eac.1")
    } else if eac2 == Verdict::Fail {
        Some("eac.2")
    } else {
        None
    };
    Ok(EacReport {
        eac1,
        eac2,
        probe_mass,
        probe_integrals,
        outer_limsup,
        failing,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VitaliReport {
    pub in_measure: Verdict,
    /// Equiabsolute continuity, or domination in the Lebesgue variant.
    pub eac: Option<EacReport>,
    pub dominated: Option<Verdict>,
    pub hypotheses: Verdict,
    /// `‖∫_G |f_n| dμ‖` per `n`.
    pub l1_norms: Vec<f64>,
    pub l1_to_zero: Verdict,
    /// Hypotheses pass and the L¹ conclusion is observed.
    pub confirmed: bool,
}

/// Checks the hypotheses of Vitali's theorem for `f_n → 0` (in measure on
/// `window` plus equiabsolute continuity) or, when `dominating` is given,
/// of the dominated variant, and measures `∫ |f_n|` directly.
#[allow(clippy::too_many_arguments)]
pub fn vitali_audit(
    fseq: &FunctionSequence,
    ms: &MeasureSpace,
    cs: &ConvergenceStructure,
    window: &Interval,
    probe: &Probe,
    dominating: Option<&LatticeFunction>,
    cells: usize,
) -> Result<VitaliReport> {
    let dim = fseq.dim();
    let zero = LatticeFunction::zero(dim);
    let in_measure =
        converges_in_measure(fseq, &zero, window, ms, cs, InMeasureMode::KyFan, cells)?.verdict;
    let (eac, dominated) = match dominating {
        None => (
            Some(equiabsolute_continuity_audit(fseq, ms, probe, window, cs, 8, cells)?),
            None,
        ),
        Some(h) => (None, Some(dominates(fseq, h, ms, window, cells)?)),
    };
    let hypotheses = in_measure.and(match (&eac, dominated) {
        (Some(e), _) => e.verdict(),
        (None, Some(d)) => d,
        (None, None) => Verdict::Inconclusive,
    });
    let carrier = IntervalSet::single(ms.domain.carrier);
    let mut l1_norms = Vec::with_capacity(fseq.horizon);
    for n in 1..=fseq.horizon {
        let r = ms.quadrature(&fseq.term(n).abs(), &carrier, AUDIT_TOL)?;
        l1_norms.push(norm(&r.value));
    }
    let l1_to_zero = tends_to_zero(cs, &l1_norms)?;
    Ok(VitaliReport {
        in_measure,
        eac,
        dominated,
        hypotheses,
        confirmed: hypotheses == Verdict::Pass && l1_to_zero == Verdict::Pass,
        l1_norms,
        l1_to_zero,
    })
}

/// `|f_n| ≤ h` on the grid for every `n`, and `h` integrable.
fn dominates(
    fseq: &FunctionSequence,
    h: &LatticeFunction,
    ms: &MeasureSpace,
    window: &Interval,
    cells: usize,
) -> Result<Verdict> {
    match ms.quadrature(&h.abs(), &IntervalSet::single(ms.domain.carrier), AUDIT_TOL) {
        Ok(_) => {}
        Err(Error::Divergent(_)) => return Ok(Verdict::Fail),
        Err(e) => return Err(e),
    }
    let grid = ms.grid(window, cells)?;
    let dim = h.dim();
    let mut hb = vec![0.0; dim];
    let mut fb = vec![0.0; fseq.dim()];
    for n in 1..=fseq.horizon {
        let f = fseq.term(n);
        for &(t, _) in &grid {
            h.eval_into(t, &mut hb);
            f.eval_into(t, &mut fb);
            for (k, v) in fb.iter().enumerate() {
                let bound = hb[if dim == 1 { 0 } else { k }];
                if v.abs() > bound * (1.0 + 1e-12) + 1e-15 {
                    return Ok(Verdict::Fail);
                }
            }
        }
    }
    Ok(Verdict::Pass)
}
