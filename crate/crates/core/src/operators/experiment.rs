use std::sync::Arc;

use serde::Serialize;

use crate::convergence::{ConvergenceStructure, SequenceTable, Verdict};
use crate::error::{Error, Result};
use crate::lattice::LatticeElement;
use crate::measure::{
    converges_in_measure, equiabsolute_continuity_audit, EacReport, FunctionSequence, InMeasureMode,
    InMeasureReport, Interval, LatticeFunction, Probe,
};
use crate::modular::{modular_convergence_search, ConvexPhi, Modular, ModularVerdict};

use super::{singularity_audit, KernelOperator, SingularityCertificate};

/// `s ↦ (T_n f)(s)` as a memoized function. Evaluation errors surface as
/// NaN entries, which downstream quadrature reports as non-finite.
pub fn operator_output(family: Arc<dyn KernelOperator>, f: &LatticeFunction, n: usize) -> LatticeFunction {
    let inner = f.clone();
    let fam = family.clone();
    let mut g = LatticeFunction::new(f.dim(), move |s, out| match fam.apply(&inner, s, n) {
        Ok(v) => {
            for (o, x) in out.iter_mut().zip(v.values()) {
                *o = *x;
            }
        }
        Err(_) => out.fill(f64::NAN),
    });
    if let Some(i) = &f.support {
        if let Some(s) = family.output_support(n, i) {
            g = g.with_support(s);
        }
    }
    let mut breaks = family.output_breaks(n, f);
    breaks.extend(f.breaks.iter().copied());
    g.with_breaks(&breaks).memoized()
}

#[derive(Clone, Debug)]
pub enum ExperimentMode {
    /// `sup_{s ∈ window} |T_n f(s) − f(s)|` on `points` points, uniform in
    /// the metric coordinate.
    Uniform { window: Interval, points: usize },
    /// `φ(α|T_n f − f|) → 0` in measure on `window`.
    InMeasure {
        window: Interval,
        cells: usize,
        phi: ConvexPhi,
        alpha: f64,
    },
    /// Modular convergence of `T_n f` to `f` by the dyadic `α` search, and
    /// equiabsolute continuity of `φ(λ|T_n f|)` with `λ = 1/(2D⁽¹⁾)`.
    Modular {
        modular: Modular,
        k_max: i32,
        k_min: i32,
        window: Interval,
        exhaust: usize,
        cells: usize,
    },
}

impl ExperimentMode {
    pub fn label(&self) -> &'static str {
        match self {
            ExperimentMode::Uniform { .. } => "uniform",
            ExperimentMode::InMeasure { .. } => "in_measure",
            ExperimentMode::Modular { .. } => "modular",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UniformOutcome {
    /// `sup_s ‖T_n f(s) − f(s)‖` per `n`.
    pub sup_error: Vec<f64>,
    pub points: usize,
    /// Smallest `n₀` from which the sup-error decreases strictly.
    pub strictly_decreasing_from: Option<usize>,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InMeasureOutcome {
    pub phi: String,
    pub alpha: f64,
    pub report: InMeasureReport,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModularOutcome {
    pub search: ModularVerdict,
    pub lambda: f64,
    pub eac: EacReport,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub family: String,
    pub mode: &'static str,
    pub horizon: usize,
    /// `f` has compact support in the domain metric.
    pub compact_support: bool,
    pub certificate: SingularityCertificate,
    pub uniform: Option<UniformOutcome>,
    pub in_measure: Option<InMeasureOutcome>,
    pub modular: Option<ModularOutcome>,
    pub verdict: Verdict,
}

/// Settings shared by all modes.
#[derive(Clone, Debug)]
pub struct ExperimentSettings {
    pub horizon: usize,
    /// Radii for the tail clause of the certificate.
    pub deltas: Vec<f64>,
    /// Horizon of the singularity audit, usually shorter than `horizon`.
    pub audit_horizon: usize,
}

fn strictly_decreasing_from(v: &[f64]) -> Option<usize> {
    if v.is_empty() {
        return None;
    }
    let mut start = v.len();
    while start > 1 && v[start - 1] < v[start - 2] {
        start -= 1;
    }
    (start < v.len() || v.len() == 1).then_some(start)
}

/// Certifies `family` and then runs `T_n f → f` for `n = 1..=horizon` in
/// the requested mode. A family whose certificate is not `(U)`-singular
/// is refused with the failing clause.
pub fn operator_convergence_experiment(
    family: Arc<dyn KernelOperator>,
    f: &LatticeFunction,
    mode: &ExperimentMode,
    settings: &ExperimentSettings,
    cs: &ConvergenceStructure,
) -> Result<ExperimentReport> {
    let certificate = singularity_audit(family.as_ref(), &settings.deltas, settings.audit_horizon, cs)?;
    if !certificate.is_u_singular() {
        let c = certificate.first_failure().expect("a non-certified family has a failing clause");
        return Err(Error::Precondition(format!(
            "family {} is not (U)-singular: clause {} is {} ({})",
            family.label(),
            c.clause,
            c.verdict,
            c.detail
        )));
    }
    let ms = family.space();
    let compact_support = f.support.is_some_and(|i| {
        let (a, b) = ms.domain.coord_range(&i);
        a.is_finite() && b.is_finite()
    });
    let horizon = settings.horizon;
    let outputs: Vec<LatticeFunction> = (1..=horizon)
        .map(|n| operator_output(family.clone(), f, n))
        .collect();
    let mut report = ExperimentReport {
        family: family.label(),
        mode: mode.label(),
        horizon,
        compact_support,
        certificate,
        uniform: None,
        in_measure: None,
        modular: None,
        verdict: Verdict::Inconclusive,
    };
    match mode {
        ExperimentMode::Uniform { window, points } => {
            let (a, b) = ms.domain.coord_range(window);
            if !(a.is_finite() && b.is_finite()) || *points < 2 {
                return Err(Error::Precondition("uniform mode needs a compact window and 2+ points".into()));
            }
            let ss: Vec<f64> = (0..*points)
                .map(|k| ms.domain.from_coord(a + (b - a) * k as f64 / (*points - 1) as f64))
                .collect();
            let mut fv = vec![0.0; f.dim()];
            let mut tv = vec![0.0; f.dim()];
            let mut sup_error = Vec::with_capacity(horizon);
            for g in &outputs {
                let mut sup: f64 = 0.0;
                for &s in &ss {
                    f.eval_into(s, &mut fv);
                    g.eval_into(s, &mut tv);
                    for (x, y) in tv.iter().zip(&fv) {
                        let d = (x - y).abs();
                        sup = if d.is_nan() { f64::NAN } else { sup.max(d) };
                    }
                }
                sup_error.push(sup);
            }
            let verdict = if sup_error.iter().any(|v| !v.is_finite()) {
                Verdict::Fail
            } else {
                cs.converges_table(&SequenceTable::from_rows(1, sup_error.clone())?, &LatticeElement::zeros(1))?
            };
            report.verdict = verdict;
            report.uniform = Some(UniformOutcome {
                strictly_decreasing_from: strictly_decreasing_from(&sup_error),
                sup_error,
                points: *points,
                verdict,
            });
        }
        ExperimentMode::InMeasure {
            window,
            cells,
            phi,
            alpha,
        } => {
            let (phi2, f2, alpha) = (phi.clone(), f.clone(), *alpha);
            let outs = outputs.clone();
            let seq = FunctionSequence::new(horizon, move |n| {
                let p = phi2.clone();
                outs[n - 1]
                    .sub(&f2)
                    .expect("T_n f and f share a dimension")
                    .map(move |v| p.scalar(alpha * v.abs()))
            });
            let zero = LatticeFunction::zero(f.dim());
            let r = converges_in_measure(&seq, &zero, window, &ms, cs, InMeasureMode::KyFan, *cells)?;
            report.verdict = r.verdict;
            report.in_measure = Some(InMeasureOutcome {
                phi: phi.label(),
                alpha,
                report: r,
            });
        }
        ExperimentMode::Modular {
            modular,
            k_max,
            k_min,
            window,
            exhaust,
            cells,
        } => {
            let outs = outputs.clone();
            let seq = FunctionSequence::new(horizon, move |n| outs[n - 1].clone());
            let search = modular_convergence_search(modular, &seq, f, *k_max, *k_min, Some(family.d1()))?;
            let lambda = 1.0 / (2.0 * family.d1());
            let p = modular.phi.clone();
            let outs = outputs.clone();
            let lifted = FunctionSequence::new(horizon, move |n| {
                let p = p.clone();
                outs[n - 1].map(move |v| p.scalar(lambda * v.abs()))
            });
            let eac = equiabsolute_continuity_audit(&lifted, &ms, &Probe::WorstCase, window, cs, *exhaust, *cells)?;
            let verdict = search.verdict.and(eac.verdict());
            report.verdict = verdict;
            report.modular = Some(ModularOutcome {
                search,
                lambda,
                eac,
                verdict,
            });
        }
    }
    Ok(report)
}
