use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::convergence::{h_restriction_table, ConvergenceKind, ConvergenceStructure, FilterSpec, SequenceTable, Verdict};
use crate::error::{Error, Result};
use crate::lattice::LatticeElement;
use crate::measure::{Interval, IntervalSet, LatticeFunction};

use super::KernelOperator;

/// Relative slack on the mass bound `D⁽¹⁾`.
const MASS_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SingularityKind {
    /// Singular with empty exceptional sets.
    USingular,
    /// Singular up to exceptional sets of vanishing measure. Representable,
    /// but the audit only certifies the uniform variant.
    MSingular,
    Fail { clause: String },
    /// Some clause could not be settled at the horizon.
    Unresolved { clause: String },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClauseResult {
    pub clause: &'static str,
    pub verdict: Verdict,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SingularityCertificate {
    pub family: String,
    pub d1: f64,
    pub horizon: usize,
    /// `sup_s ∫ L_n(s,t) dμ(t)` per `n`.
    pub masses: Vec<f64>,
    /// `sup_t ∫ L_n(s,t) dμ(s)` per `n`.
    pub cosection_masses: Vec<f64>,
    /// `inf_s ∫ L_n(s,t) dμ(t)` per `n`.
    pub min_masses: Vec<f64>,
    /// Per radius `δ`: `sup_s ∫_{G∖B(s,δ)} L_n(s,t) dμ(t)` per `n`.
    pub tails: Vec<(f64, Vec<f64>)>,
    /// `ε_n` with respect to the regulator `z`.
    pub reproduction: Vec<f64>,
    pub regulator: Vec<f64>,
    /// The residual was read off the masses (linear kernel) instead of the
    /// palette.
    pub linear_shortcut: bool,
    pub palette: Vec<Vec<f64>>,
    pub clauses: Vec<ClauseResult>,
    /// Mass bound, index set and integrability hold.
    pub singular: Verdict,
    pub kind: SingularityKind,
}

impl SingularityCertificate {
    pub fn is_u_singular(&self) -> bool {
        self.kind == SingularityKind::USingular
    }

    pub fn clause(&self, name: &str) -> Option<&ClauseResult> {
        self.clauses.iter().find(|c| c.clause == name)
    }

    /// The first failing clause, else the first unresolved one.
    pub fn first_failure(&self) -> Option<&ClauseResult> {
        first_failure(&self.clauses)
    }
}

fn first_failure(clauses: &[ClauseResult]) -> Option<&ClauseResult> {
    clauses
        .iter()
        .find(|c| c.verdict == Verdict::Fail)
        .or_else(|| clauses.iter().find(|c| c.verdict != Verdict::Pass))
}

fn tends_to_zero(cs: &ConvergenceStructure, v: &[f64]) -> Result<Verdict> {
    if v.iter().any(|x| !x.is_finite()) {
        return Ok(Verdict::Fail);
    }
    cs.converges_table(&SequenceTable::from_rows(1, v.to_vec())?, &LatticeElement::zeros(1))
}

/// `(sup_{k ≥ n} x_k)_n`, the smallest decreasing majorant.
fn tail_envelope(v: &[f64]) -> Vec<f64> {
    let mut out = v.to_vec();
    for i in (0..out.len().saturating_sub(1)).rev() {
        out[i] = out[i].max(out[i + 1]);
    }
    out
}

/// Palette of probe values `u`: `e`, `2e` and three seeded random vectors.
fn palette(dim: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut p = vec![vec![1.0; dim], vec![2.0; dim]];
    for _ in 0..3 {
        p.push((0..dim).map(|_| rng.random_range(-2.0..2.0)).collect());
    }
    p
}

/// Checks the singularity clauses of `family` for `n = 1..=horizon`:
/// integrability of the majorants, the mass bound `D⁽¹⁾` on both
/// sections, agreement of `ℓ̄` over `ℕ` and over `H`, positivity of the
/// masses, vanishing of the tails outside `B(s, δ)` for each `δ`, and
/// reproduction of constants up to an `(o)`-sequence. Section suprema run
/// over [`KernelOperator::audit_points`].
pub fn singularity_audit(
    family: &dyn KernelOperator,
    deltas: &[f64],
    horizon: usize,
    cs: &ConvergenceStructure,
) -> Result<SingularityCertificate> {
    if horizon < 2 {
        return Err(Error::Parameter("singularity audit needs a horizon of at least 2".into()));
    }
    let points = family.audit_points();
    let d1 = family.d1();
    let mut clauses = Vec::new();

    // integrability and the masses
    let mut masses = Vec::with_capacity(horizon);
    let mut min_masses = Vec::with_capacity(horizon);
    let mut cosection_masses = Vec::with_capacity(horizon);
    let mut divergent = None;
    'outer: for n in 1..=horizon {
        let (mut hi, mut lo, mut co) = (f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &s in &points {
            let m = match family.section_mass(n, s, None) {
                Ok(m) => m,
                Err(Error::Divergent(msg)) => {
                    divergent = Some(format!("∫ L_{n}(s,·) dμ diverges at s = {s}: {msg}"));
                    break 'outer;
                }
                Err(e) => return Err(e),
            };
            let c = match family.cosection_mass(n, s, None) {
                Ok(c) => c,
                Err(Error::Divergent(msg)) => {
                    divergent = Some(format!("∫ L_{n}(·,t) dμ diverges at t = {s}: {msg}"));
                    break 'outer;
                }
                Err(e) => return Err(e),
            };
            hi = hi.max(m);
            lo = lo.min(m);
            co = co.max(c);
        }
        masses.push(hi);
        min_masses.push(lo);
        cosection_masses.push(co);
    }
    if let Some(detail) = divergent {
        clauses.push(ClauseResult {
            clause: "integrability",
            verdict: Verdict::Fail,
            detail,
        });
        return Ok(SingularityCertificate {
            family: family.label(),
            d1,
            horizon,
            masses,
            cosection_masses,
            min_masses,
            tails: Vec::new(),
            reproduction: Vec::new(),
            regulator: Vec::new(),
            linear_shortcut: family.is_linear(),
            palette: Vec::new(),
            singular: Verdict::Fail,
            kind: SingularityKind::Fail {
                clause: "integrability".into(),
            },
            clauses,
        });
    }
    clauses.push(ClauseResult {
        clause: "integrability",
        verdict: Verdict::Pass,
        detail: format!("finite section masses at {} points for n ≤ {horizon}", points.len()),
    });

    let h = family.index_set();
    let in_h = |n: usize| h.as_ref().is_none_or(|h| h(n));
    let bound = d1 * (1.0 + MASS_SLACK);
    let worst = (1..=horizon)
        .filter(|&n| in_h(n))
        .map(|n| masses[n - 1].max(cosection_masses[n - 1]))
        .fold(0.0, f64::max);
    clauses.push(ClauseResult {
        clause: "mass-bound",
        verdict: Verdict::from_bool(worst <= bound),
        detail: format!("sup over n ∈ H of both section masses is {worst:.12}, D1 = {d1}"),
    });

    // tails, needed by the index-set clause too
    let mut tails = Vec::with_capacity(deltas.len());
    for &d in deltas {
        let mut row = Vec::with_capacity(horizon);
        for n in 1..=horizon {
            let mut sup: f64 = 0.0;
            for &s in &points {
                sup = sup.max(family.section_mass(n, s, Some(d))?);
            }
            row.push(sup);
        }
        tails.push((d, row));
    }

    clauses.push(match &h {
        None => ClauseResult {
            clause: "index-set",
            verdict: Verdict::Pass,
            detail: "H = ℕ".into(),
        },
        Some(h) => {
            let filter = match &cs.kind {
                ConvergenceKind::Filter { filter, .. } => filter.clone(),
                _ => FilterSpec::Cofinite,
            };
            let mut verdict = Verdict::Pass;
            let mut detail = String::new();
            let seqs = std::iter::once(&masses).chain(tails.iter().map(|(_, r)| r));
            for seq in seqs {
                let t = SequenceTable::from_rows(1, seq.clone())?;
                let r = h_restriction_table(&t, &filter, |n| h(n), cs.tol)?;
                verdict = verdict.and(r.verdict);
                detail = format!("H has density {:.3}, worst ℓ̄ gap {:.3e}", r.h_density, r.difference);
            }
            ClauseResult {
                clause: "index-set",
                verdict,
                detail,
            }
        }
    });
    let singular = clauses.iter().fold(Verdict::Pass, |v, c| v.and(c.verdict));

    let positive = min_masses.iter().all(|&m| m > 0.0);
    clauses.push(ClauseResult {
        clause: "positivity",
        verdict: Verdict::from_bool(positive),
        detail: format!(
            "smallest section mass {:.6e}",
            min_masses.iter().copied().fold(f64::INFINITY, f64::min)
        ),
    });

    let mut tail_verdict = Verdict::Pass;
    let mut tail_detail = Vec::new();
    for (d, row) in &tails {
        let v = tends_to_zero(cs, row)?;
        tail_verdict = tail_verdict.and(v);
        tail_detail.push(format!("δ = {d}: {v}, last {:.3e}", row.last().copied().unwrap_or(0.0)));
    }
    clauses.push(ClauseResult {
        clause: "tail",
        verdict: tail_verdict,
        detail: tail_detail.join("; "),
    });

    // reproduction of constants
    let linear = family.is_linear();
    let dim = 3;
    let pal = palette(dim);
    let regulator: Vec<f64> = (0..dim)
        .map(|k| pal.iter().map(|u| u[k].abs()).fold(0.0, f64::max))
        .collect();
    let mut reproduction = Vec::with_capacity(horizon);
    for n in 1..=horizon {
        let eps = if linear {
            // |∫ L_n u − u| = |mass − 1|·|u| ≤ |mass − 1|·z
            let (hi, lo) = (masses[n - 1], min_masses[n - 1]);
            (hi - 1.0).abs().max((lo - 1.0).abs())
        } else {
            let mut eps: f64 = 0.0;
            for u in &pal {
                let f = LatticeFunction::constant(&LatticeElement::from_slice(u));
                for &s in &points {
                    let v = family.apply(&f, s, n)?;
                    for k in 0..dim {
                        eps = eps.max((v.values()[k] - u[k]).abs() / regulator[k]);
                    }
                }
            }
            eps
        };
        reproduction.push(eps);
    }
    let envelope = tail_envelope(&reproduction);
    let rep = tends_to_zero(cs, &envelope)?;
    clauses.push(ClauseResult {
        clause: "reproduction",
        verdict: rep,
        detail: format!(
            "ε_n envelope from {:.3e} to {:.3e}{}",
            envelope.first().copied().unwrap_or(0.0),
            envelope.last().copied().unwrap_or(0.0),
            if linear { " (linear kernel, read off the masses)" } else { "" }
        ),
    });

    let kind = match first_failure(&clauses) {
        None => SingularityKind::USingular,
        Some(c) if c.verdict == Verdict::Fail => SingularityKind::Fail {
            clause: c.clause.into(),
        },
        Some(c) => SingularityKind::Unresolved {
            clause: c.clause.into(),
        },
    };
    Ok(SingularityCertificate {
        family: family.label(),
        d1,
        horizon,
        masses,
        cosection_masses,
        min_masses,
        tails,
        reproduction,
        regulator,
        linear_shortcut: linear,
        palette: pal,
        clauses,
        singular,
        kind,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LipschitzWitness {
    pub n: usize,
    pub s: f64,
    pub t: f64,
    pub u: f64,
    pub v: f64,
    pub excess: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LipschitzReport {
    pub samples: usize,
    pub violations: usize,
    /// `K_n(s,t,0) ≠ 0` occurrences.
    pub zero_violations: usize,
    /// Largest `|ΔK| − L·ψ(|u−v|)` seen.
    pub worst_excess: f64,
    pub witness: Option<LipschitzWitness>,
}

impl LipschitzReport {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.zero_violations == 0
    }
}

/// Samples `samples` quadruples `(n, s, t, u, v)` and checks
/// `|K_n(s,t,u) − K_n(s,t,v)| ≤ L_n(s,t)·ψ_n(|u−v|)` and `K_n(s,t,0) = 0`.
/// `s` is drawn from the probe set and `t` from the sample window, both
/// uniformly in the metric coordinate; `u, v ∈ [−4, 4]`.
pub fn lipschitz_audit(
    family: &dyn KernelOperator,
    horizon: usize,
    samples: usize,
    seed: u64,
) -> LipschitzReport {
    let ms = family.space();
    let d = &ms.domain;
    let points = family.audit_points();
    let (s0, s1) = (d.to_coord(points[0]), d.to_coord(points[points.len() - 1]));
    let (t0, t1) = d.coord_range(&family.sample_window());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = LipschitzReport {
        samples,
        violations: 0,
        zero_violations: 0,
        worst_excess: f64::NEG_INFINITY,
        witness: None,
    };
    for _ in 0..samples {
        let n = rng.random_range(1..=horizon.max(1));
        let s = d.from_coord(rng.random_range(s0..=s1));
        let t = d.from_coord(rng.random_range(t0..=t1));
        let u = rng.random_range(-4.0..4.0);
        let v = rng.random_range(-4.0..4.0);
        let lhs = (family.kernel(n, s, t, u) - family.kernel(n, s, t, v)).abs();
        let rhs = family.majorant(n, s, t) * family.psi(n, (u - v).abs());
        let excess = lhs - rhs;
        if excess > 1e-12 * rhs.abs().max(1.0) {
            report.violations += 1;
        }
        if family.kernel(n, s, t, 0.0) != 0.0 {
            report.zero_violations += 1;
        }
        if excess > report.worst_excess {
            report.worst_excess = excess;
            report.witness = Some(LipschitzWitness { n, s, t, u, v, excess });
        }
    }
    if report.violations == 0 {
        report.witness = None;
    }
    report
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PsiReport {
    /// `ψ_n(0) = 0` for every `n`.
    pub vanishes_at_zero: bool,
    /// Nondecreasing on the sample grid for every `n`.
    pub monotone: bool,
    /// `(w, δ)`: `ψ_n(u) ≤ w` for all `n` and `u ≤ δ`; `None` if no dyadic
    /// `δ ≥ 2⁻⁴⁰` works.
    pub equicontinuity: Vec<(f64, Option<f64>)>,
    /// `(u, sup_n ψ_n(u))`.
    pub bounds: Vec<(f64, f64)>,
}

impl PsiReport {
    pub fn passed(&self) -> bool {
        self.vanishes_at_zero
            && self.monotone
            && self.equicontinuity.iter().all(|(_, d)| d.is_some())
            && self.bounds.iter().all(|(_, b)| b.is_finite())
    }
}

/// Checks that `(ψ_n)_{n ≤ horizon}` lies in the class Ψ: vanishing at
/// 0, nondecreasing, equicontinuous at 0 with shared `δ(w)` and order
/// equibounded.
pub fn psi_audit(family: &dyn KernelOperator, horizon: usize) -> PsiReport {
    let ns = 1..=horizon.max(1);
    let sup = |u: f64| ns.clone().map(|n| family.psi(n, u)).fold(f64::NEG_INFINITY, f64::max);
    let vanishes_at_zero = ns.clone().all(|n| family.psi(n, 0.0) == 0.0);
    let grid: Vec<f64> = (0..=256).map(|k| 8.0 * k as f64 / 256.0).collect();
    let monotone = ns.clone().all(|n| {
        grid.windows(2)
            .all(|w| family.psi(n, w[1]) >= family.psi(n, w[0]))
    });
    let equicontinuity = [1e-1, 1e-2, 1e-3]
        .into_iter()
        .map(|w| (w, (0..=40).map(|j| 2f64.powi(-j)).find(|&d| sup(d) <= w)))
        .collect();
    let bounds = [0.5, 1.0, 2.0, 4.0].into_iter().map(|u| (u, sup(u))).collect();
    PsiReport {
        vanishes_at_zero,
        monotone,
        equicontinuity,
        bounds,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScaleInvarianceReport {
    pub n: usize,
    /// `(s, ∫ L_n(s,t) dμ(t))`.
    pub masses: Vec<(f64, f64)>,
    pub spread: f64,
}

impl ScaleInvarianceReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.spread <= tol
    }
}

/// Section masses of `L_n` at each `s` in `scales`; for Mellin families
/// they are integrated in `t`, so agreement is a genuine check of the
/// invariance of `dt/t`.
pub fn scale_invariance(family: &dyn KernelOperator, n: usize, scales: &[f64]) -> Result<ScaleInvarianceReport> {
    let masses: Vec<(f64, f64)> = scales
        .iter()
        .map(|&s| family.section_mass(n, s, None).map(|m| (s, m)))
        .collect::<Result<_>>()?;
    let hi = masses.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let lo = masses.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    Ok(ScaleInvarianceReport {
        n,
        spread: if masses.is_empty() { 0.0 } else { hi - lo },
        masses,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StarPropertyReport {
    /// `(m, ℓ̄_n sup_{t∈C} ∫_{G∖B_m} L_n(s,t) dμ(s))`.
    pub outer: Vec<(usize, f64)>,
    pub verdict: Verdict,
    pub compact: Interval,
}

/// The exhaustion condition used for equiabsolute continuity of
/// `φ(λ|T_n f|)`: with `B_m` the exhausting sets of the space, the
/// `m`-limit of `ℓ̄_n(sup_{t∈C} ∫_{G∖B_m} L_n(s,t) dμ(s))` must vanish.
/// `C` is sampled at 17 points, uniformly in the metric coordinate.
pub fn star_property_audit(
    family: &dyn KernelOperator,
    compact: Interval,
    m_max: usize,
    horizon: usize,
    cs: &ConvergenceStructure,
) -> Result<StarPropertyReport> {
    let ms = family.space();
    let d = &ms.domain;
    let (a, b) = d.coord_range(&compact);
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Precondition("C must be compact in the domain metric".into()));
    }
    let ts: Vec<f64> = (0..=16).map(|k| d.from_coord(a + (b - a) * k as f64 / 16.0)).collect();
    let ls = cs.companion_limsup();
    let carrier = d.carrier;
    let mut outer = Vec::with_capacity(m_max);
    for m in 1..=m_max {
        let out = IntervalSet::single(ms.exhausting_set(m)).complement_in(&carrier);
        let mut row = Vec::with_capacity(horizon);
        for n in 1..=horizon {
            let mut sup: f64 = 0.0;
            for &t in &ts {
                sup = sup.max(family.cosection_mass(n, t, Some(&out))?);
            }
            row.push(sup);
        }
        let est = ls.apply_table(&SequenceTable::from_rows(1, row)?)?;
        outer.push((m, est.value.get_extended(0)));
    }
    let values: Vec<f64> = outer.iter().map(|p| p.1).collect();
    let verdict = tends_to_zero(&ConvergenceStructure::ordinary(cs.tol), &values)?;
    Ok(StarPropertyReport {
        outer,
        verdict,
        compact,
    })
}
