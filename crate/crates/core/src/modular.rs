//! Convex lattice maps, Jensen's inequality, the Orlicz modular
//! `ρ^φ(f) = ∫ φ(|f|) dμ` and modular convergence.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::convergence::{ConvergenceStructure, SequenceTable, Verdict};
use crate::error::{Error, Result};
use crate::lattice::LatticeElement;
use crate::measure::{FunctionSequence, IntervalSet, LatticeFunction, MeasureSpace};

type Scalar = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Step of the centered difference used when no derivative is supplied.
const SLOPE_STEP: f64 = 1e-6;

#[derive(Clone)]
pub enum PhiKind {
    /// `φ(x) = x²`, slope `β_v = 2v`.
    Square,
    /// `φ(x) = |x|^p` for an integer `p ≥ 3`, slope `p|v|^{p−2}v`.
    Power(u32),
    /// `φ(x)(ω) = φ̂(x(ω))` for a scalar map `φ̂`.
    Lifted {
        name: String,
        phi: Scalar,
        slope: Option<Scalar>,
    },
}

/// A convex map `φ : X → X` acting entrywise, with support slopes.
#[derive(Clone)]
pub struct ConvexPhi {
    pub kind: PhiKind,
}

impl fmt::Debug for ConvexPhi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl ConvexPhi {
    pub fn square() -> Self {
        Self { kind: PhiKind::Square }
    }

    pub fn power(p: u32) -> Result<Self> {
        if p < 3 {
            return Err(Error::Parameter(format!("power φ needs an integer p ≥ 3, got {p}")));
        }
        Ok(Self {
            kind: PhiKind::Power(p),
        })
    }

    pub fn lifted(
        name: impl Into<String>,
        phi: impl Fn(f64) -> f64 + Send + Sync + 'static,
        slope: Option<Scalar>,
    ) -> Self {
        Self {
            kind: PhiKind::Lifted {
                name: name.into(),
                phi: Arc::new(phi),
                slope,
            },
        }
    }

    /// `φ̂(t) = e^{|t|} − 1`.
    pub fn exp_minus_one() -> Self {
        Self::lifted(
            "exp(|t|) - 1",
            |t: f64| t.abs().exp_m1(),
            Some(Arc::new(|t: f64| t.signum() * t.abs().exp() * (t != 0.0) as u8 as f64)),
        )
    }

    pub fn label(&self) -> String {
        match &self.kind {
            PhiKind::Square => "square".into(),
            PhiKind::Power(p) => format!("power({p})"),
            PhiKind::Lifted { name, .. } => format!("lifted({name})"),
        }
    }

    /// `φ̂(t)`; overflow yields `+∞`.
    pub fn scalar(&self, t: f64) -> f64 {
        match &self.kind {
            PhiKind::Square => t * t,
            PhiKind::Power(p) => t.abs().powi(*p as i32),
            PhiKind::Lifted { phi, .. } => phi(t),
        }
    }

    /// `β_v` for a scalar `v`.
    pub fn slope(&self, v: f64) -> f64 {
        match &self.kind {
            PhiKind::Square => 2.0 * v,
            PhiKind::Power(p) => *p as f64 * v.abs().powi(*p as i32 - 2) * v,
            PhiKind::Lifted { phi, slope, .. } => match slope {
                Some(d) => d(v),
                None => (phi(v + SLOPE_STEP) - phi(v - SLOPE_STEP)) / (2.0 * SLOPE_STEP),
            },
        }
    }

    /// `β*_u = sup{|β_v| : v ∈ [−u, u]}`, entrywise; slopes of a convex map
    /// are monotone, so the endpoints suffice.
    pub fn slope_bound(&self, u: &LatticeElement) -> LatticeElement {
        u.map_finite(|x| self.slope(x.abs()).abs().max(self.slope(-x.abs()).abs()))
    }

    pub fn beta(&self, v: &LatticeElement) -> LatticeElement {
        v.map_finite(|x| self.slope(x))
    }
}

/// Entrywise `φ(x)`, with `+∞` flags where `φ̂` overflows.
pub fn phi_eval(phi: &ConvexPhi, x: &LatticeElement) -> Result<LatticeElement> {
    if !x.is_finite() {
        return Err(Error::InvalidValue("φ is evaluated on finite elements".into()));
    }
    let v: Vec<f64> = x.values().iter().map(|&t| phi.scalar(t)).collect();
    if v.iter().any(|t| t.is_nan()) {
        return Err(Error::Domain(format!("{} is undefined on the range of x", phi.label())));
    }
    LatticeElement::new(v)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvexityWitness {
    pub clause: &'static str,
    pub s: Vec<f64>,
    pub v: Vec<f64>,
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvexityReport {
    pub phi: String,
    pub samples: usize,
    pub support_violations: usize,
    pub scaling_violations: usize,
    pub lipschitz_violations: usize,
    pub join_violations: usize,
    /// Most negative slack seen over all clauses (0 when none fail).
    pub worst_margin: f64,
    pub beta_star: Vec<f64>,
    pub witness: Option<ConvexityWitness>,
}

impl ConvexityReport {
    pub fn passed(&self) -> bool {
        self.support_violations + self.scaling_violations + self.lipschitz_violations + self.join_violations
            == 0
    }
}

/// Samples `s, v, x₁, x₂ ∈ [−u, u]` and `ξ ∈ [0, 1]` and checks, entrywise:
/// the support inequality `φ(s) ≥ φ(v) + β_v(s − v)`; `φ(ξx) ≤ ξφ(x)`;
/// `|φ(x₁) − φ(x₂)| ≤ β*_u|x₁ − x₂|`; and `φ(x₁ ∨ x₂) ≤ φ(x₁) + φ(x₂)`.
pub fn convexity_audit(phi: &ConvexPhi, u: &LatticeElement, samples: usize, seed: u64) -> ConvexityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = u.dim();
    let bound: Vec<f64> = u.values().iter().map(|x| x.abs()).collect();
    let beta_star = phi.slope_bound(u).to_vec();
    let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        bound
            .iter()
            .map(|&b| if b > 0.0 { rng.random_range(-b..=b) } else { 0.0 })
            .collect()
    };
    let mut report = ConvexityReport {
        phi: phi.label(),
        samples,
        support_violations: 0,
        scaling_violations: 0,
        lipschitz_violations: 0,
        join_violations: 0,
        worst_margin: 0.0,
        beta_star: beta_star.clone(),
        witness: None,
    };
    let note = |report: &mut ConvexityReport, clause: &'static str, s: &[f64], v: &[f64], margin: f64| {
        let tol = 1e-9 * (1.0 + s.iter().chain(v).fold(0.0f64, |m, x| m.max(x.abs())));
        if margin >= -tol {
            return;
        }
        match clause {
            "support" => report.support_violations += 1,
            "scaling" => report.scaling_violations += 1,
            "lipschitz" => report.lipschitz_violations += 1,
            _ => report.join_violations += 1,
        }
        if margin < report.worst_margin {
            report.worst_margin = margin;
        }
        if report.witness.is_none() {
            report.witness = Some(ConvexityWitness {
                clause,
                s: s.to_vec(),
                v: v.to_vec(),
                margin,
            });
        }
    };
    for k in 0..samples {
        let s = draw(&mut rng);
        let v = draw(&mut rng);
        // include ξ = 0 and ξ = 1 exactly
        let xi = match k {
            0 => 0.0,
            1 => 1.0,
            _ => rng.random_range(0.0..=1.0),
        };
        for i in 0..dim {
            let support = phi.scalar(s[i]) - phi.scalar(v[i]) - phi.slope(v[i]) * (s[i] - v[i]);
            note(&mut report, "support", &s, &v, support);
            let scaling = xi * phi.scalar(s[i]) - phi.scalar(xi * s[i]);
            note(&mut report, "scaling", &s, &v, scaling);
            let lip = beta_star[i] * (s[i] - v[i]).abs() - (phi.scalar(s[i]) - phi.scalar(v[i])).abs();
            note(&mut report, "lipschitz", &s, &v, lip);
            let join = phi.scalar(s[i]) + phi.scalar(v[i]) - phi.scalar(s[i].max(v[i]));
            note(&mut report, "join", &s, &v, join);
        }
    }
    report
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JensenReport {
    /// `φ(∫ h f dμ)`.
    pub lhs: LatticeElement,
    /// `∫ h φ(f) dμ`.
    pub rhs: LatticeElement,
    /// `rhs − lhs`, entrywise.
    pub gap: Vec<f64>,
    pub h_mass: f64,
}

/// Quadrature tolerance for Jensen and modular integrals.
const TOL: f64 = 1e-10;

/// Jensen's inequality `φ(∫ h f) ≤ ∫ h φ(f)` for a scalar weight `h ≥ 0`
/// with `0 < ∫ h ≤ 1`. Both sides use the configured fixed quadrature.
pub fn jensen_gap(
    phi: &ConvexPhi,
    h: &LatticeFunction,
    f: &LatticeFunction,
    set: &IntervalSet,
    ms: &MeasureSpace,
) -> Result<JensenReport> {
    if h.dim() != 1 {
        return Err(Error::Precondition("the Jensen weight must be scalar".into()));
    }
    let mass = ms.quadrature(h, set, TOL)?.value[0];
    if !(mass > 0.0) || mass > 1.0 + 1e-9 {
        return Err(Error::Precondition(format!("∫h dμ = {mass} is not in (0, 1]")));
    }
    if let Some(hull) = set.hull() {
        let grid = ms.grid(&hull.intersect(&h.support.unwrap_or(hull)), 512).unwrap_or_default();
        let mut b = [0.0];
        for (t, _) in grid {
            h.eval_into(t, &mut b);
            if b[0] < 0.0 {
                return Err(Error::Precondition(format!("weight is negative at t = {t}")));
            }
        }
    }
    let hf = h.mul(f)?;
    let inner = LatticeElement::new(ms.quadrature(&hf, set, TOL)?.value)?;
    let lhs = phi_eval(phi, &inner)?;
    let p = phi.clone();
    let hphi = h.mul(&f.map(move |v| p.scalar(v)))?;
    let rhs = LatticeElement::new(ms.quadrature(&hphi, set, TOL)?.value)?;
    let gap = rhs.values().iter().zip(lhs.values()).map(|(r, l)| r - l).collect();
    Ok(JensenReport {
        lhs,
        rhs,
        gap,
        h_mass: mass,
    })
}

/// The Orlicz modular `ρ^φ` on functions over `ms`, with the convergence
/// structure used for its limits.
#[derive(Clone, Debug)]
pub struct Modular {
    pub phi: ConvexPhi,
    pub ms: MeasureSpace,
    pub cs: ConvergenceStructure,
}

impl Modular {
    pub fn new(phi: ConvexPhi, ms: MeasureSpace, cs: ConvergenceStructure) -> Self {
        Self { phi, ms, cs }
    }
}

/// `ρ^φ(f) = ∫_G φ(|f|) dμ`, entries flagged `+∞` when the exhausting
/// shells do not settle.
pub fn modular_eval(m: &Modular, f: &LatticeFunction) -> Result<LatticeElement> {
    let p = m.phi.clone();
    let g = f.map(move |v| p.scalar(v.abs()));
    let whole = IntervalSet::single(m.ms.domain.carrier);
    match m.ms.quadrature(&g, &whole, TOL) {
        Ok(r) => LatticeElement::new(r.value),
        Err(Error::Divergent(_)) => {
            // settle each entry on its own so only divergent ones are flagged
            let dim = f.dim();
            let mut out = Vec::with_capacity(dim);
            for k in 0..dim {
                let gk = {
                    let inner = g.clone();
                    let mut h = LatticeFunction::new(1, move |t, o| {
                        let mut buf = vec![0.0; dim];
                        inner.eval_into(t, &mut buf);
                        o[0] = buf[k];
                    });
                    h.support = g.support;
                    h.with_breaks(&g.breaks)
                };
                out.push(match m.ms.quadrature(&gk, &whole, TOL) {
                    Ok(r) => r.value[0],
                    Err(Error::Divergent(_)) => f64::INFINITY,
                    Err(e) => return Err(e),
                });
            }
            LatticeElement::new(out)
        }
        Err(e) => Err(e),
    }
}

fn norm_ext(x: &LatticeElement) -> f64 {
    if !x.is_finite() {
        return f64::INFINITY;
    }
    x.values().iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum OrliczClass {
    /// Finite elements `E^φ`: `ρ(αf) < ∞` for every probed `α`.
    #[serde(rename = "E^phi")]
    Finite,
    /// `L^φ ∖ E^φ`.
    #[serde(rename = "L^phi \\ E^phi")]
    OrliczOnly,
    #[serde(rename = "neither")]
    Neither,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrliczReport {
    /// `(α, ‖ρ(αf)‖)` along the grid, `+∞` allowed.
    pub trace: Vec<(f64, f64)>,
    /// `ρ(αf) → 0` as `α ↓ 0` along the grid.
    pub vanishes: Verdict,
    pub class: OrliczClass,
    pub grid: String,
}

/// `α = 2^k` for `k = 3, 2, …, −30`.
pub fn default_alpha_grid() -> Vec<f64> {
    (-30..=3).rev().map(|k| 2f64.powi(k)).collect()
}

/// Classifies `f` as a member of `E^φ`, of `L^φ ∖ E^φ`, or neither, by
/// evaluating `ρ(αf)` on a grid straddling 1 and descending toward 0.
pub fn orlicz_membership(m: &Modular, f: &LatticeFunction, alphas: &[f64]) -> Result<OrliczReport> {
    if !alphas.iter().any(|&a| a > 1.0) || !alphas.iter().any(|&a| a > 0.0 && a < 1.0) {
        return Err(Error::Parameter("α grid must reach above 1 and below 1".into()));
    }
    if alphas.iter().any(|&a| !(a > 0.0)) {
        return Err(Error::Parameter("α grid must be positive".into()));
    }
    let mut grid = alphas.to_vec();
    grid.sort_by(|a, b| b.total_cmp(a));
    let mut trace = Vec::with_capacity(grid.len());
    for &a in &grid {
        trace.push((a, norm_ext(&modular_eval(m, &f.scale(a))?)));
    }
    let small: Vec<f64> = trace.iter().filter(|(a, _)| *a < 1.0).map(|&(_, v)| v).collect();
    let vanishes = if small.iter().all(|v| v.is_finite()) {
        m.cs
            .converges_table(&SequenceTable::from_rows(1, small)?, &LatticeElement::zeros(1))?
    } else if small.last().is_some_and(|v| v.is_finite()) {
        // finite from some α on: judge the finite tail
        let tail: Vec<f64> = small.into_iter().skip_while(|v| !v.is_finite()).collect();
        m.cs.converges_table(&SequenceTable::from_rows(1, tail)?, &LatticeElement::zeros(1))?
    } else {
        Verdict::Fail
    };
    let all_finite = trace.iter().all(|(_, v)| v.is_finite());
    let class = match (vanishes, all_finite) {
        (Verdict::Pass, true) => OrliczClass::Finite,
        (Verdict::Pass, false) => OrliczClass::OrliczOnly,
        _ => OrliczClass::Neither,
    };
    let (hi, lo) = (grid[0], *grid.last().unwrap());
    Ok(OrliczReport {
        trace,
        vanishes,
        class,
        grid: format!("{} points from {hi:e} down to {lo:e}", grid.len()),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlphaTrial {
    pub alpha: f64,
    /// `‖ρ(α(f_n − f))‖` for `n = 1..=N`.
    pub values: Vec<f64>,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModularVerdict {
    /// Largest passing `α` on the grid.
    pub alpha: Option<f64>,
    pub verdict: Verdict,
    /// Every smaller probed `β` passes as well.
    pub solid: bool,
    pub trace: Vec<AlphaTrial>,
    /// `1/D⁽¹⁾` when the caller knows the mass bound, for comparison.
    pub analytic_bound: Option<f64>,
}

/// Searches `α = 2^k`, `k = k_max, …, −k_min`, for modular convergence
/// `ρ^φ(α(f_n − f)) → 0`. Differences are memoized so each `α` reuses the
/// same evaluations of `f_n`.
pub fn modular_convergence_search(
    m: &Modular,
    fseq: &FunctionSequence,
    f: &LatticeFunction,
    k_max: i32,
    k_min: i32,
    d1: Option<f64>,
) -> Result<ModularVerdict> {
    let diffs: Vec<LatticeFunction> = (1..=fseq.horizon)
        .map(|n| fseq.term(n).sub(f).map(|g| g.memoized()))
        .collect::<Result<_>>()?;
    let mut trace = Vec::new();
    for k in (-k_min..=k_max).rev() {
        let alpha = 2f64.powi(k);
        let values: Vec<f64> = diffs
            .iter()
            .map(|g| modular_eval(m, &g.scale(alpha)).map(|v| norm_ext(&v)))
            .collect::<Result<_>>()?;
        let verdict = if values.iter().all(|v| v.is_finite()) {
            m.cs
                .converges_table(&SequenceTable::from_rows(1, values.clone())?, &LatticeElement::zeros(1))?
        } else {
            Verdict::Fail
        };
        trace.push(AlphaTrial { alpha, values, verdict });
    }
    let first = trace.iter().position(|t| t.verdict == Verdict::Pass);
    let solid = first.is_some_and(|i| trace[i..].iter().all(|t| t.verdict == Verdict::Pass));
    let verdict = match first {
        Some(_) if solid => Verdict::Pass,
        Some(_) => Verdict::Fail,
        None if trace.iter().any(|t| t.verdict == Verdict::Inconclusive) => Verdict::Inconclusive,
        None => Verdict::Fail,
    };
    Ok(ModularVerdict {
        alpha: first.map(|i| trace[i].alpha),
        verdict,
        solid,
        trace,
        analytic_bound: d1.map(|d| 1.0 / d),
    })
}
