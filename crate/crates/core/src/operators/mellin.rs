use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lattice::LatticeElement;
use crate::measure::{Interval, IntervalSet, LatticeFunction, MeasureSpace};
use crate::quadrature::QuadratureRule;

use super::{IndexSet, KernelOperator, KERNEL_TOL};

type Ltilde = Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>;
type Ktilde = Arc<dyn Fn(usize, f64, f64) -> f64 + Send + Sync>;
type Psi = Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>;

/// One member `L̃_n` of a Mellin family.
#[derive(Clone)]
pub struct MellinKernel {
    pub n: usize,
    ltilde: Ltilde,
    /// Closed hull of `{L̃_n ≠ 0}`.
    pub support: Interval,
    pub breaks: Vec<f64>,
}

impl fmt::Debug for MellinKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MellinKernel")
            .field("n", &self.n)
            .field("support", &self.support)
            .finish_non_exhaustive()
    }
}

impl MellinKernel {
    pub fn eval(&self, t: f64) -> f64 {
        (self.ltilde)(self.n, t)
    }

    pub fn to_function(&self) -> LatticeFunction {
        let (l, n) = (self.ltilde.clone(), self.n);
        LatticeFunction::scalar(move |t| l(n, t))
            .with_support(self.support)
            .with_breaks(&self.breaks)
    }

    /// `∫_A L̃_n dt/t`.
    pub fn haar_mass(&self, set: &IntervalSet, rule: QuadratureRule) -> Result<f64> {
        let ms = MeasureSpace::haar().with_rule(rule);
        Ok(ms.quadrature(&self.to_function(), set, KERNEL_TOL)?.value[0])
    }
}

/// `L̃_n(t) = n·tⁿ·χ_(0,1)(t)`.
pub fn moment_kernel(n: usize) -> Result<MellinKernel> {
    if n < 1 {
        return Err(Error::Parameter("the moment kernel needs n ≥ 1".into()));
    }
    Ok(MellinKernel {
        n,
        ltilde: Arc::new(moment),
        support: Interval { lo: 0.0, hi: 1.0 },
        breaks: vec![1.0],
    })
}

fn moment(n: usize, t: f64) -> f64 {
    if t > 0.0 && t < 1.0 {
        n as f64 * t.powi(n as i32)
    } else {
        0.0
    }
}

/// A family `(K̃_n)_n` of Mellin kernels acting by
/// `(T̃_n f)(s) = ∫ K̃_n(t/s, f(t)) dt/t`.
#[derive(Clone)]
pub struct MellinKernelFamily {
    label: String,
    ltilde: Ltilde,
    /// `None`: the linear kernel `K̃_n(t,u) = L̃_n(t)·u`.
    nonlinear: Option<Ktilde>,
    psi: Psi,
    support: Interval,
    breaks: Vec<f64>,
    d1: f64,
    h: Option<IndexSet>,
    /// Rule for the kernel integrals; composite Gauss–Legendre by default,
    /// since `L̃_n` is smooth between its breaks.
    pub rule: QuadratureRule,
    /// Where the audits sample `s`.
    pub probe: Interval,
}

impl fmt::Debug for MellinKernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MellinKernelFamily")
            .field("label", &self.label)
            .field("support", &self.support)
            .field("d1", &self.d1)
            .field("rule", &self.rule)
            .finish_non_exhaustive()
    }
}

impl MellinKernelFamily {
    /// A linear family from `(n, t) ↦ L̃_n(t)`, vanishing outside `support`.
    pub fn new(
        label: impl Into<String>,
        ltilde: impl Fn(usize, f64) -> f64 + Send + Sync + 'static,
        support: Interval,
        breaks: &[f64],
        d1: f64,
    ) -> Result<Self> {
        if !(support.lo >= 0.0 && support.hi > support.lo) {
            return Err(Error::Parameter(format!(
                "Mellin kernel support must be a nondegenerate subset of ℝ⁺, got {support:?}"
            )));
        }
        if !(d1 > 0.0 && d1.is_finite()) {
            return Err(Error::Parameter(format!("D1 must be positive and finite, got {d1}")));
        }
        Ok(Self {
            label: label.into(),
            ltilde: Arc::new(ltilde),
            nonlinear: None,
            psi: Arc::new(|_, u| u),
            support,
            breaks: breaks.to_vec(),
            d1,
            h: None,
            rule: QuadratureRule::GaussLegendre { panels: 8, order: 16 },
            probe: Interval { lo: 0.25, hi: 4.0 },
        })
    }

    /// The moment family, `D⁽¹⁾ = 1`, `H = ℕ`.
    pub fn moment() -> Self {
        Self::new("moment", moment, Interval { lo: 0.0, hi: 1.0 }, &[1.0], 1.0)
            .expect("moment family parameters are valid")
    }

    pub fn with_rule(mut self, rule: QuadratureRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn with_index_set(mut self, h: impl Fn(usize) -> bool + Send + Sync + 'static) -> Self {
        self.h = Some(Arc::new(h));
        self
    }

    pub fn with_probe(mut self, probe: Interval) -> Self {
        self.probe = probe;
        self
    }

    /// Replaces the linear action by `K̃_n(t, u)` with modulus `ψ_n`, so that
    /// `|K̃_n(t,u) − K̃_n(t,v)| ≤ L̃_n(t)·ψ_n(|u − v|)` is expected to hold.
    pub fn with_nonlinear(
        mut self,
        k: impl Fn(usize, f64, f64) -> f64 + Send + Sync + 'static,
        psi: impl Fn(usize, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.nonlinear = Some(Arc::new(k));
        self.psi = Arc::new(psi);
        self
    }

    /// Multiplies every kernel, and `D⁽¹⁾`, by `c`.
    pub fn scaled(mut self, c: f64) -> Self {
        let l = self.ltilde.clone();
        self.ltilde = Arc::new(move |n, t| c * l(n, t));
        if let Some(k) = self.nonlinear.take() {
            self.nonlinear = Some(Arc::new(move |n, t, u| c * k(n, t, u)));
        }
        self.d1 *= c.abs();
        self.label = format!("{}×{c}", self.label);
        self
    }

    /// The member `L̃_n`.
    pub fn kernel(&self, n: usize) -> Result<MellinKernel> {
        if n < 1 {
            return Err(Error::Parameter("kernel index starts at n = 1".into()));
        }
        Ok(MellinKernel {
            n,
            ltilde: self.ltilde.clone(),
            support: self.support,
            breaks: self.breaks.clone(),
        })
    }

    fn k(&self, n: usize, z: f64, u: f64) -> f64 {
        match &self.nonlinear {
            Some(k) => k(n, z, u),
            None => {
                let l = (self.ltilde)(n, z);
                if l == 0.0 || u == 0.0 {
                    0.0
                } else {
                    l * u
                }
            }
        }
    }

    fn haar(&self) -> MeasureSpace {
        MeasureSpace::haar().with_rule(self.rule)
    }

    /// `∫ L̃_n(t/s) dt/t`, optionally outside `[s/δ, sδ]`, integrated in `t`
    /// (not in the ratio) so the scale invariance is actually exercised.
    fn mass_at(&self, n: usize, s: f64, outside: Option<f64>) -> Result<f64> {
        let kernel = self.kernel(n)?;
        let l = kernel.ltilde.clone();
        let breaks: Vec<f64> = self.breaks.iter().map(|b| b * s).collect();
        let g = LatticeFunction::scalar(move |t| l(n, t / s))
            .with_support(Interval {
                lo: self.support.lo * s,
                hi: self.support.hi * s,
            })
            .with_breaks(&breaks);
        let whole = IntervalSet::single(Interval {
            lo: 0.0,
            hi: f64::INFINITY,
        });
        let set = match outside {
            None => whole,
            Some(d) if d > 1.0 => IntervalSet::single(Interval { lo: s / d, hi: s * d })
                .complement_in(&Interval {
                    lo: 0.0,
                    hi: f64::INFINITY,
                }),
            Some(d) => return Err(Error::Parameter(format!("Mellin radius must exceed 1, got {d}"))),
        };
        Ok(self.haar().quadrature(&g, &set, KERNEL_TOL)?.value[0])
    }
}

/// `(T̃_n f)(s) = ∫_0^∞ K̃_n(t/s, f(t)) dt/t`, evaluated in the ratio
/// `z = t/s` as `∫ K̃_n(z, f(sz)) dz/z`. The majorant
/// `∫ L̃_n(z)·ψ_n(|f(sz)|) dz/z` is integrated alongside; if either
/// diverges, `f` is outside the domain of `T̃_n`.
pub fn mellin_apply(
    mf: &MellinKernelFamily,
    f: &LatticeFunction,
    s: f64,
    n: usize,
) -> Result<LatticeElement> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::Precondition(format!("Mellin operators act at s > 0, got {s}")));
    }
    if n < 1 {
        return Err(Error::Parameter("kernel index starts at n = 1".into()));
    }
    let dim = f.dim();
    let zs = match &f.support {
        Some(i) => Interval {
            lo: i.lo / s,
            hi: i.hi / s,
        }
        .intersect(&mf.support),
        None => mf.support,
    };
    if zs.is_empty() {
        return Ok(LatticeElement::zeros(dim));
    }
    let mut breaks = mf.breaks.clone();
    breaks.extend(f.breaks.iter().map(|b| b / s));
    let (family, inner) = (mf.clone(), f.clone());
    let g = LatticeFunction::new(2 * dim, move |z, out| {
        let (val, maj) = out.split_at_mut(dim);
        inner.eval_into(s * z, val);
        let l = (family.ltilde)(n, z);
        for (v, m) in val.iter_mut().zip(maj.iter_mut()) {
            let u = *v;
            *m = if l == 0.0 { 0.0 } else { l * (family.psi)(n, u.abs()) };
            *v = family.k(n, z, u);
        }
    })
    .with_support(zs)
    .with_breaks(&breaks);
    match mf.haar().quadrature(&g, &IntervalSet::single(zs), KERNEL_TOL) {
        Ok(r) => LatticeElement::new(r.value[..dim].to_vec()),
        Err(Error::Divergent(msg)) => Err(Error::Domain(format!(
            "Mellin kernel integral at s = {s}, n = {n} diverges: {msg}"
        ))),
        Err(e) => Err(e),
    }
}

impl KernelOperator for MellinKernelFamily {
    fn label(&self) -> String {
        self.label.clone()
    }

    fn space(&self) -> MeasureSpace {
        self.haar()
    }

    fn d1(&self) -> f64 {
        self.d1
    }

    fn index_set(&self) -> Option<IndexSet> {
        self.h.clone()
    }

    fn kernel(&self, n: usize, s: f64, t: f64, u: f64) -> f64 {
        self.k(n, t / s, u)
    }

    fn majorant(&self, n: usize, s: f64, t: f64) -> f64 {
        (self.ltilde)(n, t / s)
    }

    fn psi(&self, n: usize, u: f64) -> f64 {
        (self.psi)(n, u)
    }

    fn is_linear(&self) -> bool {
        self.nonlinear.is_none()
    }

    fn apply(&self, f: &LatticeFunction, s: f64, n: usize) -> Result<LatticeElement> {
        mellin_apply(self, f, s, n)
    }

    fn section_mass(&self, n: usize, s: f64, outside: Option<f64>) -> Result<f64> {
        self.mass_at(n, s, outside)
    }

    fn cosection_mass(&self, n: usize, t: f64, over: Option<&IntervalSet>) -> Result<f64> {
        // ∫ L̃_n(t/s) ds/s, integrated in s
        let l = self.ltilde.clone();
        let (lo, hi) = (self.support.lo, self.support.hi);
        let support = Interval {
            lo: if hi.is_finite() { t / hi } else { 0.0 },
            hi: if lo > 0.0 { t / lo } else { f64::INFINITY },
        };
        let breaks: Vec<f64> = self.breaks.iter().filter(|b| **b > 0.0).map(|b| t / b).collect();
        let g = LatticeFunction::scalar(move |s| l(n, t / s))
            .with_support(support)
            .with_breaks(&breaks);
        let whole = IntervalSet::single(Interval {
            lo: 0.0,
            hi: f64::INFINITY,
        });
        let set = over.unwrap_or(&whole);
        Ok(self.haar().quadrature(&g, set, KERNEL_TOL)?.value[0])
    }

    fn audit_points(&self) -> Vec<f64> {
        let (a, b) = (self.probe.lo.ln(), self.probe.hi.ln());
        (0..=8).map(|k| (a + (b - a) * k as f64 / 8.0).exp()).collect()
    }

    fn sample_window(&self) -> Interval {
        Interval {
            lo: self.probe.lo / 4.0,
            hi: self.probe.hi * 4.0,
        }
    }

    fn output_support(&self, _n: usize, f: &Interval) -> Option<Interval> {
        // s·z ∈ [a, b] for some z in the kernel support
        Some(Interval {
            lo: if self.support.hi.is_finite() {
                f.lo / self.support.hi
            } else {
                0.0
            },
            hi: if self.support.lo > 0.0 {
                f.hi / self.support.lo
            } else {
                f64::INFINITY
            },
        })
    }

    fn output_breaks(&self, _n: usize, f: &LatticeFunction) -> Vec<f64> {
        let mut out = Vec::new();
        for &b in &f.breaks {
            for &k in self.breaks.iter().chain([self.support.lo, self.support.hi].iter()) {
                if k > 0.0 && k.is_finite() {
                    out.push(b / k);
                }
            }
        }
        out
    }
}
