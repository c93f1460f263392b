use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lattice::LatticeElement;
use crate::measure::{Interval, IntervalSet, LatticeFunction, MeasureSpace};

use super::{IndexSet, KernelOperator, KERNEL_TOL};

type Kernel = Arc<dyn Fn(usize, f64, f64, f64) -> f64 + Send + Sync>;
type Majorant = Arc<dyn Fn(usize, f64, f64) -> f64 + Send + Sync>;
type Psi = Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>;
type Section = Arc<dyn Fn(usize, f64) -> Interval + Send + Sync>;

/// A Urysohn family `K_n(s, t, u)` on `(G, μ)` with Lipschitz majorant
/// `L_n(s, t)` and moduli `ψ_n`.
#[derive(Clone)]
pub struct KernelFamily {
    label: String,
    ms: MeasureSpace,
    kernel: Kernel,
    majorant: Majorant,
    psi: Psi,
    /// `t`-support of `L_n(s, ·)`.
    section: Section,
    /// `s`-support of `L_n(·, t)`.
    cosection: Section,
    d1: f64,
    h: Option<IndexSet>,
    linear: bool,
    /// Finite-measure set the audits sample `s` from.
    pub probe: Interval,
}

impl fmt::Debug for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelFamily")
            .field("label", &self.label)
            .field("d1", &self.d1)
            .field("probe", &self.probe)
            .finish_non_exhaustive()
    }
}

impl KernelFamily {
    /// General constructor. `section(n, s)` and `cosection(n, t)` must
    /// contain the supports of `L_n(s,·)` and `L_n(·,t)`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        label: impl Into<String>,
        ms: MeasureSpace,
        kernel: impl Fn(usize, f64, f64, f64) -> f64 + Send + Sync + 'static,
        majorant: impl Fn(usize, f64, f64) -> f64 + Send + Sync + 'static,
        psi: impl Fn(usize, f64) -> f64 + Send + Sync + 'static,
        section: impl Fn(usize, f64) -> Interval + Send + Sync + 'static,
        cosection: impl Fn(usize, f64) -> Interval + Send + Sync + 'static,
        d1: f64,
    ) -> Result<Self> {
        if !(d1 > 0.0 && d1.is_finite()) {
            return Err(Error::Parameter(format!("D1 must be positive and finite, got {d1}")));
        }
        Ok(Self {
            label: label.into(),
            ms,
            kernel: Arc::new(kernel),
            majorant: Arc::new(majorant),
            psi: Arc::new(psi),
            section: Arc::new(section),
            cosection: Arc::new(cosection),
            d1,
            h: None,
            linear: false,
            probe: Interval { lo: 0.0, hi: 1.0 },
        })
    }

    /// `K_n(s,t,u) = n·χ_[s, s+1/n](t)·u` on ℝ with Lebesgue measure.
    pub fn moving_average() -> Self {
        let chi = |n: usize, s: f64, t: f64| t >= s && t <= s + 1.0 / n as f64;
        let mut k = Self::new(
            "moving-average",
            MeasureSpace::lebesgue_real(),
            move |n, s, t, u| if chi(n, s, t) && u != 0.0 { n as f64 * u } else { 0.0 },
            move |n, s, t| if chi(n, s, t) { n as f64 } else { 0.0 },
            |_, u| u,
            |n, s| Interval {
                lo: s,
                hi: s + 1.0 / n as f64,
            },
            |n, t| Interval {
                lo: t - 1.0 / n as f64,
                hi: t,
            },
            1.0,
        )
        .expect("moving-average parameters are valid");
        k.linear = true;
        k
    }

    /// Declares `K_n(s,t,u) = L_n(s,t)·u`, which the reproduction audit
    /// exploits.
    pub fn linear(mut self) -> Self {
        self.linear = true;
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

    pub fn with_space(mut self, ms: MeasureSpace) -> Self {
        self.ms = ms;
        self
    }

    fn ball(&self, s: f64, delta: f64) -> Interval {
        let d = &self.ms.domain;
        let x = d.to_coord(s);
        Interval {
            lo: d.from_coord(x - delta),
            hi: d.from_coord(x + delta),
        }
    }

    fn mass_of(&self, g: LatticeFunction, set: &IntervalSet) -> Result<f64> {
        Ok(self.ms.quadrature(&g, set, KERNEL_TOL)?.value[0])
    }
}

/// `(T_n f)(s) = ∫_G K_n(s, t, f(t)) dμ(t)`. The majorant
/// `∫ L_n(s,t)·ψ_n(|f(t)|) dμ(t)` is integrated alongside; if either
/// diverges, `f` is outside the domain of `T_n`.
pub fn urysohn_apply(
    kf: &KernelFamily,
    f: &LatticeFunction,
    s: f64,
    n: usize,
) -> Result<LatticeElement> {
    if n < 1 {
        return Err(Error::Parameter("kernel index starts at n = 1".into()));
    }
    let dim = f.dim();
    let mut support = (kf.section)(n, s).intersect(&kf.ms.domain.carrier);
    if let Some(i) = &f.support {
        support = support.intersect(i);
    }
    if support.is_empty() {
        return Ok(LatticeElement::zeros(dim));
    }
    let mut breaks = f.breaks.clone();
    let sec = (kf.section)(n, s);
    breaks.extend([sec.lo, sec.hi]);
    let (family, inner) = (kf.clone(), f.clone());
    let g = LatticeFunction::new(2 * dim, move |t, out| {
        let (val, maj) = out.split_at_mut(dim);
        inner.eval_into(t, val);
        let l = (family.majorant)(n, s, t);
        for (v, m) in val.iter_mut().zip(maj.iter_mut()) {
            let u = *v;
            *m = if l == 0.0 { 0.0 } else { l * (family.psi)(n, u.abs()) };
            *v = (family.kernel)(n, s, t, u);
        }
    })
    .with_support(support)
    .with_breaks(&breaks);
    match kf.ms.quadrature(&g, &IntervalSet::single(support), KERNEL_TOL) {
        Ok(r) => LatticeElement::new(r.value[..dim].to_vec()),
        Err(Error::Divergent(msg)) => Err(Error::Domain(format!(
            "kernel integral at s = {s}, n = {n} diverges: {msg}"
        ))),
        Err(e) => Err(e),
    }
}

impl KernelOperator for KernelFamily {
    fn label(&self) -> String {
        self.label.clone()
    }

    fn space(&self) -> MeasureSpace {
        self.ms
    }

    fn d1(&self) -> f64 {
        self.d1
    }

    fn index_set(&self) -> Option<IndexSet> {
        self.h.clone()
    }

    fn kernel(&self, n: usize, s: f64, t: f64, u: f64) -> f64 {
        (self.kernel)(n, s, t, u)
    }

    fn majorant(&self, n: usize, s: f64, t: f64) -> f64 {
        (self.majorant)(n, s, t)
    }

    fn psi(&self, n: usize, u: f64) -> f64 {
        (self.psi)(n, u)
    }

    fn is_linear(&self) -> bool {
        self.linear
    }

    fn apply(&self, f: &LatticeFunction, s: f64, n: usize) -> Result<LatticeElement> {
        urysohn_apply(self, f, s, n)
    }

    fn section_mass(&self, n: usize, s: f64, outside: Option<f64>) -> Result<f64> {
        let sec = (self.section)(n, s);
        let m = self.majorant.clone();
        let g = LatticeFunction::scalar(move |t| m(n, s, t))
            .with_support(sec)
            .with_breaks(&[sec.lo, sec.hi]);
        let carrier = self.ms.domain.carrier;
        let set = match outside {
            None => IntervalSet::single(carrier),
            Some(d) if d > 0.0 => IntervalSet::single(self.ball(s, d)).complement_in(&carrier),
            Some(d) => return Err(Error::Parameter(format!("radius must be positive, got {d}"))),
        };
        self.mass_of(g, &set)
    }

    fn cosection_mass(&self, n: usize, t: f64, over: Option<&IntervalSet>) -> Result<f64> {
        let sec = (self.cosection)(n, t);
        let m = self.majorant.clone();
        let g = LatticeFunction::scalar(move |s| m(n, s, t))
            .with_support(sec)
            .with_breaks(&[sec.lo, sec.hi]);
        match over {
            Some(set) => self.mass_of(g, set),
            None => self.mass_of(g, &IntervalSet::single(self.ms.domain.carrier)),
        }
    }

    fn audit_points(&self) -> Vec<f64> {
        let d = &self.ms.domain;
        let (a, b) = d.coord_range(&self.probe);
        (0..=8).map(|k| d.from_coord(a + (b - a) * k as f64 / 8.0)).collect()
    }

    fn sample_window(&self) -> Interval {
        let d = &self.ms.domain;
        let (a, b) = d.coord_range(&self.probe);
        let w = (b - a).max(1.0);
        Interval {
            lo: d.from_coord(a - w),
            hi: d.from_coord(b + w),
        }
        .intersect(&d.carrier)
    }

    // Hull of the cosections at the ends of the support; exact for kernels
    // whose sections move monotonically with s.
    fn output_support(&self, n: usize, f: &Interval) -> Option<Interval> {
        let (a, b) = ((self.cosection)(n, f.lo), (self.cosection)(n, f.hi));
        Some(Interval {
            lo: a.lo.min(b.lo).min(f.lo),
            hi: a.hi.max(b.hi).max(f.hi),
        })
    }

    fn output_breaks(&self, n: usize, f: &LatticeFunction) -> Vec<f64> {
        f.breaks
            .iter()
            .flat_map(|&b| {
                let c = (self.cosection)(n, b);
                [c.lo, c.hi]
            })
            .filter(|x| x.is_finite())
            .collect()
    }
}
