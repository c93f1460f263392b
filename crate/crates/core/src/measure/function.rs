use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::lattice::LatticeElement;

use super::{Interval, IntervalSet, MeasureSpace};

type Eval = Arc<dyn Fn(f64, &mut [f64]) + Send + Sync>;

/// A lattice-valued function `G → ℝ^dim`, with optional knowledge of its
/// support and of points where it fails to be smooth.
#[derive(Clone)]
pub struct LatticeFunction {
    dim: usize,
    eval: Eval,
    /// Closed interval outside which the function vanishes.
    pub support: Option<Interval>,
    /// Kinks and jumps; quadrature splits here.
    pub breaks: Vec<f64>,
}

impl fmt::Debug for LatticeFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LatticeFunction")
            .field("dim", &self.dim)
            .field("support", &self.support)
            .field("breaks", &self.breaks)
            .finish_non_exhaustive()
    }
}

impl LatticeFunction {
    pub fn new(dim: usize, eval: impl Fn(f64, &mut [f64]) + Send + Sync + 'static) -> Self {
        Self {
            dim,
            eval: Arc::new(eval),
            support: None,
            breaks: Vec::new(),
        }
    }

    pub fn scalar(h: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(1, move |t, out| out[0] = h(t))
    }

    /// `g ↦ h(g)·v`.
    pub fn along(h: impl Fn(f64) -> f64 + Send + Sync + 'static, v: &LatticeElement) -> Self {
        let v = v.to_vec();
        Self::new(v.len(), move |t, out| {
            let s = h(t);
            for (o, c) in out.iter_mut().zip(&v) {
                *o = if s == 0.0 { 0.0 } else { s * c };
            }
        })
    }

    pub fn constant(c: &LatticeElement) -> Self {
        let c = c.to_vec();
        Self::new(c.len(), move |_, out| out.copy_from_slice(&c))
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(dim, |_, out| out.fill(0.0)).with_support(Interval { lo: 0.0, hi: 0.0 })
    }

    /// `c·χ_A` for an interval `A`.
    pub fn indicator(a: Interval, c: &LatticeElement) -> Self {
        let c = c.to_vec();
        Self::new(c.len(), move |t, out| {
            if a.contains(t) {
                out.copy_from_slice(&c)
            } else {
                out.fill(0.0)
            }
        })
        .with_support(a)
        .with_breaks(&[a.lo, a.hi])
    }

    /// Piecewise linear tent rising from `a` to the peak `height` at `m` and
    /// falling to zero at `b`.
    pub fn tent(a: f64, m: f64, b: f64, height: f64) -> Self {
        Self::scalar(move |t| {
            if t <= a || t >= b {
                0.0
            } else if t <= m {
                height * (t - a) / (m - a)
            } else {
                height * (b - t) / (b - m)
            }
        })
        .with_support(Interval { lo: a, hi: b })
        .with_breaks(&[a, m, b])
    }

    pub fn with_support(mut self, s: Interval) -> Self {
        self.support = Some(match self.support {
            Some(old) => old.intersect(&s),
            None => s,
        });
        self
    }

    pub fn with_breaks(mut self, b: &[f64]) -> Self {
        self.breaks.extend(b.iter().copied().filter(|t| t.is_finite()));
        self.breaks.sort_by(f64::total_cmp);
        self.breaks.dedup();
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        match &self.support {
            Some(s) if !s.contains(t) => out.fill(0.0),
            _ => (self.eval)(t, out),
        }
    }

    pub fn eval(&self, t: f64) -> Result<LatticeElement> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out);
        LatticeElement::new(out)
    }

    /// Pointwise `op(f(t))`, preserving support and breaks.
    pub fn map(&self, op: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        let inner = self.clone();
        let mut g = Self::new(self.dim, move |t, out| {
            inner.eval_into(t, out);
            for v in out.iter_mut() {
                *v = op(*v);
            }
        });
        g.support = self.support;
        g.breaks = self.breaks.clone();
        g
    }

    /// Caches evaluations by the exact bit pattern of `t`. Worth it when
    /// each evaluation is itself an integral and the same nodes recur.
    pub fn memoized(&self) -> Self {
        let inner = self.clone();
        let cache: Mutex<HashMap<u64, Vec<f64>>> = Mutex::new(HashMap::new());
        let mut g = Self::new(self.dim, move |t, out| {
            let key = t.to_bits();
            if let Some(v) = cache.lock().expect("cache lock").get(&key) {
                out.copy_from_slice(v);
                return;
            }
            inner.eval_into(t, out);
            cache.lock().expect("cache lock").insert(key, out.to_vec());
        });
        g.support = self.support;
        g.breaks = self.breaks.clone();
        g
    }

    pub fn abs(&self) -> Self {
        self.map(f64::abs)
    }

    pub fn positive_part(&self) -> Self {
        self.map(|v| v.max(0.0))
    }

    pub fn negative_part(&self) -> Self {
        self.map(|v| (-v).max(0.0))
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map(move |v| if v == 0.0 { 0.0 } else { a * v })
    }

    /// Pointwise `op(f(t), g(t))`; a scalar operand broadcasts.
    pub fn zip_with(
        &self,
        other: &LatticeFunction,
        op: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        support: Option<Interval>,
    ) -> Result<Self> {
        let dim = match (self.dim, other.dim) {
            (a, b) if a == b => a,
            (1, b) => b,
            (a, 1) => a,
            (a, b) => return Err(Error::DimensionMismatch { left: a, right: b }),
        };
        let (f, g) = (self.clone(), other.clone());
        let (fd, gd) = (self.dim, other.dim);
        let mut h = Self::new(dim, move |t, out| {
            let mut a = vec![0.0; fd];
            let mut b = vec![0.0; gd];
            f.eval_into(t, &mut a);
            g.eval_into(t, &mut b);
            for (k, o) in out.iter_mut().enumerate() {
                *o = op(a[if fd == 1 { 0 } else { k }], b[if gd == 1 { 0 } else { k }]);
            }
        });
        h.support = support;
        h.breaks = self.breaks.iter().chain(&other.breaks).copied().collect();
        h.breaks.sort_by(f64::total_cmp);
        h.breaks.dedup();
        Ok(h)
    }

    pub fn add(&self, other: &LatticeFunction) -> Result<Self> {
        let s = hull(self.support, other.support);
        self.zip_with(other, |a, b| a + b, s)
    }

    pub fn sub(&self, other: &LatticeFunction) -> Result<Self> {
        let s = hull(self.support, other.support);
        self.zip_with(other, |a, b| a - b, s)
    }

    /// Componentwise product, the product triple used throughout.
    pub fn mul(&self, other: &LatticeFunction) -> Result<Self> {
        let s = match (self.support, other.support) {
            (Some(a), Some(b)) => Some(a.intersect(&b)),
            (a, b) => a.or(b),
        };
        self.zip_with(other, |a, b| if a == 0.0 || b == 0.0 { 0.0 } else { a * b }, s)
    }

    pub fn join(&self, other: &LatticeFunction) -> Result<Self> {
        let s = hull(self.support, other.support);
        self.zip_with(other, f64::max, s)
    }

    pub fn meet(&self, other: &LatticeFunction) -> Result<Self> {
        let s = hull(self.support, other.support);
        self.zip_with(other, f64::min, s)
    }
}

fn hull(a: Option<Interval>, b: Option<Interval>) -> Option<Interval> {
    match (a, b) {
        (Some(a), Some(b)) => Some(Interval {
            lo: a.lo.min(b.lo),
            hi: a.hi.max(b.hi),
        }),
        _ => None,
    }
}

/// `Σ_j c_j χ_{A_j}` with intervals `A_j` of finite measure. Cells are
/// read as half-open `[lo, hi)` when evaluating pointwise.
#[derive(Clone, Debug, PartialEq)]
pub struct SimpleFunction {
    dim: usize,
    cells: Vec<(Interval, LatticeElement)>,
}

impl SimpleFunction {
    pub fn new(dim: usize, cells: Vec<(Interval, LatticeElement)>) -> Result<Self> {
        for (a, c) in &cells {
            if c.dim() != dim {
                return Err(Error::DimensionMismatch {
                    left: dim,
                    right: c.dim(),
                });
            }
            if !c.is_finite() {
                return Err(Error::InvalidValue(format!(
                    "infinite coefficient on [{}, {}]",
                    a.lo, a.hi
                )));
            }
        }
        Ok(Self { dim, cells })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells(&self) -> &[(Interval, LatticeElement)] {
        &self.cells
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (a, c) in &self.cells {
            if t >= a.lo && t < a.hi {
                for (o, v) in out.iter_mut().zip(c.values()) {
                    *o += v;
                }
            }
        }
        out
    }

    /// `Σ_j c_j μ(A ∩ A_j)`; a nonzero coefficient on a set of infinite
    /// measure is an error, a zero one contributes nothing.
    pub fn integrate(&self, set: &IntervalSet, ms: &MeasureSpace) -> Result<LatticeElement> {
        let mut out = vec![0.0; self.dim];
        for (a, c) in &self.cells {
            if c.is_zero() {
                continue;
            }
            let m: f64 = set.parts().iter().map(|p| ms.measure(&p.intersect(a))).sum();
            if m == 0.0 {
                continue;
            }
            if !m.is_finite() {
                return Err(Error::InfiniteMeasure(format!(
                    "cell [{}, {}] meets the set in infinite measure",
                    a.lo, a.hi
                )));
            }
            for (o, v) in out.iter_mut().zip(c.values()) {
                *o += v * m;
            }
        }
        LatticeElement::new(out)
    }

    /// Same function, every cell split at its metric midpoint.
    pub fn refine(&self, ms: &MeasureSpace) -> Self {
        let d = &ms.domain;
        let cells = self
            .cells
            .iter()
            .flat_map(|(a, c)| {
                let (x0, x1) = (d.to_coord(a.lo), d.to_coord(a.hi));
                let mid = if x0.is_finite() && x1.is_finite() {
                    d.from_coord(0.5 * (x0 + x1))
                } else {
                    0.5 * (a.lo + a.hi)
                };
                if mid.is_finite() && mid > a.lo && mid < a.hi {
                    vec![
                        (Interval { lo: a.lo, hi: mid }, c.clone()),
                        (Interval { lo: mid, hi: a.hi }, c.clone()),
                    ]
                } else {
                    vec![(*a, c.clone())]
                }
            })
            .collect();
        Self { dim: self.dim, cells }
    }

    pub fn to_function(&self) -> LatticeFunction {
        let me = self.clone();
        let lo = self.cells.iter().map(|(a, _)| a.lo).fold(f64::INFINITY, f64::min);
        let hi = self.cells.iter().map(|(a, _)| a.hi).fold(f64::NEG_INFINITY, f64::max);
        let breaks: Vec<f64> = self.cells.iter().flat_map(|(a, _)| [a.lo, a.hi]).collect();
        let f = LatticeFunction::new(self.dim, move |t, out| out.copy_from_slice(&me.eval(t)));
        let f = if lo <= hi { f.with_support(Interval { lo, hi }) } else { f };
        f.with_breaks(&breaks)
    }
}

/// `n ↦ f_n` for `n = 1..=horizon`.
#[derive(Clone)]
pub struct FunctionSequence {
    pub horizon: usize,
    gen: Arc<dyn Fn(usize) -> LatticeFunction + Send + Sync>,
}

impl fmt::Debug for FunctionSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FunctionSequence")
            .field("horizon", &self.horizon)
            .finish_non_exhaustive()
    }
}

impl FunctionSequence {
    pub fn new(horizon: usize, gen: impl Fn(usize) -> LatticeFunction + Send + Sync + 'static) -> Self {
        Self {
            horizon,
            gen: Arc::new(gen),
        }
    }

    pub fn constant(horizon: usize, f: LatticeFunction) -> Self {
        Self::new(horizon, move |_| f.clone())
    }

    pub fn term(&self, n: usize) -> LatticeFunction {
        (self.gen)(n)
    }

    pub fn dim(&self) -> usize {
        self.term(1).dim()
    }

    /// `n ↦ op(f_n, g_n)`.
    pub fn zip(
        &self,
        other: &FunctionSequence,
        op: impl Fn(&LatticeFunction, &LatticeFunction) -> LatticeFunction + Send + Sync + 'static,
    ) -> Self {
        let (a, b) = (self.clone(), other.clone());
        Self::new(self.horizon.min(other.horizon), move |n| op(&a.term(n), &b.term(n)))
    }

    pub fn map(&self, op: impl Fn(&LatticeFunction) -> LatticeFunction + Send + Sync + 'static) -> Self {
        let a = self.clone();
        Self::new(self.horizon, move |n| op(&a.term(n)))
    }
}
