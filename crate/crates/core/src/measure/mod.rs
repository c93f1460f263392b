//! σ-finite measures on intervals of ℝ and ℝ⁺, simple functions, and the
//! integral built from defining sequences.
//!
//! Every computation happens in the metric coordinate `x`: `x = t` for the
//! euclidean metric and `x = ln t` for the logarithmic one, where Haar
//! measure `dt/t` becomes Lebesgue measure `dx`.

mod audit;
mod defining;
mod function;

pub use audit::{
    converges_in_measure, equiabsolute_continuity_audit, vitali_audit, EacReport, InMeasureMode,
    InMeasureReport, Probe, VitaliReport,
};
pub use defining::{
    build_defining_sequence, default_deltas, integrate, integrate_with, product_integrability,
    DefiningSequence, IntegralResult, Partition, ProbeValue,
};
pub use function::{FunctionSequence, LatticeFunction, SimpleFunction};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeElement;
use crate::quadrature::{reference_integral, rule_integral, Integrand, QuadratureRule, RuleIntegral};

/// A closed interval `[lo, hi]` of the extended real line. Endpoints carry
/// no measure, so open and half-open variants are not distinguished.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::Domain(format!("bad interval [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.lo && t <= self.hi
    }

    pub fn intersect(&self, other: &Interval) -> Interval {
        let lo = self.lo.max(other.lo);
        Interval {
            lo,
            hi: self.hi.min(other.hi).max(lo),
        }
    }
}

/// Finite union of intervals, kept sorted and disjoint.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IntervalSet(Vec<Interval>);

impl IntervalSet {
    pub fn new(parts: impl IntoIterator<Item = Interval>) -> Self {
        let mut v: Vec<Interval> = parts.into_iter().filter(|i| !i.is_empty()).collect();
        v.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        let mut out: Vec<Interval> = Vec::with_capacity(v.len());
        for i in v {
            match out.last_mut() {
                Some(last) if i.lo <= last.hi => last.hi = last.hi.max(i.hi),
                _ => out.push(i),
            }
        }
        Self(out)
    }

    pub fn single(i: Interval) -> Self {
        Self::new([i])
    }

    pub fn parts(&self) -> &[Interval] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn intersect(&self, i: &Interval) -> IntervalSet {
        IntervalSet::new(self.0.iter().map(|p| p.intersect(i)))
    }

    /// Complement within `whole`.
    pub fn complement_in(&self, whole: &Interval) -> IntervalSet {
        let mut out = Vec::new();
        let mut cursor = whole.lo;
        for p in &self.0 {
            let p = p.intersect(whole);
            if p.is_empty() {
                continue;
            }
            if p.lo > cursor {
                out.push(Interval { lo: cursor, hi: p.lo });
            }
            cursor = cursor.max(p.hi);
        }
        if cursor < whole.hi {
            out.push(Interval { lo: cursor, hi: whole.hi });
        }
        IntervalSet::new(out)
    }

    pub fn hull(&self) -> Option<Interval> {
        Some(Interval {
            lo: self.0.first()?.lo,
            hi: self.0.last()?.hi,
        })
    }
}

impl From<Interval> for IntervalSet {
    fn from(i: Interval) -> Self {
        IntervalSet::single(i)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Euclidean,
    /// `d(t₁, t₂) = |ln t₁ − ln t₂|`, only on subsets of ℝ⁺.
    Log,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub carrier: Interval,
    pub metric: Metric,
}

impl Domain {
    pub fn new(carrier: Interval, metric: Metric) -> Result<Self> {
        if carrier.is_empty() {
            return Err(Error::Domain("empty carrier".into()));
        }
        if metric == Metric::Log && carrier.lo < 0.0 {
            return Err(Error::Domain("log metric needs a carrier inside ℝ⁺".into()));
        }
        Ok(Self { carrier, metric })
    }

    pub fn real() -> Self {
        Self {
            carrier: Interval {
                lo: f64::NEG_INFINITY,
                hi: f64::INFINITY,
            },
            metric: Metric::Euclidean,
        }
    }

    pub fn positive() -> Self {
        Self {
            carrier: Interval {
                lo: 0.0,
                hi: f64::INFINITY,
            },
            metric: Metric::Log,
        }
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(Interval::new(lo, hi)?, Metric::Euclidean)
    }

    pub fn to_coord(&self, t: f64) -> f64 {
        match self.metric {
            Metric::Euclidean => t,
            Metric::Log => t.ln(),
        }
    }

    pub fn from_coord(&self, x: f64) -> f64 {
        match self.metric {
            Metric::Euclidean => x,
            Metric::Log => x.exp(),
        }
    }

    pub fn distance(&self, a: f64, b: f64) -> f64 {
        (self.to_coord(a) - self.to_coord(b)).abs()
    }

    /// Diameter of an interval in the domain metric.
    pub fn diameter(&self, i: &Interval) -> f64 {
        (self.to_coord(i.hi) - self.to_coord(i.lo)).max(0.0)
    }

    /// Coordinate extent of `i ∩ carrier`.
    pub fn coord_range(&self, i: &Interval) -> (f64, f64) {
        let i = i.intersect(&self.carrier);
        (self.to_coord(i.lo), self.to_coord(i.hi))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Density {
    /// `w ≡ 1`.
    Lebesgue,
    /// `w(t) = 1/t` on ℝ⁺.
    Haar,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpace {
    pub domain: Domain,
    pub density: Density,
    pub rule: QuadratureRule,
}

impl MeasureSpace {
    pub fn new(domain: Domain, density: Density) -> Result<Self> {
        if density == Density::Haar && domain.carrier.lo < 0.0 {
            return Err(Error::Domain("Haar measure lives on ℝ⁺".into()));
        }
        Ok(Self {
            domain,
            density,
            rule: QuadratureRule::default(),
        })
    }

    /// Lebesgue measure on `[lo, hi]` with the euclidean metric.
    pub fn lebesgue(lo: f64, hi: f64) -> Result<Self> {
        Self::new(Domain::interval(lo, hi)?, Density::Lebesgue)
    }

    pub fn lebesgue_real() -> Self {
        Self {
            domain: Domain::real(),
            density: Density::Lebesgue,
            rule: QuadratureRule::default(),
        }
    }

    /// `dt/t` on ℝ⁺ with the logarithmic metric.
    pub fn haar() -> Self {
        Self {
            domain: Domain::positive(),
            density: Density::Haar,
            rule: QuadratureRule::default(),
        }
    }

    pub fn with_rule(mut self, rule: QuadratureRule) -> Self {
        self.rule = rule;
        self
    }

    /// Closed-form measure of `i ∩ carrier`.
    pub fn measure(&self, i: &Interval) -> f64 {
        let i = i.intersect(&self.domain.carrier);
        if i.is_empty() {
            return 0.0;
        }
        match self.density {
            Density::Lebesgue => i.hi - i.lo,
            Density::Haar => (i.hi / i.lo).ln(),
        }
    }

    pub fn measure_set(&self, s: &IntervalSet) -> f64 {
        s.parts().iter().map(|i| self.measure(i)).sum()
    }

    /// Density of μ with respect to `dx` in the metric coordinate.
    pub fn coord_weight(&self, x: f64) -> f64 {
        match (self.domain.metric, self.density) {
            (Metric::Euclidean, Density::Lebesgue) | (Metric::Log, Density::Haar) => 1.0,
            (Metric::Log, Density::Lebesgue) => x.exp(),
            (Metric::Euclidean, Density::Haar) => 1.0 / x,
        }
    }

    /// `B_m`: `[e^{-m}, e^m]` on ℝ⁺, `[-m, m]` on ℝ, clipped to the carrier.
    pub fn exhausting_set(&self, m: usize) -> Interval {
        let m = m as f64;
        let b = match self.domain.metric {
            Metric::Log => Interval {
                lo: (-m).exp(),
                hi: m.exp(),
            },
            Metric::Euclidean => Interval { lo: -m, hi: m },
        };
        b.intersect(&self.domain.carrier)
    }

    /// Smallest `m` with `i ⊆ B_m`, if any.
    pub fn covering_index(&self, i: &Interval) -> Option<usize> {
        let i = i.intersect(&self.domain.carrier);
        if i.is_empty() {
            return Some(0);
        }
        // B_m ∩ carrier = carrier ∩ {|x| ≤ m} in the metric coordinate
        let (a, b) = self.domain.coord_range(&i);
        let m = (-a).max(b).max(0.0);
        m.is_finite().then(|| m.ceil() as usize)
    }

    /// Outward reach of the exhausting shells in the metric coordinate.
    fn reach(&self) -> f64 {
        match self.domain.metric {
            Metric::Euclidean => 1048576.0,
            Metric::Log => 512.0,
        }
    }

    /// Midpoint grid of `cells` uniform cells over `i ∩ carrier` in the
    /// metric coordinate: `(t_mid, μ(cell))` pairs. Needs a bounded range.
    pub fn grid(&self, i: &Interval, cells: usize) -> Result<Vec<(f64, f64)>> {
        let (a, b) = self.domain.coord_range(i);
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::InfiniteMeasure(format!(
                "grid over unbounded range [{}, {}]",
                i.lo, i.hi
            )));
        }
        if b <= a {
            return Ok(Vec::new());
        }
        let h = (b - a) / cells as f64;
        Ok((0..cells)
            .map(|k| {
                let x0 = a + k as f64 * h;
                let x1 = if k + 1 == cells { b } else { x0 + h };
                let t0 = self.domain.from_coord(x0);
                let t1 = self.domain.from_coord(x1);
                let tm = self.domain.from_coord(0.5 * (x0 + x1));
                (tm, self.measure(&Interval { lo: t0, hi: t1 }))
            })
            .collect())
    }

    /// `∫_A f dμ` with the configured fixed rule, exhausting unbounded
    /// ranges by shells. Signed integrands are integrated directly here;
    /// [`integrate`] is the construction that splits `f⁺` and `f⁻`.
    pub fn quadrature(&self, f: &LatticeFunction, set: &IntervalSet, tol: f64) -> Result<RuleIntegral> {
        let dim = f.dim();
        let mut total = RuleIntegral {
            value: vec![0.0; dim],
            error: 0.0,
            last_shell: 0.0,
            shells: 0,
        };
        for part in set.parts() {
            let part = match &f.support {
                Some(s) => part.intersect(s),
                None => *part,
            };
            let (xa, xb) = self.domain.coord_range(&part);
            if !(xa < xb) {
                continue;
            }
            let breaks: Vec<f64> = f.breaks.iter().map(|&t| self.domain.to_coord(t)).collect();
            let g = CoordIntegrand { ms: self, f };
            let r = rule_integral(&self.rule, &g, xa, xb, &breaks, self.reach(), tol)?;
            for (a, b) in total.value.iter_mut().zip(&r.value) {
                *a += b;
            }
            total.error += r.error;
            total.last_shell = total.last_shell.max(r.last_shell);
            total.shells += r.shells;
        }
        Ok(total)
    }

    /// Independent adaptive reference for `∫_A f dμ`, entry by entry.
    pub fn quadrature_reference(
        &self,
        f: &LatticeFunction,
        set: &IntervalSet,
        tol: f64,
    ) -> Result<LatticeElement> {
        let dim = f.dim();
        let mut out = vec![0.0; dim];
        let mut buf = vec![0.0; dim];
        for part in set.parts() {
            let part = match &f.support {
                Some(s) => part.intersect(s),
                None => *part,
            };
            let (xa, xb) = self.domain.coord_range(&part);
            if !(xa < xb) {
                continue;
            }
            let breaks: Vec<f64> = f.breaks.iter().map(|&t| self.domain.to_coord(t)).collect();
            for (k, slot) in out.iter_mut().enumerate() {
                let mut h = |x: f64| {
                    let t = self.domain.from_coord(x);
                    f.eval_into(t, &mut buf);
                    let v = buf[k];
                    if v == 0.0 {
                        0.0
                    } else {
                        v * self.coord_weight(x)
                    }
                };
                *slot += reference_integral(&mut h, xa, xb, &breaks, self.reach(), tol)?;
            }
        }
        LatticeElement::new(out)
    }
}

struct CoordIntegrand<'a> {
    ms: &'a MeasureSpace,
    f: &'a LatticeFunction,
}

impl Integrand for CoordIntegrand<'_> {
    fn dim(&self) -> usize {
        self.f.dim()
    }

    fn eval(&self, x: f64, out: &mut [f64]) {
        let t = self.ms.domain.from_coord(x);
        self.f.eval_into(t, out);
        let w = self.ms.coord_weight(x);
        for v in out.iter_mut() {
            // 0·∞ = 0 at the edges of the coordinate range
            if *v != 0.0 {
                *v *= w;
            }
        }
    }
}

#[cfg(test)]
mod tests;
