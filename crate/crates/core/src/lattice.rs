//! Concrete Dedekind-complete vector lattices realized as grid functions.
//!
//! An element is a finite table of extended reals indexed by a sample set
//! `T`; a single entry realizes `ℝ`. Order, suprema and infima are taken
//! componentwise, which for `ℝ^T` coincides with the lattice operations.
//! The extra element `+∞` is tracked by a per-entry flag rather than by a
//! floating sentinel, and `0·(+∞) = 0`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A member of `ℝ^T ∪ {+∞}` with componentwise order.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeElement {
    // Entries flagged infinite hold 0.0 so that derived equality is exact.
    values: Vec<f64>,
    infinite: Vec<bool>,
}

impl fmt::Debug for LatticeElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut list = f.debug_list();
        for i in 0..self.dim() {
            if self.infinite[i] {
                list.entry(&f64::INFINITY);
            } else {
                list.entry(&self.values[i]);
            }
        }
        list.finish()
    }
}

impl LatticeElement {
    /// Builds an element from raw values. `f64::INFINITY` entries become
    /// `+∞` flags; NaN and `-∞` are rejected.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let mut infinite = vec![false; values.len()];
        let mut values = values;
        for (i, v) in values.iter_mut().enumerate() {
            if v.is_nan() {
                return Err(Error::InvalidValue(format!("NaN at entry {i}")));
            }
            if *v == f64::NEG_INFINITY {
                return Err(Error::InvalidValue(format!("-inf at entry {i}")));
            }
            if *v == f64::INFINITY {
                infinite[i] = true;
                *v = 0.0;
            }
        }
        Ok(Self { values, infinite })
    }

    /// Builds a finite element.
    ///
    /// # Panics
    /// If any value is not finite.
    pub fn from_slice(values: &[f64]) -> Self {
        assert!(
            values.iter().all(|v| v.is_finite()),
            "from_slice requires finite values"
        );
        Self {
            values: values.to_vec(),
            infinite: vec![false; values.len()],
        }
    }

    pub(crate) fn from_finite_vec(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()));
        let n = values.len();
        Self {
            values,
            infinite: vec![false; n],
        }
    }

    pub fn scalar(x: f64) -> Self {
        Self::from_slice(&[x])
    }

    pub fn zeros(dim: usize) -> Self {
        Self::constant(dim, 0.0)
    }

    pub fn ones(dim: usize) -> Self {
        Self::constant(dim, 1.0)
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        assert!(c.is_finite());
        Self {
            values: vec![c; dim],
            infinite: vec![false; dim],
        }
    }

    /// The element with every entry equal to `+∞`.
    pub fn infinity(dim: usize) -> Self {
        Self {
            values: vec![0.0; dim],
            infinite: vec![true; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Entry `i`, or `None` when it is `+∞`.
    pub fn get(&self, i: usize) -> Option<f64> {
        if self.infinite[i] {
            None
        } else {
            Some(self.values[i])
        }
    }

    /// Entry `i` as an `f64`, mapping `+∞` to `f64::INFINITY`.
    pub fn get_extended(&self, i: usize) -> f64 {
        if self.infinite[i] {
            f64::INFINITY
        } else {
            self.values[i]
        }
    }

    /// Finite parts of the entries; entries flagged infinite read as 0.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn infinite_flags(&self) -> &[bool] {
        &self.infinite
    }

    pub fn is_finite(&self) -> bool {
        !self.infinite.iter().any(|&b| b)
    }

    pub fn first_infinite(&self) -> Option<usize> {
        self.infinite.iter().position(|&b| b)
    }

    pub fn is_zero(&self) -> bool {
        self.is_finite() && self.values.iter().all(|&v| v == 0.0)
    }

    pub fn to_vec(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get_extended(i)).collect()
    }

    pub fn map_finite(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut out = self.clone();
        for i in 0..out.dim() {
            if !out.infinite[i] {
                out.values[i] = f(out.values[i]);
            }
        }
        out
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim() == other.dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            })
        }
    }

    /// Entrywise maximum.
    pub fn join(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        let mut out = self.clone();
        for i in 0..self.dim() {
            if other.infinite[i] || self.infinite[i] {
                out.infinite[i] = true;
                out.values[i] = 0.0;
            } else {
                out.values[i] = self.values[i].max(other.values[i]);
            }
        }
        Ok(out)
    }

    /// Entrywise minimum.
    pub fn meet(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        let mut out = self.clone();
        for i in 0..self.dim() {
            match (self.infinite[i], other.infinite[i]) {
                (true, true) => {}
                (true, false) => {
                    out.infinite[i] = false;
                    out.values[i] = other.values[i];
                }
                (false, true) => {}
                (false, false) => out.values[i] = self.values[i].min(other.values[i]),
            }
        }
        Ok(out)
    }

    /// `|x| = x ∨ (−x)`; `|+∞| = +∞`.
    pub fn abs(&self) -> Self {
        let mut out = self.clone();
        for v in out.values.iter_mut() {
            *v = v.abs();
        }
        out
    }

    /// Positive part `x ∨ 0`.
    pub fn positive_part(&self) -> Self {
        self.join(&Self::zeros(self.dim())).expect("same dimension")
    }

    /// Negative part `(−x) ∨ 0`; undefined when `x` has a `+∞` entry.
    pub fn negative_part(&self) -> Result<Self> {
        Ok(self.checked_neg()?.positive_part())
    }

    pub fn checked_neg(&self) -> Result<Self> {
        if !self.is_finite() {
            return Err(Error::UndefinedInfinity("negation of +inf"));
        }
        Ok(Self::from_finite_vec(self.values.iter().map(|v| -v).collect()))
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        let mut out = self.clone();
        for i in 0..self.dim() {
            if self.infinite[i] || other.infinite[i] {
                out.infinite[i] = true;
                out.values[i] = 0.0;
            } else {
                out.values[i] = self.values[i] + other.values[i];
            }
        }
        Ok(out)
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        if !other.is_finite() {
            return Err(Error::UndefinedInfinity("subtraction of +inf"));
        }
        let mut out = self.clone();
        for i in 0..self.dim() {
            if !self.infinite[i] {
                out.values[i] = self.values[i] - other.values[i];
            }
        }
        Ok(out)
    }

    /// Scalar multiple with `0·(+∞) = 0`.
    pub fn checked_scale(&self, c: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(Error::InvalidValue(format!("scale factor {c}")));
        }
        let mut out = self.clone();
        for i in 0..self.dim() {
            if self.infinite[i] {
                if c == 0.0 {
                    out.infinite[i] = false;
                    out.values[i] = 0.0;
                } else if c < 0.0 {
                    return Err(Error::UndefinedInfinity("negative multiple of +inf"));
                }
            } else {
                out.values[i] = c * self.values[i];
            }
        }
        Ok(out)
    }

    /// Componentwise product (the product triple of grid lattices), with
    /// `0·(+∞) = 0`.
    pub fn checked_mul(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        let mut out = self.clone();
        for i in 0..self.dim() {
            match (self.infinite[i], other.infinite[i]) {
                (false, false) => out.values[i] = self.values[i] * other.values[i],
                (true, true) => {}
                (true, false) | (false, true) => {
                    let finite = if self.infinite[i] {
                        other.values[i]
                    } else {
                        self.values[i]
                    };
                    if finite == 0.0 {
                        out.infinite[i] = false;
                        out.values[i] = 0.0;
                    } else if finite > 0.0 {
                        out.infinite[i] = true;
                        out.values[i] = 0.0;
                    } else {
                        return Err(Error::UndefinedInfinity("negative multiple of +inf"));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Componentwise order `self ≤ other`.
    ///
    /// # Panics
    /// On dimension mismatch.
    pub fn le(&self, other: &Self) -> bool {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        (0..self.dim()).all(|i| {
            other.infinite[i] || (!self.infinite[i] && self.values[i] <= other.values[i])
        })
    }

    pub fn ge(&self, other: &Self) -> bool {
        other.le(self)
    }

    pub fn is_positive(&self) -> bool {
        (0..self.dim()).all(|i| self.infinite[i] || self.values[i] >= 0.0)
    }

    /// `max_i |x_i|`, or `+∞` when an entry is infinite; the order-unit
    /// norm for the all-ones unit.
    pub fn sup_norm(&self) -> f64 {
        if !self.is_finite() {
            return f64::INFINITY;
        }
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Entrywise maximum of finite entries (`+∞` if any is infinite).
    pub fn max_entry(&self) -> f64 {
        if !self.is_finite() {
            return f64::INFINITY;
        }
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl Add for &LatticeElement {
    type Output = LatticeElement;
    fn add(self, rhs: &LatticeElement) -> LatticeElement {
        self.checked_add(rhs).expect("lattice addition")
    }
}

impl Sub for &LatticeElement {
    type Output = LatticeElement;
    fn sub(self, rhs: &LatticeElement) -> LatticeElement {
        self.checked_sub(rhs).expect("lattice subtraction")
    }
}

impl Neg for &LatticeElement {
    type Output = LatticeElement;
    fn neg(self) -> LatticeElement {
        self.checked_neg().expect("lattice negation")
    }
}

impl Mul<f64> for &LatticeElement {
    type Output = LatticeElement;
    fn mul(self, c: f64) -> LatticeElement {
        self.checked_scale(c).expect("lattice scaling")
    }
}

/// A strong order unit: strictly positive and finite in every entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderUnit(LatticeElement);

impl OrderUnit {
    pub fn new(e: LatticeElement) -> Result<Self> {
        if !e.is_finite() {
            return Err(Error::InvalidOrderUnit("infinite entry".into()));
        }
        if let Some(i) = e.values().iter().position(|&v| v <= 0.0) {
            return Err(Error::InvalidOrderUnit(format!(
                "entry {i} is not strictly positive"
            )));
        }
        Ok(Self(e))
    }

    pub fn ones(dim: usize) -> Self {
        Self(LatticeElement::ones(dim))
    }

    pub fn element(&self) -> &LatticeElement {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }
}

/// `‖x‖_e = inf{ε > 0 : |x| ≤ ε·e} = max_i |x_i| / e_i`.
pub fn order_unit_norm(x: &LatticeElement, e: &OrderUnit) -> Result<f64> {
    if x.dim() != e.dim() {
        return Err(Error::DimensionMismatch {
            left: x.dim(),
            right: e.dim(),
        });
    }
    if let Some(index) = x.first_infinite() {
        return Err(Error::InfiniteNorm { index });
    }
    Ok(x
        .values()
        .iter()
        .zip(e.element().values())
        .fold(0.0, |m, (v, u)| m.max(v.abs() / u)))
}

type TermFn = Arc<dyn Fn(usize) -> LatticeElement + Send + Sync>;

/// A candidate `(o)`-sequence `(σ_l)_l`, indexed from `l = 1`.
#[derive(Clone)]
pub struct OSequence {
    terms: TermFn,
    horizon: usize,
}

impl fmt::Debug for OSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OSequence")
            .field("horizon", &self.horizon)
            .finish_non_exhaustive()
    }
}

/// Outcome of [`OSequence::is_o_sequence`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OSequenceVerdict {
    pub holds: bool,
    /// First index `l` at which the check failed.
    pub violation: Option<usize>,
    pub reason: Option<String>,
}

impl OSequence {
    pub fn new(
        horizon: usize,
        terms: impl Fn(usize) -> LatticeElement + Send + Sync + 'static,
    ) -> Self {
        Self {
            terms: Arc::new(terms),
            horizon,
        }
    }

    /// `σ_l = (1/l)·u`.
    pub fn harmonic(u: LatticeElement, horizon: usize) -> Self {
        Self::new(horizon, move |l| &u * (1.0 / l as f64))
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn term(&self, l: usize) -> LatticeElement {
        (self.terms)(l)
    }

    /// Checks positivity and monotone decrease on `1..=horizon`, and that
    /// the last term is below `tol` in every entry.
    pub fn is_o_sequence(&self, tol: f64) -> OSequenceVerdict {
        let fail = |l: usize, reason: &str| OSequenceVerdict {
            holds: false,
            violation: Some(l),
            reason: Some(reason.to_string()),
        };
        if self.horizon < 2 {
            return fail(self.horizon, "horizon must be at least 2");
        }
        let mut prev = self.term(1);
        if !prev.is_finite() || !prev.is_positive() {
            return fail(1, "term is not a finite positive element");
        }
        for l in 2..=self.horizon {
            let cur = self.term(l);
            if cur.dim() != prev.dim() || !cur.is_finite() || !cur.is_positive() {
                return fail(l, "term is not a finite positive element");
            }
            if !cur.le(&prev) {
                return fail(l, "sequence increases");
            }
            prev = cur;
        }
        if prev.values().iter().any(|&v| v > tol) {
            return fail(self.horizon, "final term exceeds tolerance");
        }
        OSequenceVerdict {
            holds: true,
            violation: None,
            reason: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn el(v: &[f64]) -> LatticeElement {
        LatticeElement::from_slice(v)
    }

    #[test]
    fn join_meet_abs() {
        assert_eq!(el(&[1.0, -2.0]).join(&el(&[0.0, 3.0])).unwrap(), el(&[1.0, 3.0]));
        assert_eq!(el(&[1.0, -2.0]).meet(&el(&[0.0, 3.0])).unwrap(), el(&[0.0, -2.0]));
        assert_eq!(el(&[-1.0, 2.0]).abs(), el(&[1.0, 2.0]));
        let err = el(&[1.0]).join(&el(&[1.0, 2.0])).unwrap_err();
        assert_eq!(err, Error::DimensionMismatch { left: 1, right: 2 });
    }

    #[test]
    fn zero_times_infinity_is_zero() {
        let x = LatticeElement::new(vec![f64::INFINITY, 2.0]).unwrap();
        assert_eq!(x.checked_scale(0.0).unwrap(), LatticeElement::zeros(2));
        let y = x.checked_mul(&el(&[0.0, 3.0])).unwrap();
        assert_eq!(y, el(&[0.0, 6.0]));
        assert!(x.checked_scale(-1.0).is_err());
        assert!(x.checked_neg().is_err());
        assert_eq!(x.abs(), x);
    }

    #[test]
    fn infinity_order() {
        let inf = LatticeElement::infinity(2);
        let x = el(&[5.0, -1.0]);
        assert!(x.le(&inf));
        assert!(!inf.le(&x));
        assert_eq!(x.join(&inf).unwrap(), inf);
        assert_eq!(x.meet(&inf).unwrap(), x);
        assert!(LatticeElement::new(vec![f64::NAN]).is_err());
        assert!(LatticeElement::new(vec![f64::NEG_INFINITY]).is_err());
    }

    #[test]
    fn norm_examples() {
        let e = OrderUnit::ones(2);
        assert_eq!(order_unit_norm(&el(&[0.5, -2.0]), &e).unwrap(), 2.0);
        assert_eq!(order_unit_norm(&LatticeElement::zeros(2), &e).unwrap(), 0.0);
        let e = OrderUnit::new(el(&[0.5, 4.0])).unwrap();
        let ae = e.element() * -3.0;
        assert_eq!(order_unit_norm(&ae, &e).unwrap(), 3.0);
        let x = LatticeElement::new(vec![1.0, f64::INFINITY]).unwrap();
        assert_eq!(
            order_unit_norm(&x, &OrderUnit::ones(2)).unwrap_err(),
            Error::InfiniteNorm { index: 1 }
        );
        assert!(OrderUnit::new(el(&[1.0, 0.0])).is_err());
    }

    #[test]
    fn o_sequence_examples() {
        let u = el(&[1.0, 2.0]);
        let harmonic = OSequence::harmonic(u.clone() * 0.5, 10_000);
        assert!(harmonic.is_o_sequence(1e-3).holds);

        let constant = {
            let u = u.clone();
            OSequence::new(100, move |_| u.clone())
        };
        let v = constant.is_o_sequence(1e-3);
        assert!(!v.holds);
        assert_eq!(v.violation, Some(100));

        let alternating = {
            let u = u.clone();
            OSequence::new(100, move |l| {
                &u * ((2.0 + if l % 2 == 0 { 1.0 } else { -1.0 }) / l as f64)
            })
        };
        let v = alternating.is_o_sequence(1e-3);
        assert!(!v.holds);
        assert_eq!(v.violation, Some(2));
    }

    impl std::ops::Mul<f64> for LatticeElement {
        type Output = LatticeElement;
        fn mul(self, c: f64) -> LatticeElement {
            &self * c
        }
    }

    fn element(dim: usize) -> impl Strategy<Value = LatticeElement> {
        proptest::collection::vec(-1e3..1e3f64, dim).prop_map(LatticeElement::from_finite_vec)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn join_idempotent(x in element(4)) {
            prop_assert_eq!(x.join(&x).unwrap(), x);
        }

        #[test]
        fn birkhoff_inequality((x, y, z) in (element(3), element(3), element(3))) {
            let lhs = (&x.join(&z).unwrap() - &y.join(&z).unwrap()).abs();
            let rhs = (&x - &y).abs();
            prop_assert!(lhs.le(&rhs));
        }

        #[test]
        fn norm_monotone((x, y) in (element(3), element(3))) {
            let e = OrderUnit::new(LatticeElement::from_slice(&[1.0, 0.5, 2.0])).unwrap();
            if x.abs().le(&y.abs()) {
                prop_assert!(order_unit_norm(&x, &e).unwrap() <= order_unit_norm(&y, &e).unwrap());
            }
            let small = x.abs().meet(&y.abs()).unwrap();
            prop_assert!(order_unit_norm(&small, &e).unwrap() <= order_unit_norm(&y, &e).unwrap());
        }

        #[test]
        fn norm_double_implication(x in element(3), alpha in 0.0..2e3f64) {
            let e = OrderUnit::new(LatticeElement::from_slice(&[1.0, 0.25, 3.0])).unwrap();
            let norm = order_unit_norm(&x, &e).unwrap();
            let dominated = x.abs().le(&(e.element() * alpha));
            prop_assert_eq!(dominated, norm <= alpha);
            // |x| ≤ ‖x‖_e · e
            let bound = e.element() * norm;
            for i in 0..3 {
                prop_assert!(x.abs().values()[i] <= bound.values()[i] * (1.0 + 1e-15));
            }
        }
    }
}
