use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{LatticeElement, OrderUnit};

use super::filter::{tail_start, upper_quantile, FilterSpec};
use super::{LatticeSequence, SequenceTable, Verdict};

/// The limit-superior companions `ℓ̄` supported here.
#[derive(Clone, Debug)]
pub enum LimsupKind {
    /// `∧_m ∨_{n≥m} x_n`, realized as the maximum over the evaluated tail.
    Order,
    /// `inf_{F∈𝓕} sup_{n∈F} x_n`, entrywise.
    Filter(FilterSpec),
    /// `(𝓕) limsup ‖x_n‖_e`, returned as a multiple of `e`.
    NormFilter { filter: FilterSpec, unit: OrderUnit },
    /// Order limsup of the prefix averages.
    Cesaro,
    /// Largest window average over offsets `m ≤ M`, window `N − M`.
    Almost { offsets: Option<usize> },
}

/// A realization of `ℓ̄ : 𝒯⁺ → X̄⁺` at a finite horizon.
#[derive(Clone, Debug)]
pub struct LimsupOperator {
    pub kind: LimsupKind,
    pub tail_fraction: f64,
    pub horizon: Option<usize>,
}

/// Value of `ℓ̄` together with any caveat about finite-horizon bias.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LimsupEstimate {
    pub value: LatticeElement,
    pub caveat: Option<String>,
}

impl LimsupOperator {
    pub fn new(kind: LimsupKind) -> Self {
        Self {
            kind,
            tail_fraction: 0.5,
            horizon: None,
        }
    }

    pub fn order() -> Self {
        Self::new(LimsupKind::Order)
    }

    pub fn density(eta: f64) -> Self {
        Self::new(LimsupKind::Filter(FilterSpec::density(eta)))
    }

    pub fn label(&self) -> String {
        match &self.kind {
            LimsupKind::Order => "order-limsup".into(),
            LimsupKind::Filter(f) => match f {
                FilterSpec::Cofinite => "filter-limsup(cofinite)".into(),
                FilterSpec::Density { theta } => format!("filter-limsup(density {theta})"),
                FilterSpec::Explicit { .. } => "filter-limsup(explicit)".into(),
            },
            LimsupKind::NormFilter { .. } => "norm-filter-limsup".into(),
            LimsupKind::Cesaro => "cesaro-limsup".into(),
            LimsupKind::Almost { .. } => "almost-limsup".into(),
        }
    }

    pub fn apply(&self, seq: &LatticeSequence) -> Result<LimsupEstimate> {
        let t = seq.table()?;
        self.apply_table(&t)
    }

    pub fn apply_table(&self, t: &SequenceTable) -> Result<LimsupEstimate> {
        let t = match self.horizon {
            Some(n) => t.truncate(n),
            None => t.clone(),
        };
        if t.is_empty() {
            return Err(Error::Precondition("empty sequence".into()));
        }
        match &self.kind {
            LimsupKind::Order => Ok(order_limsup_table(&t, self.tail_fraction)),
            LimsupKind::Filter(FilterSpec::Cofinite) => Ok(order_limsup_table(&t, self.tail_fraction)),
            LimsupKind::Filter(f) => Ok(LimsupEstimate {
                value: filter_limsup_table(&t, f)?,
                caveat: None,
            }),
            LimsupKind::NormFilter { filter, unit } => {
                if unit.dim() != t.dim() {
                    return Err(Error::DimensionMismatch {
                        left: t.dim(),
                        right: unit.dim(),
                    });
                }
                let e = unit.element().values();
                let norms: Vec<f64> = t
                    .rows()
                    .map(|r| r.iter().zip(e).fold(0.0f64, |m, (x, u)| m.max(x.abs() / u)))
                    .collect();
                let scalar = SequenceTable::from_rows(1, norms)?;
                let r = match filter {
                    FilterSpec::Cofinite => {
                        order_limsup_table(&scalar, self.tail_fraction).value.get_extended(0)
                    }
                    f => filter_limsup_table(&scalar, f)?.get_extended(0),
                };
                let value = if r.is_infinite() {
                    LatticeElement::infinity(t.dim())
                } else {
                    unit.element().checked_scale(r)?
                };
                Ok(LimsupEstimate {
                    value,
                    caveat: None,
                })
            }
            LimsupKind::Cesaro => {
                let means = prefix_means_extended(&t);
                Ok(order_limsup_table(&means, self.tail_fraction))
            }
            LimsupKind::Almost { offsets } => Ok(LimsupEstimate {
                value: almost_upper(&t, *offsets),
                caveat: None,
            }),
        }
    }
}

/// Prefix means where an infinite entry makes every later mean infinite.
fn prefix_means_extended(t: &SequenceTable) -> SequenceTable {
    let dim = t.dim();
    let mut sums = vec![0.0; dim];
    let mut data = Vec::with_capacity(t.len() * dim);
    for (k, row) in t.rows().enumerate() {
        for (s, v) in sums.iter_mut().zip(row) {
            *s += v;
        }
        data.extend(sums.iter().map(|s| s / (k + 1) as f64));
    }
    SequenceTable::from_rows(dim, data).expect("means of a valid table")
}

fn almost_upper(t: &SequenceTable, offsets: Option<usize>) -> LatticeElement {
    let len = t.len();
    let m = offsets.unwrap_or(len / 10).min(len.saturating_sub(1));
    let w = len - m;
    let dim = t.dim();
    let mut best = vec![f64::NEG_INFINITY; dim];
    let mut window = vec![0.0; dim];
    for n in 1..=w {
        for (s, v) in window.iter_mut().zip(t.row(n)) {
            *s += v;
        }
    }
    for off in 0..=m {
        if off > 0 {
            let (out, inn) = (t.row(off), t.row(off + w));
            for i in 0..dim {
                window[i] = if window[i].is_infinite() || inn[i].is_infinite() {
                    f64::INFINITY
                } else {
                    window[i] - out[i] + inn[i]
                };
            }
        }
        for i in 0..dim {
            best[i] = best[i].max(window[i] / w as f64);
        }
    }
    LatticeElement::new(best).expect("finite or +inf window averages")
}

pub(crate) fn order_limsup_table(t: &SequenceTable, tail_fraction: f64) -> LimsupEstimate {
    let start = tail_start(t.len(), tail_fraction);
    let dim = t.dim();
    let mut top = vec![f64::NEG_INFINITY; dim];
    for n in start + 1..=t.len() {
        for (m, v) in top.iter_mut().zip(t.row(n)) {
            *m = m.max(*v);
        }
    }
    let caveat = (!tail_is_monotone(t, start)).then(|| {
        format!(
            "tail not monotone; value is the maximum over terms {}..={}",
            start + 1,
            t.len()
        )
    });
    LimsupEstimate {
        value: LatticeElement::new(top).expect("table entries are valid"),
        caveat,
    }
}

fn tail_is_monotone(t: &SequenceTable, start: usize) -> bool {
    let dim = t.dim();
    (0..dim).all(|i| {
        let col = (start + 1..=t.len()).map(|n| t.row(n)[i]);
        let v: Vec<f64> = col.collect();
        v.windows(2).all(|w| w[1] <= w[0]) || v.windows(2).all(|w| w[1] >= w[0])
    })
}

pub(crate) fn filter_limsup_table(t: &SequenceTable, filter: &FilterSpec) -> Result<LatticeElement> {
    filter.validate()?;
    let dim = t.dim();
    let mut out = vec![0.0; dim];
    match filter {
        FilterSpec::Cofinite => return Ok(order_limsup_table(t, 0.5).value),
        // Cofinite sets have density one, so the quantile is taken over the
        // late half only; early terms would otherwise dominate it.
        FilterSpec::Density { theta } => {
            let start = tail_start(t.len(), 0.5);
            let mut col = vec![0.0; t.len() - start];
            for (i, o) in out.iter_mut().enumerate() {
                for (k, c) in col.iter_mut().enumerate() {
                    *c = t.row(start + k + 1)[i];
                }
                *o = upper_quantile(&mut col, *theta);
            }
        }
        FilterSpec::Explicit { sets } => {
            let n = t.len();
            let mut best = vec![f64::INFINITY; dim];
            let mut any = false;
            for s in sets {
                let mut top = vec![f64::NEG_INFINITY; dim];
                let mut seen = false;
                for &k in s.iter().filter(|&&k| k <= n) {
                    seen = true;
                    for (m, v) in top.iter_mut().zip(t.row(k)) {
                        *m = m.max(*v);
                    }
                }
                if seen {
                    any = true;
                    for (b, m) in best.iter_mut().zip(top) {
                        *b = b.min(m);
                    }
                }
            }
            if !any {
                return Err(Error::InvalidFilter(format!(
                    "no base set meets the horizon 1..={n}"
                )));
            }
            out = best;
        }
    }
    LatticeElement::new(out)
}

/// Order limit superior at the sequence horizon, as the maximum over the
/// last `tail_fraction` of the evaluated terms.
pub fn order_limsup(seq: &LatticeSequence, tail_fraction: f64) -> Result<LimsupEstimate> {
    let t = seq.table()?;
    if t.is_empty() {
        return Err(Error::Precondition("empty sequence".into()));
    }
    Ok(order_limsup_table(&t, tail_fraction))
}

/// Filter limit superior at the sequence horizon.
pub fn filter_limsup(seq: &LatticeSequence, filter: &FilterSpec) -> Result<LatticeElement> {
    let t = seq.table()?;
    if t.is_empty() {
        return Err(Error::Precondition("empty sequence".into()));
    }
    filter_limsup_table(&t, filter)
}

/// Comparison of `ℓ̄` over all indices with `ℓ̄` over a subset `H`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HRestriction {
    pub over_all: LatticeElement,
    pub over_h: LatticeElement,
    pub difference: f64,
    pub h_density: f64,
    pub verdict: Verdict,
}

/// Evaluates the filter limsup of `seq` over `ℕ` and over `H = {n : in_h(n)}`.
/// The two agree within `tol` (relative to `max(1, |ℓ̄|)`) when `H`
/// belongs to the filter.
pub fn h_restriction(
    seq: &LatticeSequence,
    filter: &FilterSpec,
    in_h: impl Fn(usize) -> bool,
    tol: f64,
) -> Result<HRestriction> {
    let t = seq.table()?;
    h_restriction_table(&t, filter, in_h, tol)
}

pub(crate) fn h_restriction_table(
    t: &SequenceTable,
    filter: &FilterSpec,
    in_h: impl Fn(usize) -> bool,
    tol: f64,
) -> Result<HRestriction> {
    let restricted = t.restrict(&in_h);
    if restricted.is_empty() {
        return Err(Error::Precondition("H misses the horizon".into()));
    }
    let over_all = filter_limsup_table(t, filter)?;
    let over_h = filter_limsup_table(&restricted, filter)?;
    // Relative to the magnitude so unbounded sequences compare sensibly.
    let difference = (0..t.dim())
        .map(|i| {
            let (a, b) = (over_all.get_extended(i), over_h.get_extended(i));
            if a == b {
                0.0
            } else {
                (a - b).abs() / a.abs().max(1.0)
            }
        })
        .fold(0.0, f64::max);
    Ok(HRestriction {
        h_density: restricted.len() as f64 / t.len() as f64,
        verdict: Verdict::from_bool(difference <= tol),
        over_all,
        over_h,
        difference,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u() -> LatticeElement {
        LatticeElement::from_slice(&[1.0, 0.5])
    }

    #[test]
    fn order_limsup_examples() {
        let s = LatticeSequence::along(&u(), 1000, |n| if n % 2 == 0 { 1.0 } else { -1.0 });
        assert_eq!(order_limsup(&s, 0.5).unwrap().value, u());
        let s = LatticeSequence::along(&u(), 1000, |n| 1.0 / n as f64);
        let est = order_limsup(&s, 0.5).unwrap();
        assert_eq!(est.value, &u() * (1.0 / 501.0));
        assert!(est.caveat.is_none());
    }

    #[test]
    fn order_limsup_matches_nested_min_max() {
        let v = LatticeElement::from_slice(&[0.25, 0.5]);
        let (uu, vv) = (u(), v.clone());
        let s = LatticeSequence::new(2, 400, move |n| {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            &uu + &(&vv * sign)
        });
        // inf over m ≤ 200 of sup over m ≤ n ≤ 400, by brute force
        let t = s.table().unwrap();
        let mut oracle = vec![f64::INFINITY; 2];
        for m in 1..=200 {
            for i in 0..2 {
                let sup = (m..=400).map(|n| t.row(n)[i]).fold(f64::NEG_INFINITY, f64::max);
                oracle[i] = oracle[i].min(sup);
            }
        }
        let got = order_limsup(&s, 0.5).unwrap().value;
        assert_eq!(got.values(), &oracle[..]);
        assert_eq!(got, &u() + &v);
    }

    #[test]
    fn density_limsup_ignores_squares() {
        let n = 1_000_000;
        let s = LatticeSequence::scalar(n, |k| {
            let r = (k as f64).sqrt().round() as usize;
            if r * r == k {
                1.0
            } else {
                0.0
            }
        });
        // ⌊√N⌋ = 1000 squares out of 10⁶ stays under the 1% allowance
        assert_eq!(
            filter_limsup(&s, &FilterSpec::density(0.01)).unwrap(),
            LatticeElement::scalar(0.0)
        );
        assert_eq!(
            filter_limsup(&s, &FilterSpec::Cofinite).unwrap(),
            LatticeElement::scalar(1.0)
        );
    }

    #[test]
    fn constant_under_every_filter() {
        let s = LatticeSequence::scalar(500, |_| 3.5);
        for f in [
            FilterSpec::Cofinite,
            FilterSpec::density(0.01),
            FilterSpec::Explicit {
                sets: vec![vec![300, 301], vec![301, 400]],
            },
        ] {
            assert_eq!(filter_limsup(&s, &f).unwrap(), LatticeElement::scalar(3.5));
        }
    }

    #[test]
    fn explicit_base_must_be_a_filter_base() {
        let s = LatticeSequence::scalar(10, |n| n as f64);
        let bad = FilterSpec::Explicit {
            sets: vec![vec![1], vec![2]],
        };
        assert!(matches!(filter_limsup(&s, &bad), Err(Error::InvalidFilter(_))));
        let good = FilterSpec::Explicit {
            sets: vec![vec![3, 9], vec![3, 4]],
        };
        assert_eq!(filter_limsup(&s, &good).unwrap(), LatticeElement::scalar(4.0));
    }

    #[test]
    fn norm_filter_scales_the_unit() {
        let e = OrderUnit::new(LatticeElement::from_slice(&[1.0, 2.0])).unwrap();
        let op = LimsupOperator::new(LimsupKind::NormFilter {
            filter: FilterSpec::Cofinite,
            unit: e,
        });
        let s = LatticeSequence::along(&LatticeElement::from_slice(&[3.0, 2.0]), 100, |_| 1.0);
        let got = op.apply(&s).unwrap().value;
        assert_eq!(got, LatticeElement::from_slice(&[3.0, 6.0]));
    }

    #[test]
    fn h_restriction_on_density_one_subset() {
        let s = LatticeSequence::scalar(100_000, |n| 1.0 + 1.0 / n as f64);
        let not_square = |k: usize| {
            let r = (k as f64).sqrt().round() as usize;
            r * r != k
        };
        let h = h_restriction(&s, &FilterSpec::density(0.01), not_square, 1e-2).unwrap();
        assert_eq!(h.verdict, Verdict::Pass);
        assert!(h.h_density > 0.99);
    }

    #[test]
    fn cesaro_and_almost_companions() {
        let s = LatticeSequence::scalar(1000, |n| (n % 2) as f64);
        let c = LimsupOperator::new(LimsupKind::Cesaro).apply(&s).unwrap().value;
        assert!((c.get_extended(0) - 0.5).abs() <= 1.0 / 501.0);
        let a = LimsupOperator::new(LimsupKind::Almost { offsets: None })
            .apply(&s)
            .unwrap()
            .value;
        assert!((a.get_extended(0) - 0.5).abs() <= 1.0 / 900.0);
    }
}
