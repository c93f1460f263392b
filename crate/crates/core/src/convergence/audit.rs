//! Property audit of a convergence and its limsup companion against the
//! standard bank.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::LatticeElement;

use super::bank::{BankEntry, BankKind};
use super::filter::FilterSpec;
use super::limsup::{h_restriction_table, LimsupKind, LimsupOperator};
use super::{LimitEstimate, LimitRule, SequenceTable, Verdict};

/// A limit rule that reports `−ℓ` as the limit while keeping its
/// membership test. It breaks monotonicity and exists to exercise the audit.
pub struct SignFlipped<R>(pub R);

impl<R: LimitRule> LimitRule for SignFlipped<R> {
    fn label(&self) -> String {
        format!("sign-flipped {}", self.0.label())
    }

    fn tol(&self) -> f64 {
        self.0.tol()
    }

    fn bank_kind(&self) -> Option<BankKind> {
        self.0.bank_kind()
    }

    fn limit(&self, t: &SequenceTable) -> Result<LimitEstimate> {
        let mut est = self.0.limit(t)?;
        est.value = est.value.checked_neg()?;
        Ok(est)
    }

    fn converges_to(&self, t: &SequenceTable, candidate: &LatticeElement) -> Result<Verdict> {
        self.0.converges_to(t, candidate)
    }
}

/// The first offending bank instance of a clause.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub index: usize,
    pub partner: Option<usize>,
    pub sequence: String,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AxiomResult {
    pub axiom: String,
    pub verdict: Verdict,
    /// Number of instances whose premises held and were checked.
    pub checked: usize,
    pub witness: Option<Witness>,
}

impl AxiomResult {
    fn new(axiom: &str) -> Self {
        Self {
            axiom: axiom.to_string(),
            verdict: Verdict::Pass,
            checked: 0,
            witness: None,
        }
    }

    fn record(&mut self, v: Verdict, witness: impl FnOnce() -> Witness) {
        self.checked += 1;
        let replace = match (self.verdict, v) {
            (_, Verdict::Pass) => false,
            (Verdict::Pass, _) => true,
            (Verdict::Inconclusive, Verdict::Fail) => true,
            _ => false,
        };
        if replace {
            self.verdict = v;
            self.witness = Some(witness());
        }
    }

    fn finish(mut self) -> Self {
        if self.checked == 0 {
            self.verdict = Verdict::Inconclusive;
        }
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditReport {
    pub structure: String,
    pub limsup: String,
    pub horizon: usize,
    pub tol: f64,
    pub bank_size: usize,
    /// Whether the structure recovers the closed-form limits of the bank.
    pub bank_consistency: AxiomResult,
    pub convergence_axioms: Vec<AxiomResult>,
    pub limsup_axioms: Vec<AxiomResult>,
    pub conditions: Vec<AxiomResult>,
    pub note: String,
}

impl AuditReport {
    pub fn results(&self) -> impl Iterator<Item = &AxiomResult> {
        self.convergence_axioms
            .iter()
            .chain(&self.limsup_axioms)
            .chain(&self.conditions)
    }

    pub fn get(&self, axiom: &str) -> Option<&AxiomResult> {
        self.results().find(|r| r.axiom == axiom)
    }

    pub fn all_passed(&self) -> bool {
        self.bank_consistency.verdict.passed() && self.results().all(|r| r.verdict.passed())
    }

    pub fn failures(&self) -> Vec<&AxiomResult> {
        std::iter::once(&self.bank_consistency)
            .chain(self.results())
            .filter(|r| !r.verdict.passed())
            .collect()
    }
}

fn build(t: &SequenceTable, f: impl Fn(usize, &[f64], &mut [f64])) -> SequenceTable {
    let dim = t.dim();
    let mut data = vec![0.0; t.len() * dim];
    for n in 1..=t.len() {
        f(n, t.row(n), &mut data[(n - 1) * dim..n * dim]);
    }
    SequenceTable::from_rows(dim, data).expect("derived table")
}

fn combine(a: &SequenceTable, b: &SequenceTable, za: f64, zb: f64) -> SequenceTable {
    a.zip_with(b, |x, y| za * x + zb * y).expect("equal shapes")
}

fn el(v: Vec<f64>) -> LatticeElement {
    LatticeElement::new(v).expect("finite derived element")
}

/// `max_i |a_i − b_i|`, with equal infinite entries at distance zero.
fn gap(a: &LatticeElement, b: &LatticeElement) -> f64 {
    (0..a.dim())
        .map(|i| {
            let (x, y) = (a.get_extended(i), b.get_extended(i));
            if x == y {
                0.0
            } else {
                (x - y).abs()
            }
        })
        .fold(0.0, f64::max)
}

/// Largest amount by which `a ≤ b + slack·max(1, |b|)` is violated.
fn excess(a: &LatticeElement, b: &LatticeElement, slack: f64) -> f64 {
    (0..a.dim())
        .map(|i| {
            let (x, y) = (a.get_extended(i), b.get_extended(i));
            if y.is_infinite() || x <= y {
                0.0
            } else {
                (x - y) - slack * y.abs().max(1.0)
            }
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn dominated_on_tail(x: &SequenceTable, y: &SequenceTable) -> bool {
    let start = x.len() / 10;
    (start + 1..=x.len()).all(|n| x.row(n).iter().zip(y.row(n)).all(|(a, b)| a <= b))
}

fn pairs(len: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    if len < 2 {
        return out;
    }
    for i in 0..len {
        for step in [1, 3, 7] {
            let j = (i + step) % len;
            if j != i {
                out.push((i, j));
            }
        }
    }
    out
}

const PALETTE: [(f64, f64); 3] = [(1.0, 1.0), (1.5, -1.0), (-0.5, 1.5)];

/// Audits a limit rule against the convergence axioms, its limsup
/// companion against the limsup axioms, and condition H* on the bank.
pub fn axiom_audit(
    rule: &dyn LimitRule,
    ls: &LimsupOperator,
    bank: &[BankEntry],
) -> Result<AuditReport> {
    let kind = rule.bank_kind().ok_or_else(|| {
        Error::Precondition(format!("no closed-form bank column for {}", rule.label()))
    })?;
    if bank.is_empty() {
        return Err(Error::Precondition("empty bank".into()));
    }
    let tol = rule.tol();
    let horizon = bank[0].table.len();
    let dim = bank[0].table.dim();
    let name = |i: usize| bank[i].name.to_string();
    let wit = |i: usize, partner: Option<usize>, detail: String| Witness {
        index: i,
        partner,
        sequence: match partner {
            Some(j) => format!("{} & {}", bank[i].name, bank[j].name),
            None => name(i),
        },
        detail,
    };

    // Bank consistency and the set S of members with known limits.
    let mut consistency = AxiomResult::new("bank");
    let mut members: Vec<(usize, LatticeElement, LatticeElement)> = Vec::new();
    for (i, b) in bank.iter().enumerate() {
        match b.limits.get(kind) {
            Some(l) => {
                let v = rule.converges_to(&b.table, l)?;
                let est = rule.limit(&b.table)?;
                let d = gap(&est.value, l);
                let verdict = if v.passed() && d > 2.0 * tol {
                    Verdict::Fail
                } else {
                    v
                };
                consistency.record(verdict, || {
                    wit(i, None, format!("expected {l:?}, verdict {v}, estimate {:?}", est.value))
                });
                if v.passed() {
                    members.push((i, l.clone(), est.value));
                }
            }
            None => {
                let est = rule.limit(&b.table)?;
                let v = if est.value.is_finite() {
                    rule.converges_to(&b.table, &est.value)?
                } else {
                    Verdict::Fail
                };
                let verdict = if v.passed() { Verdict::Fail } else { Verdict::Pass };
                consistency.record(verdict, || {
                    wit(i, None, format!("divergent sequence accepted with limit {:?}", est.value))
                });
            }
        }
    }
    let consistency = consistency.finish();

    let mut conv = Vec::new();

    // 2.1.a linearity
    let mut a = AxiomResult::new("2.1.a");
    for (k, (p, q)) in pairs(members.len()).into_iter().enumerate() {
        let (i, li, ei) = &members[p];
        let (j, lj, ej) = &members[q];
        let (z1, z2) = PALETTE[k % PALETTE.len()];
        let t = combine(&bank[*i].table, &bank[*j].table, z1, z2);
        let target = el(li
            .values()
            .iter()
            .zip(lj.values())
            .map(|(x, y)| z1 * x + z2 * y)
            .collect());
        let v = rule.converges_to(&t, &target)?;
        let est = rule.limit(&t)?.value;
        let combo = el(ei
            .values()
            .iter()
            .zip(ej.values())
            .map(|(x, y)| z1 * x + z2 * y)
            .collect());
        let d = gap(&est, &combo);
        let verdict = if v.passed() && d > 2.0 * tol { Verdict::Fail } else { v };
        a.record(verdict, || {
            wit(*i, Some(*j), format!("ζ = ({z1}, {z2}): verdict {v}, |ℓ(combo) − combo of ℓ| = {d:e}"))
        });
    }
    conv.push(a.finish());

    // 2.1.b monotonicity
    let mut b = AxiomResult::new("2.1.b");
    let shift = [0.5; 8];
    for (i, _, ei) in &members {
        let t = build(&bank[*i].table, |_, r, o| {
            for (k, (x, y)) in r.iter().zip(o.iter_mut()).enumerate() {
                *y = x + shift[k % shift.len()];
            }
        });
        let est = rule.limit(&t)?.value;
        let e = excess(ei, &est, tol);
        b.record(Verdict::from_bool(e <= 0.0), || {
            wit(*i, None, format!("ℓ(x) = {ei:?} exceeds ℓ(x + 0.5) = {est:?}"))
        });
    }
    for (i, _, ei) in &members {
        for (j, _, ej) in &members {
            if i != j && dominated_on_tail(&bank[*i].table, &bank[*j].table) {
                let e = excess(ei, ej, tol);
                b.record(Verdict::from_bool(e <= 0.0), || {
                    wit(*i, Some(*j), format!("x ≤ y on the tail but ℓ(x) = {ei:?} > ℓ(y) = {ej:?}"))
                });
            }
        }
    }
    conv.push(b.finish());

    // 2.1.c eventually constant sequences and finite modifications
    let mut c = AxiomResult::new("2.1.c");
    for (i, l, ei) in &members {
        let t = &bank[*i].table;
        let modified = t.modify_prefix(10, |n, row| {
            for x in row.iter_mut() {
                *x += if n % 2 == 0 { 5.0 } else { -5.0 };
            }
        });
        let v = rule.converges_to(&modified, l)?;
        let est = rule.limit(&modified)?.value;
        let d = gap(&est, ei);
        let verdict = if v.passed() && d > tol { Verdict::Fail } else { v };
        c.record(verdict, || {
            wit(*i, None, format!("after modifying 10 terms: verdict {v}, shift {d:e}"))
        });
        let lv = l.values().to_vec();
        let settled = build(t, |n, r, o| {
            o.copy_from_slice(if n <= 20 { r } else { &lv });
        });
        let v = rule.converges_to(&settled, l)?;
        c.record(v, || wit(*i, None, format!("eventually equal to {l:?}: verdict {v}")));
    }
    conv.push(c.finish());

    // 2.1.d absolute values
    let mut d = AxiomResult::new("2.1.d");
    for (i, l, _) in &members {
        let v = rule.converges_to(&bank[*i].table.abs(), &l.abs())?;
        d.record(v, || {
            wit(*i, None, format!("ℓ(x) = {l:?} but |x_n| does not converge to {:?} (verdict {v})", l.abs()))
        });
    }
    conv.push(d.finish());

    // 2.1.e squeeze between x and x + u/n
    let mut e = AxiomResult::new("2.1.e");
    let u = [1.0, 0.5];
    for (i, l, _) in &members {
        let t = &bank[*i].table;
        let upper = build(t, |n, r, o| {
            for (k, (x, y)) in r.iter().zip(o.iter_mut()).enumerate() {
                *y = x + u[k % 2] / n as f64;
            }
        });
        if !rule.converges_to(&upper, l)?.passed() {
            continue;
        }
        let mid = build(t, |n, r, o| {
            let w = if n % 3 == 0 { 1.0 / n as f64 } else { 0.0 };
            for (k, (x, y)) in r.iter().zip(o.iter_mut()).enumerate() {
                *y = x + u[k % 2] * w;
            }
        });
        let v = rule.converges_to(&mid, l)?;
        e.record(v, || wit(*i, None, format!("squeezed sequence verdict {v}")));
    }
    conv.push(e.finish());

    // 2.1.f (u/n) → 0 for u ≥ 0
    let mut f = AxiomResult::new("2.1.f");
    let probes: [[f64; 2]; 5] = [[1.0, 0.5], [1.0, 1.0], [0.25, 0.75], [2.0, 1.0], [0.0, 0.0]];
    for p in probes {
        let t = SequenceTable::from_rows(
            dim,
            (1..=horizon)
                .flat_map(|n| (0..dim).map(move |k| p[k % 2] / n as f64))
                .collect(),
        )?;
        let v = rule.converges_to(&t, &LatticeElement::zeros(dim))?;
        f.record(v, || Witness {
            index: 0,
            partner: None,
            sequence: format!("{p:?}/n"),
            detail: format!("verdict {v}"),
        });
    }
    conv.push(f.finish());

    // 2.1.g lower bounds pass to the limit
    let mut g = AxiomResult::new("2.1.g");
    for (i, _, ei) in &members {
        let t = &bank[*i].table;
        let mut lower = vec![f64::INFINITY; dim];
        for n in horizon / 10 + 1..=horizon {
            for (m, v) in lower.iter_mut().zip(t.row(n)) {
                *m = m.min(*v);
            }
        }
        let lower = el(lower);
        let ex = excess(&lower, ei, tol);
        g.record(Verdict::from_bool(ex <= 0.0), || {
            wit(*i, None, format!("x = {lower:?} ≤ y_n on the tail but ℓ(y) = {ei:?}"))
        });
    }
    conv.push(g.finish());

    // Limsup clauses on the positive cone.
    let positive: Vec<SequenceTable> = bank.iter().map(|b| b.table.abs()).collect();
    let upper: Vec<LatticeElement> = positive
        .iter()
        .map(|t| ls.apply_table(t).map(|e| e.value))
        .collect::<Result<_>>()?;
    let mut lim = Vec::new();

    let mut la = AxiomResult::new("2.2.a");
    for (i, t) in positive.iter().enumerate() {
        let modified = t.modify_prefix(10, |n, row| {
            for x in row.iter_mut() {
                *x += 5.0 * (n % 2) as f64;
            }
        });
        let m = ls.apply_table(&modified)?.value;
        let d = (0..dim)
            .map(|k| {
                let (x, y) = (upper[i].get_extended(k), m.get_extended(k));
                if x == y {
                    0.0
                } else {
                    (x - y).abs() / x.abs().max(1.0)
                }
            })
            .fold(0.0, f64::max);
        la.record(Verdict::from_bool(d <= tol), || {
            wit(i, None, format!("ℓ̄ moved by {d:e} after modifying 10 terms"))
        });
    }
    lim.push(la.finish());

    let mut lb = AxiomResult::new("2.2.b");
    let mut lc = AxiomResult::new("2.2.c");
    for (i, j) in pairs(positive.len()) {
        let sum = combine(&positive[i], &positive[j], 1.0, 1.0);
        let s = ls.apply_table(&sum)?.value;
        let rhs = upper[i].checked_add(&upper[j])?;
        let ex = excess(&s, &rhs, tol);
        lb.record(Verdict::from_bool(ex <= 0.0), || {
            wit(i, Some(j), format!("ℓ̄(x + y) = {s:?} > ℓ̄(x) + ℓ̄(y) = {rhs:?}"))
        });
        let join = positive[i]
            .zip_with(&positive[j], f64::max)
            .expect("equal shapes");
        let top = ls.apply_table(&join)?.value;
        let ex = excess(&upper[i], &top, tol);
        lc.record(Verdict::from_bool(ex <= 0.0), || {
            wit(i, Some(j), format!("ℓ̄(x) = {:?} > ℓ̄(x ∨ y) = {top:?}", upper[i]))
        });
    }
    lim.push(lb.finish());
    lim.push(lc.finish());

    let mut ld = AxiomResult::new("2.2.d");
    for (i, l, _) in &members {
        if !bank[*i].is_positive() {
            continue;
        }
        let d = gap(&upper[*i], l);
        ld.record(Verdict::from_bool(d <= 2.0 * tol), || {
            wit(*i, None, format!("ℓ̄ = {:?} but ℓ = {l:?}", upper[*i]))
        });
    }
    lim.push(ld.finish());

    let mut le = AxiomResult::new("2.2.e");
    for (i, t) in positive.iter().enumerate() {
        if gap(&upper[i], &LatticeElement::zeros(dim)) > 0.5 * tol {
            continue;
        }
        let v = rule.converges_to(t, &LatticeElement::zeros(dim))?;
        le.record(v, || {
            wit(i, None, format!("ℓ̄ = {:?} ≈ 0 but the verdict for limit 0 is {v}", upper[i]))
        });
    }
    lim.push(le.finish());

    // Conditions.
    let mut conditions = Vec::new();
    let mut hs = AxiomResult::new("H*");
    for (i, b) in bank.iter().enumerate() {
        let norms = build(&b.table, |_, r, o| {
            let m = r.iter().fold(0.0, |m: f64, x| m.max(x.abs()));
            o.fill(m);
        });
        if !rule.converges_to(&norms, &LatticeElement::zeros(dim))?.passed() {
            continue;
        }
        let v = rule.converges_to(&positive[i], &LatticeElement::zeros(dim))?;
        hs.record(v, || wit(i, None, format!("‖x_n‖ is null but |x_n| has verdict {v}")));
    }
    conditions.push(hs.finish());

    if let (BankKind::Density, LimsupKind::Filter(filter @ FilterSpec::Density { .. })) =
        (kind, &ls.kind)
    {
        let mut hr = AxiomResult::new("H-restriction");
        let families: [(&str, fn(usize) -> bool); 3] = [
            ("non-squares", |n| {
                let r = (n as f64).sqrt().round() as usize;
                r * r != n
            }),
            ("n > 50", |n| n > 50),
            ("non-powers of 2", |n| !n.is_power_of_two()),
        ];
        for (i, t) in positive.iter().enumerate() {
            for (label, h) in families {
                let r = h_restriction_table(t, filter, h, tol)?;
                hr.record(r.verdict, || {
                    wit(i, None, format!("H = {label}: relative difference {:e}", r.difference))
                });
            }
        }
        conditions.push(hr.finish());
    }

    Ok(AuditReport {
        structure: rule.label(),
        limsup: ls.label(),
        horizon,
        tol,
        bank_size: bank.len(),
        bank_consistency: consistency,
        convergence_axioms: conv,
        limsup_axioms: lim,
        conditions,
        note: "grid lattice realization; limsup clauses are evaluated componentwise".into(),
    })
}
