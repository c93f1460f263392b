use serde::{Deserialize, Serialize};

use crate::convergence::{ConvergenceStructure, SequenceTable, Verdict};
use crate::error::{Error, Result};
use crate::lattice::LatticeElement;

use super::{Interval, IntervalSet, LatticeFunction, MeasureSpace, SimpleFunction};

/// How cells are refined from one term to the next.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Partition {
    Dyadic,
    Triadic,
}

impl Partition {
    pub fn base(self) -> usize {
        match self {
            Partition::Dyadic => 2,
            Partition::Triadic => 3,
        }
    }

    /// Depth giving roughly 6·10⁴ finest cells.
    pub fn default_levels(self) -> usize {
        match self {
            Partition::Dyadic => 16,
            Partition::Triadic => 10,
        }
    }
}

/// Cell diameters `diam·b^{-n}` for `n = 1..=levels`.
pub fn default_deltas(diam: f64, partition: Partition, levels: usize) -> Vec<f64> {
    let b = partition.base() as f64;
    (1..=levels).map(|n| diam * b.powi(-(n as i32))).collect()
}

const MAX_CELLS: usize = 1 << 21;

/// Piecewise-constant lower approximations `f_n = ⋀_{E} f` over the cells
/// `E` of nested partitions of the support, with the evidence that they
/// define `f`.
#[derive(Clone, Debug)]
pub struct DefiningSequence {
    pub partition: Partition,
    pub support: Interval,
    pub deltas: Vec<f64>,
    /// Partition depth used by each term.
    pub depths: Vec<usize>,
    /// Sampled `sup |f − f_n|` per term; the exceptional sets of the
    /// in-measure certificate are empty, so this is the whole evidence.
    pub uniform_error: Vec<f64>,
    /// Sampled `sup |f|` on the support; `∫_A |f_n| ≤ bound·μ(A)` gives the
    /// first equiabsolute-continuity clause.
    pub bound: f64,
    /// Index `m` of the first exhausting set containing the support, after
    /// which `∫_{G∖B_m} |f_n| = 0` for every `n`.
    pub exhausting_index: Option<usize>,
    dim: usize,
    coord: (f64, f64),
    ms: MeasureSpace,
    /// Per depth `k`: entrywise cell minima and maxima, `b^k` cells each.
    levels: Vec<(Vec<f64>, Vec<f64>)>,
}

pub fn build_defining_sequence(
    f: &LatticeFunction,
    ms: &MeasureSpace,
    support: Interval,
    deltas: &[f64],
    partition: Partition,
) -> Result<DefiningSequence> {
    let c = support.intersect(&ms.domain.carrier);
    let (xa, xb) = ms.domain.coord_range(&c);
    if !(xa.is_finite() && xb.is_finite()) {
        return Err(Error::Precondition(format!(
            "support [{}, {}] is not compact in the domain metric",
            support.lo, support.hi
        )));
    }
    if deltas.is_empty() || deltas.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::Precondition("diameters must be positive".into()));
    }
    if deltas.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::Precondition("diameters must decrease".into()));
    }
    let b = partition.base();
    let diam = xb - xa;
    let depths: Vec<usize> = deltas
        .iter()
        .map(|&d| {
            let mut k = 0;
            let mut w = diam;
            while w > d * (1.0 + 1e-12) {
                w /= b as f64;
                k += 1;
            }
            k
        })
        .collect();
    let depth = *depths.last().unwrap();
    let cells = b.checked_pow(depth as u32).filter(|&c| c <= MAX_CELLS).ok_or_else(|| {
        Error::Precondition(format!("partition depth {depth} exceeds the cell budget"))
    })?;
    let dim = f.dim();
    let h = diam / cells as f64;
    let mut mins = vec![f64::INFINITY; cells * dim];
    let mut maxs = vec![f64::NEG_INFINITY; cells * dim];
    let mut buf = vec![0.0; dim];
    let mut bound: f64 = 0.0;
    let mut absorb = |cell: usize, buf: &[f64], mins: &mut [f64], maxs: &mut [f64]| -> Result<()> {
        for (k, &v) in buf.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Precondition(format!(
                    "function is unbounded on the support (non-finite sample in cell {cell})"
                )));
            }
            let i = cell * dim + k;
            mins[i] = mins[i].min(v);
            maxs[i] = maxs[i].max(v);
            bound = bound.max(v.abs());
        }
        Ok(())
    };
    // Endpoints are shared between neighbouring cells; midpoints are not.
    for j in 0..=cells {
        let x = if j == cells { xb } else { xa + j as f64 * h };
        f.eval_into(ms.domain.from_coord(x), &mut buf);
        if j > 0 {
            absorb(j - 1, &buf, &mut mins, &mut maxs)?;
        }
        if j < cells {
            absorb(j, &buf, &mut mins, &mut maxs)?;
            f.eval_into(ms.domain.from_coord(x + 0.5 * h), &mut buf);
            absorb(j, &buf, &mut mins, &mut maxs)?;
        }
    }
    for &t in &f.breaks {
        let x = ms.domain.to_coord(t);
        if x > xa && x < xb {
            let j = (((x - xa) / h) as usize).min(cells - 1);
            f.eval_into(t, &mut buf);
            absorb(j, &buf, &mut mins, &mut maxs)?;
        }
    }
    let mut levels = vec![(mins, maxs)];
    for _ in 0..depth {
        let (fine_min, fine_max) = levels.last().unwrap();
        let n = fine_min.len() / dim / b;
        let mut cmin = vec![f64::INFINITY; n * dim];
        let mut cmax = vec![f64::NEG_INFINITY; n * dim];
        for j in 0..n {
            for child in 0..b {
                for k in 0..dim {
                    let src = (j * b + child) * dim + k;
                    cmin[j * dim + k] = cmin[j * dim + k].min(fine_min[src]);
                    cmax[j * dim + k] = cmax[j * dim + k].max(fine_max[src]);
                }
            }
        }
        levels.push((cmin, cmax));
    }
    levels.reverse();
    let uniform_error = depths
        .iter()
        .map(|&k| {
            let (lo, hi) = &levels[k];
            lo.iter().zip(hi).fold(0.0f64, |m, (a, b)| m.max(b - a))
        })
        .collect();
    Ok(DefiningSequence {
        partition,
        support: c,
        deltas: deltas.to_vec(),
        depths,
        uniform_error,
        bound,
        exhausting_index: ms.covering_index(&c),
        dim,
        coord: (xa, xb),
        ms: *ms,
        levels,
    })
}

impl DefiningSequence {
    pub fn len(&self) -> usize {
        self.depths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depths.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn map_levels(&self, op: impl Fn(f64, f64) -> (f64, f64)) -> Self {
        let mut out = self.clone();
        for (lo, hi) in &mut out.levels {
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                (*a, *b) = op(*a, *b);
            }
        }
        out.uniform_error = out
            .depths
            .iter()
            .map(|&k| {
                let (lo, hi) = &out.levels[k];
                lo.iter().zip(hi).fold(0.0f64, |m, (a, b)| m.max(b - a))
            })
            .collect();
        out
    }

    /// Defining sequence of `f⁺ = f ∨ 0`; cellwise infima commute with the
    /// monotone map `v ↦ v ∨ 0`.
    pub fn positive_part(&self) -> Self {
        self.map_levels(|lo, hi| (lo.max(0.0), hi.max(0.0)))
    }

    /// Defining sequence of `f⁻ = (−f) ∨ 0`.
    pub fn negative_part(&self) -> Self {
        self.map_levels(|lo, hi| ((-hi).max(0.0), (-lo).max(0.0)))
    }

    fn cell_edges(&self, depth: usize, j: usize) -> Interval {
        let (xa, xb) = self.coord;
        let n = self.partition.base().pow(depth as u32);
        let h = (xb - xa) / n as f64;
        let x0 = xa + j as f64 * h;
        let x1 = if j + 1 == n { xb } else { x0 + h };
        Interval {
            lo: self.ms.domain.from_coord(x0),
            hi: self.ms.domain.from_coord(x1),
        }
    }

    /// The `n`-th term (1-based) as a simple function.
    pub fn term(&self, n: usize) -> SimpleFunction {
        let k = self.depths[n - 1];
        let (lo, _) = &self.levels[k];
        let cells = (0..lo.len() / self.dim)
            .map(|j| {
                let c = LatticeElement::from_slice(&lo[j * self.dim..(j + 1) * self.dim]);
                (self.cell_edges(k, j), c)
            })
            .collect();
        SimpleFunction::new(self.dim, cells).expect("finite cell infima")
    }

    /// `∫_A f_n dμ` without materializing the term.
    pub fn term_integral(&self, n: usize, set: &IntervalSet) -> Vec<f64> {
        let k = self.depths[n - 1];
        let (lo, _) = &self.levels[k];
        let cells = lo.len() / self.dim;
        let (xa, xb) = self.coord;
        let h = (xb - xa) / cells as f64;
        let mut out = vec![0.0; self.dim];
        for part in set.parts() {
            let (pa, pb) = self.ms.domain.coord_range(part);
            if !(pb > xa && pa < xb) {
                continue;
            }
            let first = (((pa - xa) / h).floor().max(0.0) as usize).min(cells - 1);
            let last = (((pb - xa) / h).ceil().max(0.0) as usize).min(cells);
            for j in first..last {
                let m = self.ms.measure(&self.cell_edges(k, j).intersect(part));
                if m == 0.0 {
                    continue;
                }
                for (o, c) in out.iter_mut().zip(&lo[j * self.dim..(j + 1) * self.dim]) {
                    if *c != 0.0 {
                        *o += c * m;
                    }
                }
            }
        }
        out
    }

    /// Table of `∫_A f_n dμ` for `n = 1..=len`.
    pub fn integral_table(&self, set: &IntervalSet) -> Result<SequenceTable> {
        let data = (1..=self.len()).flat_map(|n| self.term_integral(n, set)).collect();
        SequenceTable::from_rows(self.dim, data)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeValue {
    pub set: IntervalSet,
    pub value: LatticeElement,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntegralResult {
    pub value: LatticeElement,
    pub verdict: Verdict,
    /// Largest `‖∫_A f_n − l(A)‖` over the probed sets `A` and the tail
    /// terms, standing in for the supremum over all measurable sets.
    pub residual: f64,
    pub probes: Vec<ProbeValue>,
    pub partition: Partition,
    pub terms: usize,
    /// Sampled `sup |f − f_N|` of the last term.
    pub uniform_error: f64,
}

/// `∫_A f dμ` from dyadic defining sequences of `f⁺` and `f⁻`.
pub fn integrate(
    f: &LatticeFunction,
    set: &IntervalSet,
    ms: &MeasureSpace,
    cs: &ConvergenceStructure,
) -> Result<IntegralResult> {
    integrate_with(f, set, ms, cs, Partition::Dyadic, Partition::Dyadic.default_levels())
}

pub fn integrate_with(
    f: &LatticeFunction,
    set: &IntervalSet,
    ms: &MeasureSpace,
    cs: &ConvergenceStructure,
    partition: Partition,
    levels: usize,
) -> Result<IntegralResult> {
    let dim = f.dim();
    let Some(hull) = set.hull() else {
        return zero_result(dim, partition);
    };
    let mut c = hull.intersect(&ms.domain.carrier);
    if let Some(s) = &f.support {
        c = c.intersect(s);
    }
    if c.is_empty() || ms.measure(&c) == 0.0 {
        return zero_result(dim, partition);
    }
    let (xa, xb) = ms.domain.coord_range(&c);
    if !(xa.is_finite() && xb.is_finite()) {
        return Err(Error::NotIntegrable(format!(
            "no compact support inside [{}, {}] to build a defining sequence on",
            c.lo, c.hi
        )));
    }
    let deltas = default_deltas(xb - xa, partition, levels);
    let ds = build_defining_sequence(f, ms, c, &deltas, partition).map_err(|e| match e {
        Error::Precondition(m) => Error::NotIntegrable(m),
        e => e,
    })?;
    let parts = [ds.positive_part(), ds.negative_part()];

    let mut probes = vec![set.intersect(&c)];
    for pieces in [2usize, 4] {
        let w = (xb - xa) / pieces as f64;
        for p in 0..pieces {
            let sub = Interval {
                lo: ms.domain.from_coord(xa + p as f64 * w),
                hi: ms.domain.from_coord(xa + (p + 1) as f64 * w),
            };
            let s = set.intersect(&sub);
            if !s.is_empty() {
                probes.push(s);
            }
        }
    }

    let mut verdict = Verdict::Pass;
    let mut residual: f64 = 0.0;
    let mut values = Vec::with_capacity(probes.len());
    for probe in &probes {
        let mut value = vec![0.0; dim];
        for (sign, part) in [1.0, -1.0].into_iter().zip(&parts) {
            let table = part.integral_table(probe)?;
            let est = cs.limit_table(&table)?;
            verdict = verdict.and(est.verdict);
            let l = est.value.values().to_vec();
            let start = crate::convergence::tail_start(table.len(), cs.tail_fraction);
            for n in start + 1..=table.len() {
                let gap = table
                    .row(n)
                    .iter()
                    .zip(&l)
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                residual = residual.max(gap);
            }
            for (v, x) in value.iter_mut().zip(&l) {
                *v += sign * x;
            }
        }
        values.push(ProbeValue {
            set: probe.clone(),
            value: LatticeElement::new(value)?,
        });
    }
    Ok(IntegralResult {
        value: values[0].value.clone(),
        verdict,
        residual,
        probes: values,
        partition,
        terms: ds.len(),
        uniform_error: *ds.uniform_error.last().unwrap(),
    })
}

fn zero_result(dim: usize, partition: Partition) -> Result<IntegralResult> {
    Ok(IntegralResult {
        value: LatticeElement::zeros(dim),
        verdict: Verdict::Pass,
        residual: 0.0,
        probes: Vec::new(),
        partition,
        terms: 0,
        uniform_error: 0.0,
    })
}

/// `∫_A h·q dμ` for a componentwise product, after checking that both
/// factors are bounded where the product lives and that it lives on a
/// compact set.
pub fn product_integrability(
    h: &LatticeFunction,
    q: &LatticeFunction,
    set: &IntervalSet,
    ms: &MeasureSpace,
    cs: &ConvergenceStructure,
) -> Result<IntegralResult> {
    let p = h.mul(q)?;
    let hull = set
        .hull()
        .map(|i| i.intersect(&ms.domain.carrier))
        .unwrap_or(Interval { lo: 0.0, hi: 0.0 });
    let c = match p.support {
        Some(s) => s.intersect(&hull),
        None => hull,
    };
    let (xa, xb) = ms.domain.coord_range(&c);
    if !(xa.is_finite() && xb.is_finite()) {
        return Err(Error::Precondition(
            "neither factor has a compact support to pair with".into(),
        ));
    }
    let mut buf = vec![0.0; h.dim().max(q.dim())];
    for (name, g) in [("h", h), ("q", q)] {
        for j in 0..=4096 {
            let x = xa + (xb - xa) * j as f64 / 4096.0;
            let t = ms.domain.from_coord(x);
            g.eval_into(t, &mut buf[..g.dim()]);
            if buf[..g.dim()].iter().any(|v| !v.is_finite()) {
                return Err(Error::Precondition(format!("factor {name} is unbounded at t = {t}")));
            }
        }
    }
    integrate(&p.with_support(c), set, ms, cs)
}
