use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lattice::LatticeElement;

/// A materialized sequence `x_1, …, x_N` of extended-real grid vectors,
/// stored row-major. Entries may be `f64::INFINITY` (the `+∞` element)
/// but never NaN or `-∞`.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceTable {
    len: usize,
    dim: usize,
    data: Vec<f64>,
}

impl SequenceTable {
    pub fn from_rows(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::Parameter(format!(
                "table of {} values is not a multiple of dim {dim}",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| v.is_nan() || **v == f64::NEG_INFINITY) {
            return Err(Error::InvalidValue(format!("sequence entry {v}")));
        }
        Ok(Self {
            len: data.len() / dim,
            dim,
            data,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Term `x_n`, `1 ≤ n ≤ len`.
    pub fn row(&self, n: usize) -> &[f64] {
        &self.data[(n - 1) * self.dim..n * self.dim]
    }

    pub fn element(&self, n: usize) -> LatticeElement {
        LatticeElement::new(self.row(n).to_vec()).expect("validated entries")
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.dim)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn is_positive(&self) -> bool {
        self.data.iter().all(|&v| v >= 0.0)
    }

    /// Index (1-based) of the first term with an infinite entry.
    pub fn first_infinite_term(&self) -> Option<usize> {
        self.data
            .iter()
            .position(|v| v.is_infinite())
            .map(|p| p / self.dim + 1)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            len: self.len,
            dim: self.dim,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn abs(&self) -> Self {
        self.map(f64::abs)
    }

    /// Entrywise combination of two tables of equal shape.
    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.dim != other.dim || self.len != other.len {
            return Err(Error::DimensionMismatch {
                left: self.data.len(),
                right: other.data.len(),
            });
        }
        Ok(Self {
            len: self.len,
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// Keeps the first `n` terms.
    pub fn truncate(&self, n: usize) -> Self {
        let n = n.min(self.len);
        Self {
            len: n,
            dim: self.dim,
            data: self.data[..n * self.dim].to_vec(),
        }
    }

    /// Keeps only the terms whose index satisfies `keep`, reindexed from 1.
    pub fn restrict(&self, keep: impl Fn(usize) -> bool) -> Self {
        let mut data = Vec::new();
        for n in 1..=self.len {
            if keep(n) {
                data.extend_from_slice(self.row(n));
            }
        }
        Self {
            len: data.len() / self.dim,
            dim: self.dim,
            data,
        }
    }

    /// Replaces term `n` by `f(n, x_n)` for `n ≤ count`.
    pub fn modify_prefix(&self, count: usize, f: impl Fn(usize, &mut [f64])) -> Self {
        let mut out = self.clone();
        for n in 1..=count.min(self.len) {
            let dim = self.dim;
            f(n, &mut out.data[(n - 1) * dim..n * dim]);
        }
        out
    }

    /// Prefix averages `(x_1 + … + x_k)/k`.
    pub fn cesaro_means(&self) -> Result<Self> {
        if let Some(n) = self.first_infinite_term() {
            return Err(Error::UndefinedAverage { n });
        }
        let mut sums = vec![0.0; self.dim];
        let mut data = Vec::with_capacity(self.data.len());
        for (k, row) in self.rows().enumerate() {
            for (s, v) in sums.iter_mut().zip(row) {
                *s += v;
            }
            data.extend(sums.iter().map(|s| s / (k + 1) as f64));
        }
        Ok(Self {
            len: self.len,
            dim: self.dim,
            data,
        })
    }
}

type ElementFn = Arc<dyn Fn(usize) -> LatticeElement + Send + Sync>;
type RawFn = Arc<dyn Fn(usize, &mut [f64]) + Send + Sync>;

#[derive(Clone)]
enum Generator {
    Element(ElementFn),
    Raw(RawFn),
    Table(Arc<SequenceTable>),
}

/// A lattice-valued sequence `n ↦ x_n` (`n ≥ 1`) evaluated up to a horizon.
#[derive(Clone)]
pub struct LatticeSequence {
    generator: Generator,
    dim: usize,
    horizon: usize,
}

impl fmt::Debug for LatticeSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LatticeSequence")
            .field("dim", &self.dim)
            .field("horizon", &self.horizon)
            .finish_non_exhaustive()
    }
}

impl LatticeSequence {
    pub fn new(
        dim: usize,
        horizon: usize,
        f: impl Fn(usize) -> LatticeElement + Send + Sync + 'static,
    ) -> Self {
        Self {
            generator: Generator::Element(Arc::new(f)),
            dim,
            horizon,
        }
    }

    /// Generator writing term `n` into a buffer of length `dim`.
    pub fn from_raw(
        dim: usize,
        horizon: usize,
        f: impl Fn(usize, &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            generator: Generator::Raw(Arc::new(f)),
            dim,
            horizon,
        }
    }

    /// Real sequence (`T` a single point).
    pub fn scalar(horizon: usize, f: impl Fn(usize) -> f64 + Send + Sync + 'static) -> Self {
        Self::from_raw(1, horizon, move |n, out| out[0] = f(n))
    }

    /// `n ↦ a(n)·u` for a fixed direction `u`.
    pub fn along(
        u: &LatticeElement,
        horizon: usize,
        a: impl Fn(usize) -> f64 + Send + Sync + 'static,
    ) -> Self {
        let u = u.values().to_vec();
        Self::from_raw(u.len(), horizon, move |n, out| {
            let c = a(n);
            for (o, v) in out.iter_mut().zip(&u) {
                *o = c * v;
            }
        })
    }

    pub fn from_table(table: SequenceTable) -> Self {
        Self {
            dim: table.dim(),
            horizon: table.len(),
            generator: Generator::Table(Arc::new(table)),
        }
    }

    pub fn from_terms(terms: &[LatticeElement]) -> Result<Self> {
        let dim = terms.first().map_or(1, |t| t.dim());
        let mut data = Vec::with_capacity(terms.len() * dim);
        for t in terms {
            if t.dim() != dim {
                return Err(Error::DimensionMismatch {
                    left: dim,
                    right: t.dim(),
                });
            }
            data.extend(t.to_vec());
        }
        Ok(Self::from_table(SequenceTable::from_rows(dim, data)?))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn with_horizon(&self, horizon: usize) -> Self {
        let horizon = match &self.generator {
            Generator::Table(t) => horizon.min(t.len()),
            _ => horizon,
        };
        Self {
            horizon,
            ..self.clone()
        }
    }

    pub fn term(&self, n: usize) -> LatticeElement {
        match &self.generator {
            Generator::Element(f) => f(n),
            Generator::Raw(f) => {
                let mut buf = vec![0.0; self.dim];
                f(n, &mut buf);
                LatticeElement::new(buf).expect("generated term")
            }
            Generator::Table(t) => t.element(n),
        }
    }

    /// Evaluates `x_1, …, x_horizon`.
    pub fn table(&self) -> Result<SequenceTable> {
        if let Generator::Table(t) = &self.generator {
            return Ok(t.truncate(self.horizon));
        }
        let mut data = vec![0.0; self.horizon * self.dim];
        for n in 1..=self.horizon {
            let row = &mut data[(n - 1) * self.dim..n * self.dim];
            match &self.generator {
                Generator::Element(f) => {
                    let t = f(n);
                    if t.dim() != self.dim {
                        return Err(Error::DimensionMismatch {
                            left: self.dim,
                            right: t.dim(),
                        });
                    }
                    for (i, r) in row.iter_mut().enumerate() {
                        *r = t.get_extended(i);
                    }
                }
                Generator::Raw(f) => f(n, row),
                Generator::Table(_) => unreachable!(),
            }
        }
        SequenceTable::from_rows(self.dim, data)
    }
}
