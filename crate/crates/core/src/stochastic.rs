//! Brownian ensembles and forward (Itô) sums over them.
//!
//! `L²` and `L⁰` are realized as finite sample ensembles: a random
//! variable is one value per path, ordered componentwise. Gaussian
//! increments come from `rand_distr::StandardNormal` (ziggurat) driven by
//! a ChaCha8 stream per path, so path `i` depends only on `(seed, i)`.

use std::io::{BufRead, Write};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::convergence::Verdict;
use crate::error::{Error, Result};
use crate::lattice::LatticeElement;

/// Name of the Gaussian generator, for report headers.
pub const GAUSSIAN_METHOD: &str = "ziggurat (rand_distr::StandardNormal) over ChaCha8, stream = path index";

/// Uniform grid `t_k = k·T/steps`, `k = 0..=steps`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TimeGrid {
    pub horizon: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) || steps == 0 {
            return Err(Error::Parameter(format!(
                "time grid needs T > 0 and at least one step, got T = {horizon}, steps = {steps}"
            )));
        }
        Ok(Self { horizon, steps })
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps {
            self.horizon
        } else {
            k as f64 * self.dt()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.time(k)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BrownianEnsemble {
    pub grid: TimeGrid,
    pub seed: u64,
    paths: usize,
    /// Row-major, one row of `steps + 1` values per path.
    values: Vec<f64>,
}

/// `M` independent standard Brownian paths on `grid`.
pub fn simulate_brownian(m: usize, grid: &TimeGrid, seed: u64) -> Result<BrownianEnsemble> {
    if m < 2 {
        return Err(Error::Parameter(format!("an ensemble needs at least 2 paths, got {m}")));
    }
    let width = grid.steps + 1;
    let sd = grid.dt().sqrt();
    let mut values = vec![0.0; m * width];
    for (i, row) in values.chunks_exact_mut(width).enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let mut b = 0.0;
        for v in &mut row[1..] {
            let z: f64 = StandardNormal.sample(&mut rng);
            b += sd * z;
            *v = b;
        }
    }
    Ok(BrownianEnsemble {
        grid: *grid,
        seed,
        paths: m,
        values,
    })
}

impl BrownianEnsemble {
    pub fn paths(&self) -> usize {
        self.paths
    }

    pub fn path(&self, i: usize) -> &[f64] {
        let w = self.grid.steps + 1;
        &self.values[i * w..(i + 1) * w]
    }

    /// `B_{t_k}` as an element of the ensemble lattice.
    pub fn at(&self, k: usize) -> Result<LatticeElement> {
        if k > self.grid.steps {
            return Err(Error::Parameter(format!("time index {k} beyond {}", self.grid.steps)));
        }
        LatticeElement::new((0..self.paths).map(|i| self.path(i)[k]).collect())
    }

    pub fn terminal(&self) -> LatticeElement {
        self.at(self.grid.steps).expect("the last index is on the grid")
    }

    /// `B_{t_{k+1}} − B_{t_k}` per path.
    pub fn increment(&self, k: usize) -> Result<Vec<f64>> {
        if k >= self.grid.steps {
            return Err(Error::Parameter(format!("increment {k} beyond {}", self.grid.steps - 1)));
        }
        Ok((0..self.paths).map(|i| {
            let p = self.path(i);
            p[k + 1] - p[k]
        }).collect())
    }

    /// CSV layout: a header row of times, then one row per path.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        let header: Vec<String> = self.grid.times().iter().map(|t| format!("{t:e}")).collect();
        writeln!(w, "{}", header.join(","))?;
        for i in 0..self.paths {
            let row: Vec<String> = self.path(i).iter().map(|v| format!("{v:e}")).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Reads the layout of [`write_csv`](Self::write_csv). The header must be
    /// a uniform grid starting at 0 and every path must start at 0.
    pub fn read_csv(r: impl BufRead, seed: u64) -> Result<Self> {
        let mut lines = r.lines();
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidValue(format!("bad number {s:?}: {e}")))
        };
        let header = lines.next().ok_or_else(|| Error::InvalidValue("empty ensemble file".into()))??;
        let times: Vec<f64> = header.split(',').map(parse).collect::<Result<_>>()?;
        if times.len() < 2 || times[0] != 0.0 {
            return Err(Error::InvalidValue("header must list times from 0".into()));
        }
        let grid = TimeGrid::new(*times.last().unwrap(), times.len() - 1)?;
        let slack = 1e-9 * grid.horizon;
        if times.iter().enumerate().any(|(k, t)| (t - grid.time(k)).abs() > slack) {
            return Err(Error::InvalidValue("time header is not a uniform grid".into()));
        }
        let mut values = Vec::new();
        let mut paths = 0;
        for line in lines {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let row: Vec<f64> = line.split(',').map(parse).collect::<Result<_>>()?;
            if row.len() != times.len() || row[0] != 0.0 {
                return Err(Error::InvalidValue(format!("path {paths} has the wrong length or B0 ≠ 0")));
            }
            values.extend(row);
            paths += 1;
        }
        if paths < 2 {
            return Err(Error::Parameter(format!("an ensemble needs at least 2 paths, got {paths}")));
        }
        Ok(Self {
            grid,
            seed,
            paths,
            values,
        })
    }
}

type ProcessFn = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;

/// A scalar process `f(t, ω)` read on the grid. The closure receives the
/// time and a path prefix: `B_{t_0..=t_k}` for adapted processes, the
/// whole path for processes declared to look ahead.
#[derive(Clone)]
pub struct Integrand {
    label: String,
    f: ProcessFn,
    lookahead: bool,
    deterministic: bool,
}

impl std::fmt::Debug for Integrand {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Integrand")
            .field("label", &self.label)
            .field("lookahead", &self.lookahead)
            .finish_non_exhaustive()
    }
}

impl Integrand {
    pub fn deterministic(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            label: label.into(),
            f: Arc::new(move |t, _| f(t)),
            lookahead: false,
            deterministic: true,
        }
    }

    /// Right-continuous step function: `values[j]` on `[breaks[j−1], breaks[j])`
    /// with `breaks` increasing and `values.len() == breaks.len() + 1`.
    pub fn step(breaks: &[f64], values: &[f64]) -> Result<Self> {
        if values.len() != breaks.len() + 1 || breaks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Parameter(
                "step integrand needs increasing breaks and one more value than breaks".into(),
            ));
        }
        if values.iter().chain(breaks).any(|v| !v.is_finite()) {
            return Err(Error::InvalidValue("step integrand must be finite".into()));
        }
        let (b, v) = (breaks.to_vec(), values.to_vec());
        Ok(Self::deterministic("step", move |t| v[b.partition_point(|x| *x <= t)]))
    }

    pub fn adapted(label: impl Into<String>, f: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            label: label.into(),
            f: Arc::new(f),
            lookahead: false,
            deterministic: false,
        }
    }

    /// A process that may read the future of the path. Itô sums refuse it.
    pub fn lookahead(label: impl Into<String>, f: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            label: label.into(),
            f: Arc::new(f),
            lookahead: true,
            deterministic: false,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_deterministic(&self) -> bool {
        self.deterministic
    }

    pub fn eval(&self, t: f64, history: &[f64]) -> f64 {
        (self.f)(t, history)
    }
}

/// Forward sums `Σ_k f(t_k)·(B_{t_{k+1}} − B_{t_k})`, one per path.
pub fn ito_integrate(f: &Integrand, b: &BrownianEnsemble) -> Result<LatticeElement> {
    if f.lookahead {
        return Err(Error::Precondition(format!(
            "integrand {} is not adapted: it reads the path beyond t",
            f.label
        )));
    }
    let grid = &b.grid;
    let coeffs: Option<Vec<f64>> = f
        .deterministic
        .then(|| (0..grid.steps).map(|k| f.eval(grid.time(k), &[])).collect());
    let mut out = Vec::with_capacity(b.paths);
    for i in 0..b.paths {
        let p = b.path(i);
        let mut sum = 0.0;
        for k in 0..grid.steps {
            let c = match &coeffs {
                Some(c) => c[k],
                None => f.eval(grid.time(k), &p[..=k]),
            };
            if c != 0.0 {
                sum += c * (p[k + 1] - p[k]);
            }
        }
        out.push(sum);
    }
    LatticeElement::new(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IsometryReport {
    pub integrand: String,
    pub paths: usize,
    pub steps: usize,
    /// Sample mean of `(∫f dB)²`.
    pub second_moment: f64,
    /// `∫₀^T f² dt` as supplied by the caller.
    pub reference: f64,
    /// `Σ f(t_k)² Δt`, the exact second moment of the forward sum.
    pub grid_reference: f64,
    /// Standard error of the sample mean of `(∫f dB)²`.
    pub standard_error: f64,
    pub sample_mean: f64,
    pub verdict: Verdict,
}

/// `|E[(∫f dB)²] − ∫f² dt| ≤ 3·SE` for a deterministic `f`, with the
/// reference `∫₀^T f² dt` supplied by the caller.
pub fn isometry_check(f: &Integrand, b: &BrownianEnsemble, reference: f64) -> Result<IsometryReport> {
    if !f.deterministic {
        return Err(Error::Precondition(format!("isometry check needs a deterministic integrand, {} is not", f.label)));
    }
    let x = ito_integrate(f, b)?;
    let m = b.paths as f64;
    let sq: Vec<f64> = x.values().iter().map(|v| v * v).collect();
    let mean = sq.iter().sum::<f64>() / m;
    let var = sq.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (m - 1.0);
    let se = (var / m).sqrt();
    let grid = &b.grid;
    let grid_reference = (0..grid.steps).map(|k| f.eval(grid.time(k), &[]).powi(2)).sum::<f64>() * grid.dt();
    let gap = (mean - reference).abs();
    Ok(IsometryReport {
        integrand: f.label.clone(),
        paths: b.paths,
        steps: grid.steps,
        second_moment: mean,
        reference,
        grid_reference,
        standard_error: se,
        sample_mean: x.values().iter().sum::<f64>() / m,
        verdict: Verdict::from_bool(gap <= 3.0 * se || gap == 0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> TimeGrid {
        TimeGrid::new(1.0, 16).unwrap()
    }

    #[test]
    fn paths_start_at_zero_and_are_seeded() {
        let b = simulate_brownian(50, &grid(), 3).unwrap();
        assert!(b.at(0).unwrap().is_zero());
        assert_eq!(b, simulate_brownian(50, &grid(), 3).unwrap());
        assert_ne!(b, simulate_brownian(50, &grid(), 4).unwrap());
        // a path does not depend on how many others are drawn
        let small = simulate_brownian(5, &grid(), 3).unwrap();
        assert_eq!(small.path(4), b.path(4));
        assert!(matches!(simulate_brownian(1, &grid(), 3), Err(Error::Parameter(_))));
    }

    #[test]
    fn constant_integrand_telescopes() {
        let b = simulate_brownian(200, &grid(), 11).unwrap();
        let one = ito_integrate(&Integrand::deterministic("one", |_| 1.0), &b).unwrap();
        for (x, y) in one.values().iter().zip(b.terminal().values()) {
            assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
        let zero = ito_integrate(&Integrand::deterministic("zero", |_| 0.0), &b).unwrap();
        assert!(zero.is_zero());
        let r = isometry_check(&Integrand::deterministic("zero", |_| 0.0), &b, 0.0).unwrap();
        assert_eq!((r.second_moment, r.verdict), (0.0, Verdict::Pass));
    }

    #[test]
    fn lookahead_is_refused() {
        let b = simulate_brownian(4, &grid(), 0).unwrap();
        let peek = Integrand::lookahead("peek", |_, p| *p.last().unwrap());
        assert!(matches!(ito_integrate(&peek, &b), Err(Error::Precondition(_))));
    }

    #[test]
    fn adapted_integrand_sees_only_the_past() {
        let b = simulate_brownian(20, &grid(), 5).unwrap();
        // ∫ B dB = (B_T² − Σ(ΔB)²)/2 for the forward sum
        let x = ito_integrate(&Integrand::adapted("B", |_, h| *h.last().unwrap()), &b).unwrap();
        for i in 0..20 {
            let p = b.path(i);
            let qv: f64 = p.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
            let want = (p[16] * p[16] - qv) / 2.0;
            assert!((x.values()[i] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn redundant_breaks_do_not_change_the_sum() {
        let b = simulate_brownian(30, &grid(), 9).unwrap();
        let f = Integrand::step(&[0.5], &[1.0, -2.0]).unwrap();
        let g = Integrand::step(&[0.25, 0.5, 0.75], &[1.0, 1.0, -2.0, -2.0]).unwrap();
        assert_eq!(ito_integrate(&f, &b).unwrap(), ito_integrate(&g, &b).unwrap());
        assert!(Integrand::step(&[0.5, 0.25], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let b = simulate_brownian(3, &TimeGrid::new(2.0, 5).unwrap(), 1).unwrap();
        let mut buf = Vec::new();
        b.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("0e0,4e-1,"));
        let back = BrownianEnsemble::read_csv(&buf[..], 1).unwrap();
        assert_eq!(back, b);
    }
}
