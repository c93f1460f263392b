//! Quadrature in a single real coordinate.
//!
//! Two fixed-resolution rules (composite midpoint with a Richardson check,
//! composite Gauss–Legendre) serve the lattice integrals; an adaptive
//! Gauss–Kronrod rule with dyadic shells toward the endpoints serves as the
//! independent reference. Infinite ranges are exhausted by shells of
//! doubling width, and a shell series that does not decay is reported as
//! divergent.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss–Legendre order must be positive");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi's initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }
}

thread_local! {
    static GL_CACHE: RefCell<HashMap<usize, Rc<GaussLegendre>>> = RefCell::new(HashMap::new());
}

/// The `n`-point rule, computed once per thread.
fn gauss_legendre(n: usize) -> Rc<GaussLegendre> {
    GL_CACHE.with(|c| c.borrow_mut().entry(n).or_insert_with(|| Rc::new(GaussLegendre::new(n))).clone())
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Fixed-resolution rule applied on every segment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum QuadratureRule {
    /// Composite midpoint with `nodes` points, extrapolated against the
    /// half-resolution rule.
    Midpoint { nodes: usize },
    /// Composite Gauss–Legendre with `panels` panels of `order` points.
    GaussLegendre { panels: usize, order: usize },
}

impl Default for QuadratureRule {
    fn default() -> Self {
        QuadratureRule::Midpoint { nodes: 1 << 14 }
    }
}

impl QuadratureRule {
    pub fn resolution(&self) -> usize {
        match *self {
            QuadratureRule::Midpoint { nodes } => nodes,
            QuadratureRule::GaussLegendre { panels, order } => panels * order,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            QuadratureRule::Midpoint { nodes } if nodes >= 2 => Ok(()),
            QuadratureRule::GaussLegendre { panels, order } if panels >= 1 && order >= 1 => Ok(()),
            _ => Err(Error::Parameter(format!("degenerate quadrature rule {self:?}"))),
        }
    }
}

/// A vector integrand `x ↦ g(x) ∈ ℝ^dim`, written into the output slice.
pub trait Integrand {
    fn dim(&self) -> usize;
    fn eval(&self, x: f64, out: &mut [f64]);
}

impl<F: Fn(f64, &mut [f64])> Integrand for (usize, F) {
    fn dim(&self) -> usize {
        self.0
    }

    fn eval(&self, x: f64, out: &mut [f64]) {
        (self.1)(x, out)
    }
}

fn midpoint_sum(g: &dyn Integrand, a: f64, b: f64, n: usize, acc: &mut [f64], buf: &mut [f64]) {
    let h = (b - a) / n as f64;
    acc.fill(0.0);
    for k in 0..n {
        g.eval(a + (k as f64 + 0.5) * h, buf);
        for (s, v) in acc.iter_mut().zip(buf.iter()) {
            *s += v;
        }
    }
    for s in acc.iter_mut() {
        *s *= h;
    }
}

fn gl_sum(
    g: &dyn Integrand,
    a: f64,
    b: f64,
    panels: usize,
    gl: &GaussLegendre,
    acc: &mut [f64],
    buf: &mut [f64],
) {
    let h = (b - a) / panels as f64;
    acc.fill(0.0);
    for p in 0..panels {
        let c = a + (p as f64 + 0.5) * h;
        for (x, w) in gl.nodes.iter().zip(&gl.weights) {
            g.eval(c + 0.5 * h * x, buf);
            for (s, v) in acc.iter_mut().zip(buf.iter()) {
                *s += 0.5 * h * w * v;
            }
        }
    }
}

/// Integrates `g` over the finite segment `[a, b]` and returns an error
/// estimate (max over entries).
pub fn integrate_segment(
    rule: &QuadratureRule,
    g: &dyn Integrand,
    a: f64,
    b: f64,
    out: &mut [f64],
) -> f64 {
    let dim = g.dim();
    out.fill(0.0);
    if b <= a {
        return 0.0;
    }
    let mut buf = vec![0.0; dim];
    let mut coarse = vec![0.0; dim];
    match *rule {
        QuadratureRule::Midpoint { nodes } => {
            midpoint_sum(g, a, b, nodes, out, &mut buf);
            midpoint_sum(g, a, b, (nodes / 2).max(1), &mut coarse, &mut buf);
            let mut err: f64 = 0.0;
            for (f, c) in out.iter_mut().zip(&coarse) {
                let d = (*f - c) / 3.0;
                err = err.max(d.abs());
                *f += d;
            }
            err
        }
        QuadratureRule::GaussLegendre { panels, order } => {
            let gl = gauss_legendre(order);
            gl_sum(g, a, b, panels, &gl, out, &mut buf);
            if panels >= 2 {
                gl_sum(g, a, b, panels / 2, &gl, &mut coarse, &mut buf);
                out.iter().zip(&coarse).fold(0.0, |m, (f, c)| m.max((f - c).abs()))
            } else {
                0.0
            }
        }
    }
}

/// Result of a fixed-rule integral over a possibly infinite range.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RuleIntegral {
    pub value: Vec<f64>,
    /// Richardson or panel-halving error estimate, summed over segments.
    pub error: f64,
    /// Largest contribution of the outermost exhausting shell.
    pub last_shell: f64,
    pub shells: usize,
}

/// Integrates over `[xa, xb]` (either end may be infinite), splitting at
/// `breaks`. Infinite ends are exhausted by shells of widths `1, 2, 4, …`
/// up to `reach`; the integral is divergent when the outermost shell still
/// carries more than `tol·max(1, |I|)`.
pub fn rule_integral(
    rule: &QuadratureRule,
    g: &dyn Integrand,
    xa: f64,
    xb: f64,
    breaks: &[f64],
    reach: f64,
    tol: f64,
) -> Result<RuleIntegral> {
    rule.validate()?;
    let dim = g.dim();
    let mut value = vec![0.0; dim];
    let mut seg = vec![0.0; dim];
    let mut error = 0.0;
    if !(xa < xb) {
        return Ok(RuleIntegral {
            value,
            error,
            last_shell: 0.0,
            shells: 0,
        });
    }
    let (lo, hi) = core_range(xa, xb);
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|b| b.is_finite()).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    error += integrate_pieces(rule, g, lo, hi, &cuts, &mut seg);
    add(&mut value, &seg);
    let mut last_shell: f64 = 0.0;
    let mut shells = 0;
    for (inf, anchor, dir) in [(xa == f64::NEG_INFINITY, lo, -1.0), (xb == f64::INFINITY, hi, 1.0)] {
        if !inf {
            continue;
        }
        let mut width: f64 = 1.0;
        let mut covered: f64 = 0.0;
        let mut last: f64 = 0.0;
        while covered < reach {
            let next = (covered + width).min(reach);
            let (start, end) = (anchor + dir * covered, anchor + dir * next);
            covered = next;
            let (a, b) = if dir < 0.0 { (end, start) } else { (start, end) };
            error += integrate_pieces(rule, g, a, b, &cuts, &mut seg);
            last = seg.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
            add(&mut value, &seg);
            shells += 1;
            width *= 2.0;
        }
        last_shell = last_shell.max(last);
    }
    check_finite(&value)?;
    let scale = value.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if last_shell > tol * scale {
        return Err(Error::Divergent(format!(
            "outermost exhausting shell still contributes {last_shell:e}"
        )));
    }
    Ok(RuleIntegral {
        value,
        error,
        last_shell,
        shells,
    })
}

/// `∫_a^b g` into `out`, split at the sorted `cuts` that fall inside.
fn integrate_pieces(rule: &QuadratureRule, g: &dyn Integrand, a: f64, b: f64, cuts: &[f64], out: &mut [f64]) -> f64 {
    let inner = &cuts[cuts.partition_point(|c| *c <= a)..cuts.partition_point(|c| *c < b)];
    if inner.is_empty() {
        return integrate_segment(rule, g, a, b, out);
    }
    out.fill(0.0);
    let mut piece = vec![0.0; out.len()];
    let mut error = 0.0;
    let mut left = a;
    for &right in inner.iter().chain([b].iter()) {
        error += integrate_segment(rule, g, left, right, &mut piece);
        add(out, &piece);
        left = right;
    }
    error
}

fn core_range(xa: f64, xb: f64) -> (f64, f64) {
    match (xa.is_finite(), xb.is_finite()) {
        (true, true) => (xa, xb),
        (true, false) => (xa, xa.max(0.0) + 1.0),
        (false, true) => (xb.min(0.0) - 1.0, xb),
        (false, false) => (-1.0, 1.0),
    }
}

fn add(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

fn check_finite(v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Divergent("non-finite quadrature sum".into()))
    }
}

// 15-point Kronrod extension of the 7-point Gauss rule.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One Gauss–Kronrod (7, 15) panel: value and `|K15 − G7|`.
pub fn gk15(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive bisection with the (7, 15) pair until the local error estimate
/// falls below `tol` scaled to the subinterval.
pub fn adaptive_gk(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> (f64, f64) {
    struct Run<'a> {
        f: &'a mut dyn FnMut(f64) -> f64,
        width: f64,
        tol: f64,
        budget: usize,
    }
    fn rec(run: &mut Run<'_>, a: f64, b: f64, depth: usize, value: f64, err: f64) -> (f64, f64) {
        // below round-off there is nothing left to resolve
        let floor = 64.0 * f64::EPSILON * value.abs();
        if err <= run.tol * (b - a) / run.width
            || err <= floor
            || depth == 0
            || run.budget == 0
            || (b - a) <= 1e-14 * a.abs().max(1.0)
        {
            return (value, err);
        }
        run.budget -= 1;
        let c = 0.5 * (a + b);
        let (lv, le) = gk15(run.f, a, c);
        let (rv, re) = gk15(run.f, c, b);
        let (l, el) = rec(run, a, c, depth - 1, lv, le);
        let (r, er) = rec(run, c, b, depth - 1, rv, re);
        (l + r, el + er)
    }
    if b <= a {
        return (0.0, 0.0);
    }
    let (v, e) = gk15(f, a, b);
    let mut run = Run {
        f,
        width: b - a,
        tol,
        budget: 20_000,
    };
    rec(&mut run, a, b, 40, v, e)
}

/// Number of dyadic shells used toward each finite endpoint.
const ENDPOINT_SHELLS: usize = 60;

/// Reference integral of a scalar function over `[xa, xb]` by adaptive
/// Gauss–Kronrod. Each finite piece between breakpoints is exhausted by
/// dyadic shells toward both of its endpoints, and infinite ends by shells
/// of doubling width up to `reach`. A shell series that has not decayed
/// below `tol·max(1, |I|)` is reported as divergent.
pub fn reference_integral(
    f: &mut dyn FnMut(f64) -> f64,
    xa: f64,
    xb: f64,
    breaks: &[f64],
    reach: f64,
    tol: f64,
) -> Result<f64> {
    if !(xa < xb) {
        return Ok(0.0);
    }
    let local = tol * 1e-4;
    let (lo, hi) = core_range(xa, xb);
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|b| b.is_finite()).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut points = vec![lo];
    points.extend(cuts.iter().copied().filter(|&b| b > lo && b < hi));
    points.push(hi);
    let mut total = 0.0;
    let mut tail: f64 = 0.0;
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        for dir in [-1.0, 1.0] {
            let end = if dir < 0.0 { a } else { b };
            let mut last = 0.0;
            for k in 0..ENDPOINT_SHELLS {
                // shell between c + dir·h(1 − 2^-k) and c + dir·h(1 − 2^-(k+1))
                let p = c + dir * h * (1.0 - 0.5f64.powi(k as i32));
                let q = c + dir * h * (1.0 - 0.5f64.powi(k as i32 + 1));
                let (p, q) = if k + 1 == ENDPOINT_SHELLS { (p, end) } else { (p, q) };
                let (u, v) = if p < q { (p, q) } else { (q, p) };
                if v <= u {
                    break;
                }
                let (val, _) = adaptive_gk(f, u, v, local);
                total += val;
                last = val;
            }
            // The final shell reaches the endpoint; compare the one before.
            tail = tail.max(last.abs());
        }
    }
    for (inf, anchor, dir) in [(xa == f64::NEG_INFINITY, lo, -1.0), (xb == f64::INFINITY, hi, 1.0)] {
        if !inf {
            continue;
        }
        let mut width: f64 = 1.0;
        let mut covered: f64 = 0.0;
        let mut last = 0.0;
        while covered < reach {
            let next = (covered + width).min(reach);
            let (start, end) = (anchor + dir * covered, anchor + dir * next);
            covered = next;
            let (a, b) = if dir < 0.0 { (end, start) } else { (start, end) };
            let inner = &cuts[cuts.partition_point(|c| *c <= a)..cuts.partition_point(|c| *c < b)];
            let mut val = 0.0;
            let mut left = a;
            for &right in inner.iter().chain([b].iter()) {
                val += adaptive_gk(f, left, right, local).0;
                left = right;
            }
            total += val;
            last = val;
            width *= 2.0;
        }
        tail = tail.max(f64::abs(last));
    }
    if !total.is_finite() {
        return Err(Error::Divergent("non-finite reference sum".into()));
    }
    if tail > tol * total.abs().max(1.0) {
        return Err(Error::Divergent(format!(
            "exhausting shells do not decay (last {tail:e})"
        )));
    }
    Ok(total)
}
