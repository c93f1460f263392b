//! Named inputs shared by the experiments, and the catalog printed by
//! `rieszlab list-fixtures`.

use std::f64::consts::{E, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rieszlab::lattice::LatticeElement;
use rieszlab::measure::{Interval, IntervalSet, LatticeFunction, MeasureSpace};
use rieszlab::modular::ConvexPhi;
use rieszlab::stochastic::Integrand;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Fixture {
    pub id: &'static str,
    pub module: &'static str,
    /// What the fixture is, in one line.
    pub anchor: &'static str,
}

pub const CATALOG: &[Fixture] = &[
    Fixture { id: "moment-kernel", module: "operators", anchor: "moment kernel, L̃_n(t) = n·tⁿ on (0,1) with Haar measure dt/t" },
    Fixture { id: "moving-average", module: "operators", anchor: "moving-average kernel n·χ[s, s+1/n](t) on ℝ with Lebesgue measure" },
    Fixture { id: "ramp", module: "measure_integral", anchor: "ramp t·χ(0,1], modular-convergence subject" },
    Fixture { id: "log-tent", module: "measure_integral", anchor: "log tent max(0, 1 − |ln t|/ln 4), supported in [1/4, 4]" },
    Fixture { id: "tent", module: "measure_integral", anchor: "tent on [0,1] peaked at 1/2" },
    Fixture { id: "vitali-flat", module: "measure_integral", anchor: "χ(0,1/n), meets the Vitali hypotheses" },
    Fixture { id: "vitali-spikes", module: "measure_integral", anchor: "n·χ(0,1/n), Vitali counterexample with ∫ f_n = 1" },
    Fixture { id: "integral-suite", module: "measure_integral", anchor: "20 bounded integrands with adaptive-quadrature references" },
    Fixture { id: "standard-bank", module: "convergence", anchor: "sequences with closed-form limits under each structure" },
    Fixture { id: "jensen-triples", module: "modular_orlicz", anchor: "seeded random admissible (φ, h, f) triples" },
    Fixture { id: "jensen-closed", module: "modular_orlicz", anchor: "φ = x², h = χ[0,1], f = t, gap 1/12" },
    Fixture { id: "ito-one", module: "stochastic", anchor: "integrand f ≡ 1, ∫ dB = B_T" },
    Fixture { id: "ito-t", module: "stochastic", anchor: "integrand f(t) = t, E(∫ t dB)² = T³/3" },
    Fixture { id: "ito-step", module: "stochastic", anchor: "step integrand 1 on [0, T/2), 2 after" },
];

/// The catalog, optionally restricted to one module.
pub fn list_fixtures<'a>(registry: &'a [Fixture], module: Option<&str>) -> Vec<&'a Fixture> {
    registry.iter().filter(|f| module.is_none_or(|m| f.module == m)).collect()
}

pub fn lookup(id: &str) -> Option<&'static Fixture> {
    CATALOG.iter().find(|f| f.id == id)
}

/// `t·χ_(0,1]`.
pub fn ramp() -> LatticeFunction {
    LatticeFunction::scalar(|t| if t > 0.0 && t <= 1.0 { t } else { 0.0 })
        .with_support(Interval { lo: 0.0, hi: 1.0 })
        .with_breaks(&[1.0])
}

/// `max(0, 1 − |ln t|/ln 4)`.
pub fn log_tent() -> LatticeFunction {
    let w = 4f64.ln();
    LatticeFunction::scalar(move |t| (1.0 - t.ln().abs() / w).max(0.0))
        .with_support(Interval { lo: 0.25, hi: 4.0 })
        .with_breaks(&[0.25, 1.0, 4.0])
}

pub fn tent() -> LatticeFunction {
    LatticeFunction::tent(0.0, 0.5, 1.0, 1.0)
}

fn iv(lo: f64, hi: f64) -> Interval {
    Interval { lo, hi }
}

pub fn vitali_flat(n: usize) -> LatticeFunction {
    LatticeFunction::indicator(iv(0.0, 1.0 / n as f64), &LatticeElement::scalar(1.0))
}

pub fn vitali_spike(n: usize) -> LatticeFunction {
    LatticeFunction::indicator(iv(0.0, 1.0 / n as f64), &LatticeElement::scalar(n as f64))
}

/// An integrand of the integral suite with its domain and set.
#[derive(Clone, Debug)]
pub struct SuiteCase {
    pub id: &'static str,
    pub f: LatticeFunction,
    pub set: IntervalSet,
    pub ms: MeasureSpace,
}

fn case(id: &'static str, f: LatticeFunction, lo: f64, hi: f64, haar: bool) -> SuiteCase {
    let ms = if haar {
        MeasureSpace::haar()
    } else {
        MeasureSpace::lebesgue(lo, hi).expect("suite intervals are valid")
    };
    SuiteCase {
        id,
        f,
        set: IntervalSet::single(iv(lo, hi)),
        ms,
    }
}

/// Twenty bounded integrands on compact sets, Lebesgue and Haar.
pub fn integral_suite() -> Vec<SuiteCase> {
    let s = |h: fn(f64) -> f64| LatticeFunction::scalar(h);
    let pair = LatticeElement::from_slice(&[1.0, -2.0]);
    vec![
        case("t", s(|t| t), 0.0, 1.0, false),
        case("t^2", s(|t| t * t), 0.0, 1.0, false),
        case("sin 3t", s(|t| (3.0 * t).sin()), 0.0, 1.0, false),
        case("t cos 2t", s(|t| t * (2.0 * t).cos()), -1.0, 2.0, false),
        case("e^t", s(f64::exp), 0.0, 1.0, false),
        case("1/(1+t^2)", s(|t| 1.0 / (1.0 + t * t)), -2.0, 2.0, false),
        case("sqrt t", s(|t| t.max(0.0).sqrt()), 0.0, 1.0, false),
        case("|t - 0.3|", s(|t| (t - 0.3).abs()).with_breaks(&[0.3]), 0.0, 1.0, false),
        case("tent", tent().with_breaks(&[0.5]), 0.0, 1.0, false),
        case(
            "indicator [0.2, 0.7]",
            LatticeFunction::indicator(iv(0.2, 0.7), &LatticeElement::scalar(1.0)).with_breaks(&[0.2, 0.7]),
            0.0,
            1.0,
            false,
        ),
        case("step 1|3", s(|t| if t < 0.5 { 1.0 } else { 3.0 }).with_breaks(&[0.5]), 0.0, 1.0, false),
        case("ln(1+t)", s(|t| t.ln_1p()), 0.0, 2.0, false),
        case("t^3 - t", s(|t| t * t * t - t), -1.0, 1.5, false),
        case("sin t (1,-2)", LatticeFunction::along(f64::sin, &pair), 0.0, PI, false),
        case(
            "(t, t^2)",
            LatticeFunction::new(2, |t, out| {
                out[0] = t;
                out[1] = t * t;
            }),
            0.0,
            1.0,
            false,
        ),
        case("exp(-t^2)", s(|t| (-t * t).exp()), -3.0, 3.0, false),
        case("haar 1", s(|_| 1.0), 1.0, E, true),
        case("haar ln t", s(f64::ln), 1.0, 4.0, true),
        case("haar log tent", log_tent(), 0.25, 4.0, true),
        case("haar t", s(|t| t), 0.5, 2.0, true),
    ]
}

/// An admissible Jensen triple: convex `φ` with `φ(0) = 0`, a weight
/// `h ≥ 0` with `∫h ≤ 1` on `[0,1]`, and a bounded `f` with values in `ℝ²`.
#[derive(Clone, Debug)]
pub struct JensenTriple {
    pub phi: ConvexPhi,
    pub h: LatticeFunction,
    pub f: LatticeFunction,
    pub label: String,
}

pub fn jensen_triples(count: usize, seed: u64) -> Vec<JensenTriple> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let (phi, pname) = match rng.random_range(0..4) {
                0 => (ConvexPhi::square(), "square".to_string()),
                1 => {
                    let p = rng.random_range(3..=5u32);
                    (ConvexPhi::power(p).expect("p ≥ 3"), format!("power({p})"))
                }
                2 => (ConvexPhi::exp_minus_one(), "exp(|t|)-1".to_string()),
                _ => (ConvexPhi::lifted("|t|", f64::abs, None), "|t|".to_string()),
            };
            let w: f64 = rng.random_range(0.05..=1.0);
            let b: f64 = rng.random_range(-1.0..=1.0);
            let k = rng.random_range(1..=4) as f64;
            let h = LatticeFunction::scalar(move |t| w * (1.0 + b * (2.0 * PI * k * t).cos()));
            let c: [f64; 6] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
            let f = LatticeFunction::new(2, move |t, out| {
                out[0] = c[0] * (c[1] * 3.0 * t + c[2]).sin();
                out[1] = c[3] + c[4] * t + c[5] * t * t / 2.0;
            });
            JensenTriple {
                phi,
                h,
                f,
                label: format!("{pname}, w = {w:.3}"),
            }
        })
        .collect()
}

/// `(integrand, ∫₀^T f² dt)` for the Itô fixtures.
pub fn ito_integrand(id: &str, t_end: f64) -> Option<(Integrand, f64)> {
    match id {
        "ito-one" => Some((Integrand::deterministic("one", |_| 1.0), t_end)),
        "ito-t" => Some((Integrand::deterministic("t", |t| t), t_end.powi(3) / 3.0)),
        "ito-step" => Some((
            Integrand::step(&[t_end / 2.0], &[1.0, 2.0]).expect("valid step"),
            t_end / 2.0 + 4.0 * t_end / 2.0,
        )),
        _ => None,
    }
}
