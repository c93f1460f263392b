//! Acceptance criteria, one line each. Runs without the libtest harness so
//! the lines always reach stdout:
//!
//! ```text
//! cargo test -p rieszlab-cli --test acceptance
//! ```
//!
//! The process exits non-zero when a criterion fails in a way that is not
//! recorded in the README. Criterion 5 is reported as FAIL: Cesàro and
//! almost convergence violate 2.1.d on `(−1)ⁿu`, and the line checks that
//! this is the only clause they fail.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rieszlab::convergence::{
    axiom_audit, standard_bank, AuditReport, ConvergenceStructure, LimsupKind, LimsupOperator, SignFlipped,
    Verdict,
};
use rieszlab::lattice::{LatticeElement, OSequence};
use rieszlab::measure::{
    integrate_with, vitali_audit, FunctionSequence, Interval, IntervalSet, LatticeFunction, MeasureSpace,
    Partition, Probe,
};
use rieszlab::modular::{jensen_gap, modular_convergence_search, modular_eval, ConvexPhi, Modular};
use rieszlab::operators::{
    operator_convergence_experiment, operator_output, ExperimentMode, ExperimentSettings, KernelOperator,
    MellinKernelFamily,
};
use rieszlab::quadrature::QuadratureRule;
use rieszlab::stochastic::{isometry_check, ito_integrate, simulate_brownian, TimeGrid};
use rieszlab_cli::fixtures;

/// Outcome of one criterion.
struct Outcome {
    passed: bool,
    /// Failure documented in the README; does not fail the run.
    known: bool,
    detail: String,
}

impl Outcome {
    fn check(passed: bool, detail: String) -> Self {
        Self { passed, known: false, detail }
    }
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let m = intervals + intervals % 2;
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for k in 1..m {
        s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn c1_tail_identity() -> Outcome {
    let family = MellinKernelFamily::moment();
    let (mut tail_err, mut mass_err) = (0.0f64, 0.0f64);
    for n in 1..=30 {
        for s in family.audit_points() {
            let tail = family.section_mass(n, s, Some(2.0)).unwrap();
            let mass = family.section_mass(n, s, None).unwrap();
            tail_err = tail_err.max((tail - 0.5f64.powi(n as i32)).abs());
            mass_err = mass_err.max((mass - 1.0).abs());
        }
    }
    Outcome::check(
        tail_err <= 1e-8 && mass_err <= 1e-8,
        format!("max |tail − 2⁻ⁿ| = {tail_err:.2e}, max |mass − 1| = {mass_err:.2e}, n ≤ 30, tol 1e-8"),
    )
}

fn c2_constants() -> Outcome {
    let family = MellinKernelFamily::moment();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut palette: Vec<Vec<f64>> = vec![vec![1.0; 3], vec![2.0; 3]];
    for _ in 0..3 {
        palette.push((0..3).map(|_| rng.random_range(-2.0..2.0)).collect());
    }
    let mut worst = 0.0f64;
    for u in &palette {
        let norm = u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let f = LatticeFunction::constant(&LatticeElement::from_slice(u));
        for n in 1..=30 {
            for s in family.audit_points() {
                let v = family.apply(&f, s, n).unwrap();
                let e = v.values().iter().zip(u).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                worst = worst.max(e / norm);
            }
        }
    }
    Outcome::check(worst <= 1e-8, format!("max |T̃ₙu − u|/‖u‖ = {worst:.2e} over 5 units, n ≤ 30, tol 1e-8"))
}

fn c3_modular_law() -> Outcome {
    const HORIZON: usize = 50;
    let rule = QuadratureRule::GaussLegendre { panels: 4, order: 16 };
    let family: Arc<dyn KernelOperator> = Arc::new(MellinKernelFamily::moment().with_rule(rule));
    let cs = ConvergenceStructure::ordinary(2e-2);
    let m = Modular::new(ConvexPhi::square(), MeasureSpace::haar().with_rule(rule), cs);
    let f = fixtures::ramp();
    let outputs: Vec<LatticeFunction> = (1..=HORIZON).map(|n| operator_output(family.clone(), &f, n)).collect();
    let (mut lib_err, mut oracle_err) = (0.0f64, 0.0f64);
    for (i, g) in outputs.iter().enumerate() {
        let n = (i + 1) as f64;
        let expected = 1.0 / (2.0 * (n + 1.0));
        let rho = modular_eval(&m, &g.sub(&f).unwrap()).unwrap().values()[0];
        lib_err = lib_err.max((rho - expected).abs());
        // ∫ (T̃ₙf − f)² dt/t with T̃ₙf(s) = n s/(n+1) on (0,1], n s⁻ⁿ/(n+1) beyond,
        // in the coordinate x = ln s
        let left = simpson(|x| (x.exp() / (n + 1.0)).powi(2), -40.0, 0.0, 4000);
        let right = simpson(|x| (n * (-n * x).exp() / (n + 1.0)).powi(2), 0.0, 40.0 / n, 4000);
        oracle_err = oracle_err.max((left + right - expected).abs());
    }
    let outs = outputs.clone();
    let seq = FunctionSequence::new(HORIZON, move |n| outs[n - 1].clone());
    let search = modular_convergence_search(&m, &seq, &f, 2, 4, Some(family.d1())).unwrap();
    let alpha_ok = search.alpha.is_some_and(|a| a >= 1.0);
    Outcome::check(
        lib_err <= 1e-6 && oracle_err <= 1e-6 && alpha_ok && search.solid,
        format!(
            "max |ρ − 1/(2(n+1))| = {lib_err:.2e} (Simpson oracle {oracle_err:.2e}), n ≤ 50; α = {:?}, solid = {}",
            search.alpha, search.solid
        ),
    )
}

fn c4_uniform() -> Outcome {
    let family: Arc<dyn KernelOperator> =
        Arc::new(MellinKernelFamily::moment().with_rule(QuadratureRule::Midpoint { nodes: 1 << 14 }));
    let settings = ExperimentSettings {
        horizon: 200,
        deltas: vec![2.0],
        audit_horizon: 30,
    };
    let mode = ExperimentMode::Uniform {
        window: Interval { lo: 0.125, hi: 8.0 },
        points: 33,
    };
    let cs = ConvergenceStructure::ordinary(1e-2);
    let r = operator_convergence_experiment(family, &fixtures::log_tent(), &mode, &settings, &cs).unwrap();
    let u = r.uniform.expect("uniform outcome");
    let last = u.sup_error[199];
    // error at the peak s = 1 bounds the sup from below
    let peak = (1.0 - 0.25f64.powi(200)) / (201.0 * 4f64.ln());
    let from = u.strictly_decreasing_from;
    Outcome::check(
        from.is_some_and(|n| n <= 2) && last < 1e-2 && last >= peak - 1e-6,
        format!("strictly decreasing from n = {from:?}, sup-error at n = 200 is {last:.3e} (peak error {peak:.3e})"),
    )
}

fn shape(report: &AuditReport) -> Vec<String> {
    report.failures().iter().map(|a| a.axiom.clone()).collect()
}

fn c5_axioms() -> Outcome {
    const TOL: f64 = 1e-2;
    let bank = standard_bank(100_000);
    let order = ConvergenceStructure::new(
        rieszlab::convergence::ConvergenceKind::Order {
            regulator: OSequence::harmonic(LatticeElement::ones(2), 100),
        },
        TOL,
    );
    let structures = [
        ("ordinary", ConvergenceStructure::ordinary(TOL), LimsupOperator::order()),
        ("order", order, LimsupOperator::order()),
        ("cesàro", ConvergenceStructure::cesaro(TOL), LimsupOperator::new(LimsupKind::Cesaro)),
        (
            "almost",
            ConvergenceStructure::almost(TOL),
            LimsupOperator::new(LimsupKind::Almost { offsets: None }),
        ),
        ("density", ConvergenceStructure::density(0.01, TOL), LimsupOperator::density(0.01)),
    ];
    let mut clean = Vec::new();
    let mut parts = Vec::new();
    let mut documented = true;
    for (name, cs, ls) in &structures {
        let report = axiom_audit(cs, ls, &bank).unwrap();
        let failed = shape(&report);
        if failed.is_empty() {
            clean.push(*name);
            continue;
        }
        parts.push(format!("{name} fails {}", failed.join(", ")));
        let witness = report.get("2.1.d").and_then(|a| a.witness.as_ref()).map(|w| w.sequence.as_str());
        let expected = matches!(*name, "cesàro" | "almost") && failed == ["2.1.d"] && witness == Some("(-1)^n u");
        documented &= expected;
    }
    let broken = axiom_audit(&SignFlipped(ConvergenceStructure::ordinary(TOL)), &LimsupOperator::order(), &bank).unwrap();
    let b = broken.get("2.1.b").expect("2.1.b is audited");
    let witnessed = b.verdict == Verdict::Fail && b.witness.is_some();
    parts.push(format!(
        "broken structure 2.1.b {} with witness {}",
        b.verdict,
        b.witness.as_ref().map(|w| w.sequence.as_str()).unwrap_or("none")
    ));
    let passed = parts.len() == 1 && witnessed;
    Outcome {
        passed,
        known: !passed && documented && witnessed && clean == ["ordinary", "order", "density"],
        detail: format!("{} pass every clause on {} sequences; {}", clean.join(", "), bank.len(), parts.join("; ")),
    }
}

/// Closed-form integrals of the suite, keyed by case id.
fn suite_oracle(id: &str) -> Vec<f64> {
    let erf3 = 0.999_977_909_503_001_4;
    match id {
        "t" => vec![0.5],
        "t^2" => vec![1.0 / 3.0],
        "sin 3t" => vec![(1.0 - 3f64.cos()) / 3.0],
        "t cos 2t" => {
            let anti = |t: f64| t * (2.0 * t).sin() / 2.0 + (2.0 * t).cos() / 4.0;
            vec![anti(2.0) - anti(-1.0)]
        }
        "e^t" => vec![std::f64::consts::E - 1.0],
        "1/(1+t^2)" => vec![2.0 * 2f64.atan()],
        "sqrt t" => vec![2.0 / 3.0],
        "|t - 0.3|" => vec![0.29],
        "tent" => vec![0.5],
        "indicator [0.2, 0.7]" => vec![0.5],
        "step 1|3" => vec![2.0],
        "ln(1+t)" => vec![3.0 * 3f64.ln() - 2.0],
        "t^3 - t" => vec![0.390_625],
        "sin t (1,-2)" => vec![2.0, -4.0],
        "(t, t^2)" => vec![0.5, 1.0 / 3.0],
        "exp(-t^2)" => vec![PI.sqrt() * erf3],
        "haar 1" => vec![1.0],
        "haar ln t" => vec![4f64.ln().powi(2) / 2.0],
        "haar log tent" => vec![4f64.ln()],
        "haar t" => vec![1.5],
        other => panic!("no closed form for suite case {other}"),
    }
}

fn c6_integrals() -> Outcome {
    let cs = ConvergenceStructure::ordinary(1e-4).with_tail_fraction(0.25);
    let suite = fixtures::integral_suite();
    let (mut err, mut gap) = (0.0f64, 0.0f64);
    let mut worst = "";
    for c in &suite {
        let d = integrate_with(&c.f, &c.set, &c.ms, &cs, Partition::Dyadic, Partition::Dyadic.default_levels()).unwrap();
        let t = integrate_with(&c.f, &c.set, &c.ms, &cs, Partition::Triadic, Partition::Triadic.default_levels())
            .unwrap();
        for (i, exact) in suite_oracle(c.id).into_iter().enumerate() {
            let e = (d.value.values()[i] - exact).abs();
            if e > err {
                err = e;
                worst = c.id;
            }
            gap = gap.max((d.value.values()[i] - t.value.values()[i]).abs());
        }
    }
    Outcome::check(
        suite.len() == 20 && err <= 1e-4 && gap <= 2e-4,
        format!(
            "{} cases: max |defining − exact| = {err:.2e} ({worst}), max |dyadic − triadic| = {gap:.2e}",
            suite.len()
        ),
    )
}

fn c7_vitali() -> Outcome {
    const N: usize = 1000;
    let ms = MeasureSpace::lebesgue(0.0, 1.0).unwrap();
    let cs = ConvergenceStructure::ordinary(1e-2);
    let window = Interval { lo: 0.0, hi: 1.0 };
    let probe = Probe::explicit(|n| IntervalSet::single(Interval { lo: 0.0, hi: 1.0 / n as f64 }));
    let flat = vitali_audit(&FunctionSequence::new(N, fixtures::vitali_flat), &ms, &cs, &window, &probe, None, 4096)
        .unwrap();
    let spikes =
        vitali_audit(&FunctionSequence::new(N, fixtures::vitali_spike), &ms, &cs, &window, &probe, None, 4096).unwrap();
    let eac1 = spikes.eac.as_ref().map(|e| e.eac1);
    let spike_err = spikes.l1_norms.iter().fold(0.0f64, |m, v| m.max((v - 1.0).abs()));
    let flat_last = flat.l1_norms.last().copied().unwrap_or(f64::NAN);
    Outcome::check(
        flat.confirmed && flat.l1_to_zero == Verdict::Pass && eac1 == Some(Verdict::Fail) && spike_err <= 1e-6,
        format!(
            "χ(0,1/n): confirmed = {}, ∫|f₁₀₀₀| = {flat_last:.2e}; n·χ(0,1/n): eac.1 {}, max |∫|fₙ| − 1| = {spike_err:.2e}",
            flat.confirmed,
            eac1.map(|v| v.to_string()).unwrap_or_else(|| "not run".into())
        ),
    )
}

fn c8_jensen() -> Outcome {
    let ms = MeasureSpace::lebesgue(0.0, 1.0).unwrap();
    let set = IntervalSet::single(Interval { lo: 0.0, hi: 1.0 });
    let triples = fixtures::jensen_triples(1000, 12);
    let mut min_gap = f64::INFINITY;
    for t in &triples {
        let r = jensen_gap(&t.phi, &t.h, &t.f, &set, &ms).unwrap();
        min_gap = r.gap.iter().copied().fold(min_gap, f64::min);
    }
    let closed = jensen_gap(
        &ConvexPhi::square(),
        &LatticeFunction::scalar(|_| 1.0),
        &LatticeFunction::scalar(|t| t),
        &set,
        &ms,
    )
    .unwrap()
    .gap[0];
    // ∫t² − (∫t)²
    let exact = 1.0 / 3.0 - 0.25;
    Outcome::check(
        min_gap >= -1e-6 && (closed - exact).abs() <= 1e-6,
        format!(
            "min gap over {} triples = {min_gap:.3e}; closed case {closed:.10} vs 1/12 (error {:.1e})",
            triples.len(),
            (closed - exact).abs()
        ),
    )
}

fn c9_ito() -> Outcome {
    let grid = TimeGrid::new(1.0, 512).unwrap();
    let b = simulate_brownian(100_000, &grid, 2024).unwrap();
    let mut parts = Vec::new();
    let mut passed = true;
    for id in ["ito-one", "ito-t", "ito-step"] {
        let (f, reference) = fixtures::ito_integrand(id, 1.0).unwrap();
        let r = isometry_check(&f, &b, reference).unwrap();
        let z = (r.second_moment - r.reference).abs() / r.standard_error;
        passed &= r.verdict == Verdict::Pass && z <= 3.0;
        parts.push(format!("{} {z:.2} SE", f.label()));
    }
    let (one, _) = fixtures::ito_integrand("ito-one", 1.0).unwrap();
    let sums = ito_integrate(&one, &b).unwrap();
    let drift = sums
        .values()
        .iter()
        .zip(b.terminal().values())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    passed &= drift <= 1e-12;
    Outcome::check(passed, format!("M = 10⁵: {}; max |∫dB − B_T| = {drift:.1e}", parts.join(", ")))
}

fn run_cli(config: &Path, out: &Path) -> std::io::Result<bool> {
    let status = Command::new(env!("CARGO_BIN_EXE_rieszlab"))
        .arg("run")
        .arg(config)
        .arg("--out-dir")
        .arg(out)
        .output()?
        .status;
    Ok(status.code().is_some_and(|c| c == 0 || c == 1))
}

fn without_timestamp(path: &Path) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("generated_unix");
    v
}

fn c10_determinism() -> Outcome {
    let configs = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let runs = [
        ("moment-tail", "moment-tail"),
        ("moment-uniform", "moment-uniform"),
        ("integral-suite", "integral-suite"),
        ("jensen", "jensen"),
        ("ito", "ito-isometry"),
    ];
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut differing = Vec::new();
    for (file, stem) in runs {
        let cfg = configs.join(format!("{file}.toml"));
        let ok = run_cli(&cfg, a.path()).unwrap() && run_cli(&cfg, b.path()).unwrap();
        let csv = |d: &Path| std::fs::read(d.join(format!("{stem}.csv"))).ok();
        let json = |d: &Path| without_timestamp(&d.join(format!("{stem}.json")));
        let same = ok && csv(a.path()).is_some() && csv(a.path()) == csv(b.path()) && json(a.path()) == json(b.path());
        if !same {
            differing.push(file);
        }
    }
    Outcome::check(
        differing.is_empty(),
        if differing.is_empty() {
            format!("{} configs run twice: CSVs byte-identical, JSON equal up to the timestamp", runs.len())
        } else {
            format!("differing runs: {}", differing.join(", "))
        },
    )
}

fn main() {
    type Criterion = (u8, &'static str, Option<f64>, fn() -> Outcome);
    let criteria: [Criterion; 10] = [
        (1, "moment-kernel tail identity", Some(1.0), c1_tail_identity),
        (2, "reproduction of constants", Some(1.0), c2_constants),
        (3, "modular-convergence law", Some(10.0), c3_modular_law),
        (4, "uniform convergence", Some(30.0), c4_uniform),
        (5, "axiom suite", Some(10.0), c5_axioms),
        (6, "integral construction", Some(30.0), c6_integrals),
        (7, "Vitali discrimination", Some(5.0), c7_vitali),
        (8, "Jensen", Some(10.0), c8_jensen),
        (9, "Itô isometry", Some(30.0), c9_ito),
        (10, "determinism", None, c10_determinism),
    ];
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut unexpected = 0;
    for (id, name, budget, run) in criteria {
        if filter.as_deref().is_some_and(|f| !name.contains(f) && f != id.to_string()) {
            continue;
        }
        let start = Instant::now();
        let out = run();
        let secs = start.elapsed().as_secs_f64();
        let in_time = budget.is_none_or(|b| secs < b);
        let passed = out.passed && in_time;
        let timing = match budget {
            Some(b) if !in_time => format!("{secs:.2} s, over the {b} s budget"),
            Some(b) => format!("{secs:.2} s of {b} s"),
            None => format!("{secs:.2} s"),
        };
        let tag = if passed { "PASS" } else if out.known && in_time { "FAIL (known)" } else { "FAIL" };
        println!("criterion {id:>2} {tag:<12} {name}: {} [{timing}]", out.detail);
        if !passed && !(out.known && in_time) {
            unexpected += 1;
        }
    }
    if unexpected > 0 {
        eprintln!("{unexpected} criteria failed");
        std::process::exit(1);
    }
}
