use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::json;

use rieszlab::convergence::{axiom_audit, standard_bank, ConvergenceStructure, Verdict};
use rieszlab::measure::{
    integrate_with, vitali_audit, FunctionSequence, Interval, IntervalSet, LatticeFunction, MeasureSpace,
    Partition, Probe,
};
use rieszlab::modular::{jensen_gap, modular_convergence_search, modular_eval, ConvexPhi, Modular};
use rieszlab::operators::{
    operator_convergence_experiment, operator_output, ExperimentMode, ExperimentSettings, KernelOperator,
    MellinKernelFamily,
};
use rieszlab::stochastic::{isometry_check, ito_integrate, simulate_brownian, TimeGrid, GAUSSIAN_METHOD};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::fixtures;
use crate::report::{Cell, ColumnProvenance, Oracle, Report, SeriesSpec, Settings, Table};

#[derive(Clone, Copy, Debug)]
pub struct ExperimentSpec {
    pub id: &'static str,
    pub module: &'static str,
    pub fixtures: &'static [&'static str],
    pub summary: &'static str,
}

pub const REGISTRY: &[ExperimentSpec] = &[
    ExperimentSpec {
        id: "moment-tail",
        module: "operators",
        fixtures: &["moment-kernel"],
        summary: "tail masses outside [s/δ, sδ] against δ^-n, total Haar mass against 1",
    },
    ExperimentSpec {
        id: "moment-modular",
        module: "operators",
        fixtures: &["moment-kernel", "ramp"],
        summary: "ρ(T̃_n f − f) for φ = x² against 1/(2(n+1)), plus the α search",
    },
    ExperimentSpec {
        id: "moment-uniform",
        module: "operators",
        fixtures: &["moment-kernel", "log-tent"],
        summary: "sup-error of T̃_n f − f on [1/8, 8]",
    },
    ExperimentSpec {
        id: "axiom-audit",
        module: "convergence",
        fixtures: &["standard-bank"],
        summary: "convergence and limsup axioms of the configured structure",
    },
    ExperimentSpec {
        id: "integral-suite",
        module: "measure_integral",
        fixtures: &["integral-suite"],
        summary: "defining-sequence integrals against adaptive quadrature, dyadic against triadic",
    },
    ExperimentSpec {
        id: "vitali",
        module: "measure_integral",
        fixtures: &["vitali-flat", "vitali-spikes"],
        summary: "Vitali hypotheses and ∫|f_n| for χ(0,1/n) and n·χ(0,1/n)",
    },
    ExperimentSpec {
        id: "jensen",
        module: "modular_orlicz",
        fixtures: &["jensen-triples", "jensen-closed"],
        summary: "Jensen gaps on random admissible triples and the 1/12 case",
    },
    ExperimentSpec {
        id: "ito-isometry",
        module: "stochastic",
        fixtures: &["ito-one", "ito-t", "ito-step"],
        summary: "second moment of forward sums against ∫ f² dt",
    },
];

pub fn find(id: &str) -> CliResult<&'static ExperimentSpec> {
    REGISTRY.iter().find(|e| e.id == id).ok_or_else(|| {
        let known: Vec<&str> = REGISTRY.iter().map(|e| e.id).collect();
        CliError::Config(format!("experiment: unknown id {id:?}, expected one of {}", known.join(", ")))
    })
}

/// What an experiment hands back before the common fields are added.
struct Outcome {
    horizon: usize,
    tol: f64,
    convergence: String,
    table: Table,
    provenance: Vec<(&'static str, Oracle)>,
    series: Vec<(&'static str, &'static str, &'static str)>,
    failures: Vec<String>,
    details: serde_json::Value,
}

/// Validates the config against the registries and runs the experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> CliResult<Report> {
    cfg.validate()?;
    let spec = find(&cfg.experiment)?;
    if let Some(m) = &cfg.module {
        if m != spec.module {
            return Err(CliError::Config(format!(
                "module: experiment {} belongs to {}, not {m}",
                spec.id, spec.module
            )));
        }
    }
    for id in &cfg.fixtures {
        if fixtures::lookup(id).is_none() {
            return Err(CliError::Lookup(format!("no fixture named {id:?}")));
        }
        if !spec.fixtures.contains(&id.as_str()) {
            return Err(CliError::Lookup(format!("fixture {id} is not used by experiment {}", spec.id)));
        }
    }
    let selected: Vec<String> = if cfg.fixtures.is_empty() {
        spec.fixtures.iter().map(|s| s.to_string()).collect()
    } else {
        cfg.fixtures.clone()
    };
    let out = match spec.id {
        "moment-tail" => moment_tail(cfg)?,
        "moment-modular" => moment_modular(cfg)?,
        "moment-uniform" => moment_uniform(cfg)?,
        "axiom-audit" => axioms(cfg)?,
        "integral-suite" => integral_suite(cfg)?,
        "vitali" => vitali(cfg, &selected)?,
        "jensen" => jensen(cfg, &selected)?,
        "ito-isometry" => ito(cfg, &selected)?,
        other => unreachable!("registry entry {other} has no runner"),
    };
    Ok(Report {
        experiment: spec.id.into(),
        module: spec.module.into(),
        fixtures: selected,
        generated_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        settings: Settings {
            seed: cfg.seed,
            horizon: out.horizon,
            quadrature: cfg.rule_label(),
            resolution: cfg.quadrature.resolution,
            convergence: out.convergence,
            tol: out.tol,
        },
        passed: out.failures.is_empty(),
        failures: out.failures,
        table: out.table,
        provenance: out
            .provenance
            .into_iter()
            .map(|(c, o)| ColumnProvenance {
                column: c.into(),
                oracle: o,
            })
            .collect(),
        series: out
            .series
            .into_iter()
            .map(|(s, x, y)| SeriesSpec {
                series: s.into(),
                x: x.into(),
                y: y.into(),
            })
            .collect(),
        details: out.details,
    })
}

fn moment_family(cfg: &ExperimentConfig) -> MellinKernelFamily {
    MellinKernelFamily::moment().with_rule(cfg.rule())
}

fn moment_tail(cfg: &ExperimentConfig) -> CliResult<Outcome> {
    const TOL: f64 = 1e-8;
    let horizon = cfg.kernel.horizon.unwrap_or(30);
    let deltas = if cfg.kernel.deltas.is_empty() { vec![2.0] } else { cfg.kernel.deltas.clone() };
    if let Some(d) = deltas.iter().find(|d| **d <= 1.0) {
        return Err(CliError::Config(format!("kernel.deltas: Mellin radii are ratios above 1, got {d}")));
    }
    let family = moment_family(cfg);
    let mut table = Table::new(&["n", "delta", "tail", "reference", "tail_error", "mass", "mass_error"]);
    let mut failures = Vec::new();
    for n in 1..=horizon {
        let mass = family.section_mass(n, 1.0, None)?;
        for &d in &deltas {
            let tail = family.section_mass(n, 1.0, Some(d))?;
            let reference = d.powi(-(n as i32));
            let (te, me) = ((tail - reference).abs(), (mass - 1.0).abs());
            if te > TOL || me > TOL {
                failures.push(format!("n = {n}, δ = {d}: tail error {te:.3e}, mass error {me:.3e}"));
            }
            table.push(vec![
                Cell::int(n),
                Cell::num(d),
                Cell::num(tail),
                Cell::num(reference),
                Cell::num(te),
                Cell::num(mass),
                Cell::num(me),
            ]);
        }
    }
    Ok(Outcome {
        horizon,
        tol: TOL,
        convergence: "none".into(),
        table,
        provenance: vec![
            ("n", Oracle::ClosedForm),
            ("delta", Oracle::ClosedForm),
            ("tail", Oracle::Quadrature),
            ("reference", Oracle::PaperIdentity),
            ("tail_error", Oracle::Quadrature),
            ("mass", Oracle::Quadrature),
            ("mass_error", Oracle::Quadrature),
        ],
        series: vec![("tail", "n", "tail"), ("tail_reference", "n", "reference")],
        failures,
        details: json!({ "deltas": deltas, "s": 1.0 }),
    })
}

fn moment_modular(cfg: &ExperimentConfig) -> CliResult<Outcome> {
    const TOL: f64 = 1e-6;
    let horizon = cfg.kernel.horizon.unwrap_or(10);
    let tol = cfg.tol(2e-2);
    let (cs, _) = cfg.structure(2e-2, 1);
    let family: Arc<dyn KernelOperator> = Arc::new(moment_family(cfg));
    let ms = MeasureSpace::haar().with_rule(cfg.rule());
    let m = Modular::new(ConvexPhi::square(), ms, cs.clone());
    let f = fixtures::ramp();
    let outputs: Vec<LatticeFunction> = (1..=horizon).map(|n| operator_output(family.clone(), &f, n)).collect();
    let mut table = Table::new(&["n", "rho", "reference", "abs_error"]);
    let mut failures = Vec::new();
    for (i, g) in outputs.iter().enumerate() {
        let n = i + 1;
        let rho = modular_eval(&m, &g.sub(&f)?)?.values()[0];
        let reference = 1.0 / (2.0 * (n as f64 + 1.0));
        let err = (rho - reference).abs();
        if err > TOL {
            failures.push(format!("rho at n = {n} off by {err:.3e}"));
        }
        table.push(vec![Cell::int(n), Cell::num(rho), Cell::num(reference), Cell::num(err)]);
    }
    let outs = outputs.clone();
    let seq = FunctionSequence::new(horizon, move |n| outs[n - 1].clone());
    let search = modular_convergence_search(&m, &seq, &f, 2, 4, Some(family.d1()))?;
    if search.alpha.is_none() {
        failures.push(format!("no α down to 2^-4 gives modular convergence ({})", search.verdict));
    }
    if !search.solid {
        failures.push("α search is not solid".into());
    }
    Ok(Outcome {
        horizon,
        tol,
        convergence: cs.label(),
        table,
        provenance: vec![
            ("n", Oracle::ClosedForm),
            ("rho", Oracle::Quadrature),
            ("reference", Oracle::ClosedForm),
            ("abs_error", Oracle::Quadrature),
        ],
        series: vec![("rho_alpha1", "n", "rho"), ("reference", "n", "reference")],
        failures,
        details: json!({ "phi": "square", "alpha_search": search }),
    })
}

fn moment_uniform(cfg: &ExperimentConfig) -> CliResult<Outcome> {
    let horizon = cfg.kernel.horizon.unwrap_or(24);
    let deltas = if cfg.kernel.deltas.is_empty() { vec![2.0] } else { cfg.kernel.deltas.clone() };
    let (cs, _) = cfg.structure(1e-1, 1);
    let family: Arc<dyn KernelOperator> = Arc::new(moment_family(cfg));
    let settings = ExperimentSettings {
        horizon,
        deltas,
        audit_horizon: 30,
    };
    let mode = ExperimentMode::Uniform {
        window: Interval { lo: 0.125, hi: 8.0 },
        points: 33,
    };
    let r = operator_convergence_experiment(family, &fixtures::log_tent(), &mode, &settings, &cs)?;
    let u = r.uniform.as_ref().expect("uniform mode fills its outcome");
    let mut table = Table::new(&["n", "sup_error", "peak_error"]);
    for (i, e) in u.sup_error.iter().enumerate() {
        let n = (i + 1) as f64;
        let peak = (1.0 - 0.25f64.powf(n)) / ((n + 1.0) * 4f64.ln());
        table.push(vec![Cell::int(i + 1), Cell::num(*e), Cell::num(peak)]);
    }
    let mut failures = Vec::new();
    if r.verdict != Verdict::Pass {
        failures.push(format!("sup-error convergence is {}", r.verdict));
    }
    if !u.strictly_decreasing_from.is_some_and(|n| n <= 2) {
        failures.push(format!("sup-error decreases strictly only from {:?}", u.strictly_decreasing_from));
    }
    Ok(Outcome {
        horizon,
        tol: cs.tol,
        convergence: cs.label(),
        table,
        provenance: vec![
            ("n", Oracle::ClosedForm),
            ("sup_error", Oracle::Quadrature),
            ("peak_error", Oracle::ClosedForm),
        ],
        series: vec![("sup_error", "n", "sup_error"), ("peak_error", "n", "peak_error")],
        failures,
        details: json!({ "certificate": r.certificate, "strictly_decreasing_from": u.strictly_decreasing_from }),
    })
}

fn axioms(cfg: &ExperimentConfig) -> CliResult<Outcome> {
    let horizon = cfg.kernel.horizon.unwrap_or(100_000);
    let (cs, ls) = cfg.structure(1e-2, 2);
    let bank = standard_bank(horizon);
    let report = axiom_audit(&cs, &ls, &bank)?;
    let mut table = Table::new(&["axiom", "verdict", "checked"]);
    let mut failures = Vec::new();
    let all = std::iter::once(&report.bank_consistency)
        .chain(&report.convergence_axioms)
        .chain(&report.limsup_axioms)
        .chain(&report.conditions);
    for a in all {
        if a.verdict != Verdict::Pass {
            let w = a.witness.as_ref().map(|w| format!(" (witness {})", w.sequence)).unwrap_or_default();
            failures.push(format!("{} is {}{w}", a.axiom, a.verdict));
        }
        table.push(vec![Cell::text(a.axiom.clone()), Cell::text(a.verdict.to_string()), Cell::int(a.checked)]);
    }
    Ok(Outcome {
        horizon,
        tol: cs.tol,
        convergence: cs.label(),
        table,
        provenance: vec![("checked", Oracle::ClosedForm)],
        series: Vec::new(),
        failures,
        details: json!({
            "bank_size": report.bank_size,
            "limsup": report.limsup,
            "convergence_axioms": report.convergence_axioms,
            "limsup_axioms": report.limsup_axioms,
            "conditions": report.conditions,
            "note": report.note,
        }),
    })
}

fn integral_suite(cfg: &ExperimentConfig) -> CliResult<Outcome> {
    const REF_TOL: f64 = 1e-4;
    const AGREE_TOL: f64 = 2e-4;
    let cs = ConvergenceStructure::ordinary(cfg.tol(1e-4)).with_tail_fraction(0.25);
    let mut table = Table::new(&["case", "entry", "defining", "reference", "abs_error", "triadic", "partition_gap"]);
    let mut failures = Vec::new();
    for c in fixtures::integral_suite() {
        let d = integrate_with(&c.f, &c.set, &c.ms, &cs, Partition::Dyadic, Partition::Dyadic.default_levels())?;
        let t = integrate_with(&c.f, &c.set, &c.ms, &cs, Partition::Triadic, Partition::Triadic.default_levels())?;
        let reference = c.ms.quadrature_reference(&c.f, &c.set, 1e-12)?;
        for i in 0..c.f.dim() {
            let (dv, tv, rv) = (d.value.values()[i], t.value.values()[i], reference.values()[i]);
            let (err, gap) = ((dv - rv).abs(), (dv - tv).abs());
            if err > REF_TOL || gap > AGREE_TOL {
                failures.push(format!("{}[{i}]: error {err:.3e}, partition gap {gap:.3e}", c.id));
            }
            table.push(vec![
                Cell::text(c.id),
                Cell::int(i),
                Cell::num(dv),
                Cell::num(rv),
                Cell::num(err),
                Cell::num(tv),
                Cell::num(gap),
            ]);
        }
    }
    Ok(Outcome {
        horizon: Partition::Dyadic.default_levels(),
        tol: cs.tol,
        convergence: cs.label(),
        table,
        provenance: vec![
            ("entry", Oracle::ClosedForm),
            ("defining", Oracle::Quadrature),
            ("reference", Oracle::Quadrature),
            ("abs_error", Oracle::Quadrature),
            ("triadic", Oracle::Quadrature),
            ("partition_gap", Oracle::Quadrature),
        ],
        series: Vec::new(),
        failures,
        details: json!({ "reference": "adaptive Gauss–Kronrod (7,15)", "cases": 20 }),
    })
}

fn vitali(cfg: &ExperimentConfig, selected: &[String]) -> CliResult<Outcome> {
    let horizon = cfg.kernel.horizon.unwrap_or(1000);
    let ms = MeasureSpace::lebesgue(0.0, 1.0)?;
    let cs = ConvergenceStructure::ordinary(cfg.tol(1e-2));
    let window = Interval { lo: 0.0, hi: 1.0 };
    let probe = Probe::explicit(|n| IntervalSet::single(Interval { lo: 0.0, hi: 1.0 / n as f64 }));
    let mut table = Table::new(&["n", "l1_flat", "l1_spikes"]);
    let mut failures = Vec::new();
    let mut details = serde_json::Map::new();
    let mut flat = vec![f64::NAN; horizon];
    let mut spikes = vec![f64::NAN; horizon];
    if selected.iter().any(|s| s == "vitali-flat") {
        let seq = FunctionSequence::new(horizon, fixtures::vitali_flat);
        let r = vitali_audit(&seq, &ms, &cs, &window, &probe, None, 4096)?;
        if !r.confirmed {
            failures.push(format!("χ(0,1/n): Vitali not confirmed (hypotheses {})", r.hypotheses));
        }
        flat.clone_from(&r.l1_norms);
        details.insert("flat".into(), json!(r));
    }
    if selected.iter().any(|s| s == "vitali-spikes") {
        let seq = FunctionSequence::new(horizon, fixtures::vitali_spike);
        let r = vitali_audit(&seq, &ms, &cs, &window, &probe, None, 4096)?;
        let eac1 = r.eac.as_ref().map(|e| e.eac1);
        if eac1 != Some(Verdict::Fail) {
            failures.push(format!("n·χ(0,1/n): eac.1 is {eac1:?}, expected a failure"));
        }
        if let Some((n, v)) = r.l1_norms.iter().enumerate().find(|(_, v)| (*v - 1.0).abs() > 1e-6) {
            failures.push(format!("n·χ(0,1/n): ∫|f_{}| = {v}, expected 1", n + 1));
        }
        spikes.clone_from(&r.l1_norms);
        details.insert("spikes".into(), json!(r));
    }
    for n in 0..horizon {
        table.push(vec![Cell::int(n + 1), Cell::num(flat[n]), Cell::num(spikes[n])]);
    }
    Ok(Outcome {
        horizon,
        tol: cs.tol,
        convergence: cs.label(),
        table,
        provenance: vec![
            ("n", Oracle::ClosedForm),
            ("l1_flat", Oracle::Quadrature),
            ("l1_spikes", Oracle::Quadrature),
        ],
        series: vec![("l1_flat", "n", "l1_flat"), ("l1_spikes", "n", "l1_spikes")],
        failures,
        details: serde_json::Value::Object(details),
    })
}

fn jensen(cfg: &ExperimentConfig, selected: &[String]) -> CliResult<Outcome> {
    const TOL: f64 = 1e-6;
    let count = cfg.kernel.horizon.unwrap_or(1000);
    let ms = MeasureSpace::lebesgue(0.0, 1.0)?.with_rule(cfg.rule());
    let set = IntervalSet::single(Interval { lo: 0.0, hi: 1.0 });
    let mut table = Table::new(&["trial", "phi", "gap_min", "expected"]);
    let mut failures = Vec::new();
    if selected.iter().any(|s| s == "jensen-closed") {
        let h = LatticeFunction::scalar(|_| 1.0);
        let r = jensen_gap(&ConvexPhi::square(), &h, &LatticeFunction::scalar(|t| t), &set, &ms)?;
        let gap = r.gap[0];
        if (gap - 1.0 / 12.0).abs() > TOL {
            failures.push(format!("closed-form gap {gap} differs from 1/12"));
        }
        table.push(vec![Cell::int(0), Cell::text("square"), Cell::num(gap), Cell::num(1.0 / 12.0)]);
    }
    if selected.iter().any(|s| s == "jensen-triples") {
        for (i, t) in fixtures::jensen_triples(count, cfg.seed).iter().enumerate() {
            let r = jensen_gap(&t.phi, &t.h, &t.f, &set, &ms)?;
            let g = r.gap.iter().copied().fold(f64::INFINITY, f64::min);
            if !(g >= -TOL) {
                failures.push(format!("triple {} ({}) has gap {g:.3e}", i + 1, t.label));
            }
            table.push(vec![Cell::int(i + 1), Cell::text(t.label.clone()), Cell::num(g), Cell::text("≥ 0")]);
        }
    }
    Ok(Outcome {
        horizon: count,
        tol: TOL,
        convergence: "none".into(),
        table,
        provenance: vec![
            ("trial", Oracle::ClosedForm),
            ("gap_min", Oracle::Quadrature),
            ("expected", Oracle::ClosedForm),
        ],
        series: vec![("gap_min", "trial", "gap_min")],
        failures,
        details: json!({ "triples": count }),
    })
}

fn ito(cfg: &ExperimentConfig, selected: &[String]) -> CliResult<Outcome> {
    let st = &cfg.stochastic;
    let grid = TimeGrid::new(st.t_end, st.steps)?;
    let b = simulate_brownian(st.paths, &grid, cfg.seed)?;
    let mut table = Table::new(&[
        "integrand",
        "second_moment",
        "reference",
        "grid_reference",
        "standard_error",
        "abs_error",
    ]);
    let mut failures = Vec::new();
    let mut reports = Vec::new();
    for id in selected {
        let (f, reference) = fixtures::ito_integrand(id, st.t_end)
            .ok_or_else(|| CliError::Lookup(format!("no integrand for fixture {id}")))?;
        let r = isometry_check(&f, &b, reference)?;
        if r.verdict != Verdict::Pass {
            failures.push(format!("{id}: |E(∫f dB)² − ∫f²| exceeds 3 standard errors"));
        }
        if id == "ito-one" {
            let x = ito_integrate(&f, &b)?;
            let bt = b.terminal();
            let worst = x.values().iter().zip(bt.values()).map(|(a, c)| (a - c).abs()).fold(0.0, f64::max);
            if worst > 1e-12 * st.t_end.sqrt().max(1.0) * 10.0 {
                failures.push(format!("ito-one: ∫ dB differs from B_T by {worst:.3e}"));
            }
        }
        table.push(vec![
            Cell::text(id.clone()),
            Cell::num(r.second_moment),
            Cell::num(r.reference),
            Cell::num(r.grid_reference),
            Cell::num(r.standard_error),
            Cell::num((r.second_moment - r.reference).abs()),
        ]);
        reports.push(r);
    }
    Ok(Outcome {
        horizon: st.steps,
        tol: 3.0,
        convergence: "monte-carlo, 3 standard errors".into(),
        table,
        provenance: vec![
            ("second_moment", Oracle::MonteCarlo),
            ("reference", Oracle::ClosedForm),
            ("grid_reference", Oracle::ClosedForm),
            ("standard_error", Oracle::MonteCarlo),
            ("abs_error", Oracle::MonteCarlo),
        ],
        series: Vec::new(),
        failures,
        details: json!({
            "paths": st.paths,
            "steps": st.steps,
            "t_end": st.t_end,
            "gaussian": GAUSSIAN_METHOD,
            "isometry": reports,
        }),
    })
}
