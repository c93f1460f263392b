use std::sync::Arc;

use super::*;
use crate::convergence::{ConvergenceStructure, Verdict};
use crate::error::Error;
use crate::lattice::LatticeElement;
use crate::measure::{Interval, IntervalSet, LatticeFunction, MeasureSpace};
use crate::modular::{modular_eval, ConvexPhi, Modular};
use crate::quadrature::QuadratureRule;

fn el(v: &[f64]) -> LatticeElement {
    LatticeElement::from_slice(v)
}

fn ramp() -> LatticeFunction {
    // t·χ_(0,1]
    LatticeFunction::scalar(|t| if t > 0.0 && t <= 1.0 { t } else { 0.0 })
        .with_support(Interval { lo: 0.0, hi: 1.0 })
        .with_breaks(&[1.0])
}

fn log_tent() -> LatticeFunction {
    let w = 4f64.ln();
    LatticeFunction::scalar(move |t| (1.0 - t.ln().abs() / w).max(0.0))
        .with_support(Interval { lo: 0.25, hi: 4.0 })
        .with_breaks(&[0.25, 1.0, 4.0])
}

// Independent oracle: T̃_n f(s) for f = t·χ_(0,1] in closed form.
fn ramp_oracle(n: usize, s: f64) -> f64 {
    let n = n as f64;
    if s <= 1.0 {
        n * s / (n + 1.0)
    } else {
        n * s.powf(-n) / (n + 1.0)
    }
}

#[test]
fn moment_kernel_values() {
    let k = moment_kernel(4).unwrap();
    assert!((k.eval(0.5) - 0.25).abs() < 1e-15);
    assert_eq!(k.eval(2.0), 0.0);
    assert_eq!(k.eval(1.0), 0.0);
    assert!(matches!(moment_kernel(0), Err(Error::Parameter(_))));
    let all = IntervalSet::single(Interval { lo: 0.0, hi: f64::INFINITY });
    for n in [1, 2, 7, 30] {
        let m = moment_kernel(n).unwrap().haar_mass(&all, QuadratureRule::default()).unwrap();
        assert!((m - 1.0).abs() < 1e-10, "n = {n}: {m}");
    }
}

#[test]
fn moving_average_examples() {
    let kf = KernelFamily::moving_average();
    let id = LatticeFunction::scalar(|t| t);
    for (n, s) in [(1, 0.0), (4, 0.3), (10, -2.0)] {
        let v = urysohn_apply(&kf, &id, s, n).unwrap();
        let want = s + 1.0 / (2.0 * n as f64);
        assert!((v.values()[0] - want).abs() < 1e-12, "n = {n}, s = {s}");
    }
    let c = LatticeFunction::constant(&el(&[3.0, -1.5]));
    let v = urysohn_apply(&kf, &c, 0.7, 5).unwrap();
    assert!((v.values()[0] - 3.0).abs() < 1e-12 && (v.values()[1] + 1.5).abs() < 1e-12);
    let v = urysohn_apply(&kf, &LatticeFunction::zero(2), 0.7, 5).unwrap();
    assert!(v.is_zero());
}

#[test]
fn urysohn_domain_error() {
    // ∫_1^∞ t^{-1/2} dt diverges
    let g = LatticeFunction::scalar(|t| 1.0 / t.abs().sqrt()).with_support(Interval {
        lo: 1.0,
        hi: f64::INFINITY,
    });
    let kf = KernelFamily::new(
        "flat",
        MeasureSpace::lebesgue_real(),
        |_, _, t: f64, u| if t >= 0.0 { u } else { 0.0 },
        |_, _, t: f64| if t >= 0.0 { 1.0 } else { 0.0 },
        |_, u| u,
        |_, _| Interval { lo: 0.0, hi: f64::INFINITY },
        |_, _| Interval { lo: f64::NEG_INFINITY, hi: f64::INFINITY },
        1.0,
    )
    .unwrap();
    assert!(matches!(urysohn_apply(&kf, &g, 0.0, 1), Err(Error::Domain(_))));
}

#[test]
fn mellin_apply_examples() {
    let mf = MellinKernelFamily::moment();
    let v = mellin_apply(&mf, &ramp(), 0.5, 4).unwrap();
    assert!((v.values()[0] - 0.4).abs() < 1e-10, "{v:?}");
    for (n, s) in [(1, 0.2), (3, 1.0), (5, 1.7), (12, 3.0)] {
        let v = mellin_apply(&mf, &ramp(), s, n).unwrap();
        assert!((v.values()[0] - ramp_oracle(n, s)).abs() < 1e-10, "n = {n}, s = {s}");
    }
    let u = el(&[1.0, -2.5, 0.0]);
    for n in [1, 9, 30] {
        for s in [0.01, 1.0, 40.0] {
            let v = mellin_apply(&mf, &LatticeFunction::constant(&u), s, n).unwrap();
            for (a, b) in v.values().iter().zip(u.values()) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }
    assert!(mellin_apply(&mf, &LatticeFunction::zero(1), 2.0, 3).unwrap().is_zero());
    assert!(matches!(mellin_apply(&mf, &ramp(), 0.0, 3), Err(Error::Precondition(_))));
}

#[test]
fn mellin_domain_error() {
    // f(t) = t^{-2} near 0 makes ∫_0^1 n z^{n-1} f(sz) dz diverge for n = 1
    let mf = MellinKernelFamily::moment();
    let f = LatticeFunction::scalar(|t| t.powi(-2)).with_support(Interval { lo: 0.0, hi: 1.0 });
    assert!(matches!(mellin_apply(&mf, &f, 0.5, 1), Err(Error::Domain(_))));
}

#[test]
fn moment_family_certificate() {
    let mf = MellinKernelFamily::moment();
    let cs = ConvergenceStructure::ordinary(1e-4);
    let cert = singularity_audit(&mf, &[2.0, 4.0], 30, &cs).unwrap();
    assert!(cert.is_u_singular(), "{cert:#?}");
    let (_, tail) = &cert.tails[0];
    for (n, t) in tail.iter().enumerate() {
        let want = 0.5f64.powi(n as i32 + 1);
        assert!((t - want).abs() < 1e-10, "n = {}: {t} vs {want}", n + 1);
    }
    assert!(cert.masses.iter().all(|m| (m - 1.0).abs() < 1e-10));
    assert!(cert.reproduction.iter().all(|e| *e < 1e-10));
}

#[test]
fn broken_families_fail_the_right_clause() {
    let cs = ConvergenceStructure::ordinary(1e-4);
    let chi = MellinKernelFamily::new(
        "chi(0,1)",
        |_, t| if t > 0.0 && t < 1.0 { 1.0 } else { 0.0 },
        Interval { lo: 0.0, hi: 1.0 },
        &[1.0],
        1.0,
    )
    .unwrap();
    let cert = singularity_audit(&chi, &[2.0], 10, &cs).unwrap();
    assert_eq!(cert.kind, SingularityKind::Fail { clause: "integrability".into() });

    let doubled = MellinKernelFamily::moment().scaled(2.0);
    let cert = singularity_audit(&doubled, &[2.0], 20, &cs).unwrap();
    assert_eq!(cert.kind, SingularityKind::Fail { clause: "reproduction".into() });
    assert_eq!(cert.singular, Verdict::Pass);
    assert!(cert.reproduction.iter().all(|e| (e - 1.0).abs() < 1e-9));

    // mass 2 against D1 = 1 is caught by the bound instead
    let loose = MellinKernelFamily::new("2·moment", |n, t| 2.0 * moment_kernel(n).unwrap().eval(t), Interval { lo: 0.0, hi: 1.0 }, &[1.0], 1.0).unwrap();
    let cert = singularity_audit(&loose, &[2.0], 10, &cs).unwrap();
    assert_eq!(cert.kind, SingularityKind::Fail { clause: "mass-bound".into() });
}

#[test]
fn nonlinear_family_uses_the_palette() {
    // K̃_n(t, u) = L̃_n(t)·sin(u): not reproducing, Lipschitz with ψ = id
    let mf = MellinKernelFamily::moment()
        .with_nonlinear(|n, t, u: f64| moment_kernel(n).unwrap().eval(t) * u.sin(), |_, u| u);
    let cs = ConvergenceStructure::ordinary(1e-4);
    let cert = singularity_audit(&mf, &[2.0], 8, &cs).unwrap();
    assert!(!cert.linear_shortcut);
    assert_eq!(cert.kind, SingularityKind::Fail { clause: "reproduction".into() });
    let lip = lipschitz_audit(&mf, 10, 2000, 3);
    assert!(lip.passed(), "{lip:?}");
}

#[test]
fn moving_average_certificate() {
    let kf = KernelFamily::moving_average();
    let cs = ConvergenceStructure::ordinary(1e-4);
    let cert = singularity_audit(&kf, &[0.5, 0.1], 40, &cs).unwrap();
    assert!(cert.is_u_singular(), "{cert:#?}");
    // the window [s, s+1/n] leaves B(s, δ) only while 1/n > δ
    let (_, tail) = &cert.tails[1];
    assert!(tail[..9].iter().all(|t| *t > 0.0));
    assert!(tail[10..].iter().all(|t| *t == 0.0));
}

#[test]
fn index_set_clause() {
    let cs = ConvergenceStructure::density(0.1, 1e-4);
    let mf = MellinKernelFamily::moment().with_index_set(|n| n % 20 != 0);
    let cert = singularity_audit(&mf, &[2.0], 60, &cs).unwrap();
    assert_eq!(cert.clause("index-set").unwrap().verdict, Verdict::Pass, "{:?} {:?}", cert.clause("index-set"), cert.masses);
}

#[test]
fn lipschitz_and_psi_audits() {
    let mf = MellinKernelFamily::moment();
    let r = lipschitz_audit(&mf, 30, 10_000, 7);
    assert!(r.passed() && r.samples == 10_000, "{r:?}");
    let r = lipschitz_audit(&KernelFamily::moving_average(), 30, 10_000, 7);
    assert!(r.passed(), "{r:?}");

    // a kernel that grows faster than its declared majorant
    let bad = MellinKernelFamily::moment().with_nonlinear(
        |n, t, u: f64| moment_kernel(n).unwrap().eval(t) * u * u.abs(),
        |_, u| u,
    );
    let r = lipschitz_audit(&bad, 30, 2000, 7);
    assert!(r.violations > 0 && r.witness.is_some());

    assert!(psi_audit(&mf, 30).passed());
    let sqrt_psi = MellinKernelFamily::moment().with_nonlinear(
        |n, t, u: f64| moment_kernel(n).unwrap().eval(t) * u.signum() * u.abs().sqrt(),
        |_, u: f64| u.sqrt(),
    );
    let p = psi_audit(&sqrt_psi, 10);
    assert!(p.passed(), "{p:?}");
    // ψ_n(u) = eⁿ·u overflows before n = 800: no shared δ(w), no bound
    let growing = MellinKernelFamily::moment().with_nonlinear(|n, t, u| moment_kernel(n).unwrap().eval(t) * u, |n, u| if u == 0.0 { 0.0 } else { (n as f64).exp() * u });
    let p = psi_audit(&growing, 800);
    assert!(!p.passed());
}

#[test]
fn scale_invariance_of_mellin_masses() {
    let mf = MellinKernelFamily::moment();
    for n in [1, 5, 20] {
        let r = scale_invariance(&mf, n, &[0.1, 1.0, 10.0]).unwrap();
        assert!(r.passed(1e-10), "{r:?}");
    }
}

#[test]
fn star_property_for_moment_family() {
    let mf = MellinKernelFamily::moment();
    let cs = ConvergenceStructure::ordinary(1e-4);
    let c = Interval { lo: 0.25, hi: 4.0 };
    let r = star_property_audit(&mf, c, 6, 40, &cs).unwrap();
    assert_eq!(r.verdict, Verdict::Pass, "{r:?}");
    // for e^{-m}·4 ≥ 1 the outer mass stays at 1
    assert!((r.outer[0].1 - 1.0).abs() < 1e-8);
    assert!(r.outer[2].1 < 1e-6);
}

#[test]
fn modular_law_for_the_moment_family() {
    let mf = Arc::new(MellinKernelFamily::moment().with_rule(QuadratureRule::GaussLegendre { panels: 4, order: 16 }));
    let ms = MeasureSpace::haar().with_rule(QuadratureRule::GaussLegendre { panels: 8, order: 16 });
    let m = Modular::new(ConvexPhi::square(), ms, ConvergenceStructure::ordinary(2e-2));
    for n in [1, 2, 5, 10] {
        let g = operator_output(mf.clone(), &ramp(), n).sub(&ramp()).unwrap();
        let rho = modular_eval(&m, &g).unwrap().values()[0];
        let want = 1.0 / (2.0 * (n as f64 + 1.0));
        assert!((rho - want).abs() < 1e-8, "n = {n}: {rho} vs {want}");
    }
}

#[test]
fn uniform_experiment_on_log_tent() {
    let mf: Arc<dyn KernelOperator> = Arc::new(MellinKernelFamily::moment());
    let cs = ConvergenceStructure::ordinary(1e-1);
    let settings = ExperimentSettings {
        horizon: 24,
        deltas: vec![2.0],
        audit_horizon: 12,
    };
    let mode = ExperimentMode::Uniform {
        window: Interval { lo: 0.125, hi: 8.0 },
        points: 33,
    };
    let r = operator_convergence_experiment(mf, &log_tent(), &mode, &settings, &cs).unwrap();
    let u = r.uniform.as_ref().unwrap();
    assert!(r.compact_support);
    assert!(u.strictly_decreasing_from.is_some_and(|n| n <= 2), "{u:?}");
    // at the peak the error is ∫ n z^{n−1}(1 − f(z)) dz = 1/((n+1)·ln 4) up
    // to the truncation (1/4)^n
    let n = 24.0;
    let peak = (1.0 - 0.25f64.powf(n)) / ((n + 1.0) * 4f64.ln());
    assert!(u.sup_error[23] >= peak - 1e-9);
    assert_eq!(r.verdict, Verdict::Pass);
}

#[test]
fn refuses_uncertified_family() {
    let doubled: Arc<dyn KernelOperator> = Arc::new(MellinKernelFamily::moment().scaled(2.0));
    let settings = ExperimentSettings {
        horizon: 5,
        deltas: vec![2.0],
        audit_horizon: 8,
    };
    let mode = ExperimentMode::Uniform {
        window: Interval { lo: 0.5, hi: 2.0 },
        points: 5,
    };
    let err = operator_convergence_experiment(doubled, &log_tent(), &mode, &settings, &ConvergenceStructure::ordinary(1e-4))
        .unwrap_err();
    assert!(matches!(&err, Error::Precondition(m) if m.contains("reproduction")), "{err}");
}

#[test]
fn constant_reproduction_experiment() {
    let mf: Arc<dyn KernelOperator> = Arc::new(MellinKernelFamily::moment());
    let settings = ExperimentSettings {
        horizon: 8,
        deltas: vec![2.0],
        audit_horizon: 30,
    };
    let mode = ExperimentMode::Uniform {
        window: Interval { lo: 0.5, hi: 2.0 },
        points: 9,
    };
    let u = LatticeFunction::constant(&el(&[2.0, -1.0]));
    let r = operator_convergence_experiment(mf, &u, &mode, &settings, &ConvergenceStructure::ordinary(1e-4)).unwrap();
    assert!(!r.compact_support);
    assert!(r.uniform.unwrap().sup_error.iter().all(|e| *e < 1e-10));
}

#[test]
fn in_measure_and_modular_modes() {
    let mf: Arc<dyn KernelOperator> = Arc::new(MellinKernelFamily::moment().with_rule(QuadratureRule::GaussLegendre { panels: 4, order: 16 }));
    let cs = ConvergenceStructure::ordinary(5e-2);
    let settings = ExperimentSettings {
        horizon: 12,
        deltas: vec![2.0],
        audit_horizon: 8,
    };
    let window = Interval { lo: 0.125, hi: 8.0 };
    let mode = ExperimentMode::InMeasure {
        window,
        cells: 64,
        phi: ConvexPhi::square(),
        alpha: 1.0,
    };
    let r = operator_convergence_experiment(mf.clone(), &log_tent(), &mode, &settings, &cs).unwrap();
    assert_eq!(r.verdict, Verdict::Pass, "{:?}", r.in_measure);

    let ms = MeasureSpace::haar().with_rule(QuadratureRule::GaussLegendre { panels: 4, order: 16 });
    let mode = ExperimentMode::Modular {
        modular: Modular::new(ConvexPhi::square(), ms, cs.clone()),
        k_max: 1,
        k_min: 2,
        window,
        exhaust: 3,
        cells: 64,
    };
    let r = operator_convergence_experiment(mf, &log_tent(), &mode, &settings, &cs).unwrap();
    let m = r.modular.as_ref().unwrap();
    assert!((m.lambda - 0.5).abs() < 1e-15);
    assert!(m.search.solid);
    assert!(m.search.alpha.is_some_and(|a| a >= 1.0), "{:?}", m.search);
    assert_eq!(m.eac.eac1, Verdict::Pass, "{:?}", m.eac);
}
