use std::f64::consts::E;

use super::*;
use crate::convergence::{ConvergenceStructure, Verdict};
use crate::error::Error;
use crate::lattice::LatticeElement;

fn iv(lo: f64, hi: f64) -> Interval {
    Interval::new(lo, hi).unwrap()
}

fn set(lo: f64, hi: f64) -> IntervalSet {
    IntervalSet::single(iv(lo, hi))
}

fn cs() -> ConvergenceStructure {
    ConvergenceStructure::ordinary(1e-4).with_tail_fraction(0.25)
}

fn el(v: &[f64]) -> LatticeElement {
    LatticeElement::from_slice(v)
}

#[test]
fn simple_integrals() {
    let leb = MeasureSpace::lebesgue(0.0, 2.0).unwrap();
    let f = SimpleFunction::new(
        1,
        vec![(iv(0.0, 1.0), el(&[3.0])), (iv(1.0, 2.0), el(&[1.0]))],
    )
    .unwrap();
    assert_eq!(f.integrate(&set(0.0, 2.0), &leb).unwrap(), el(&[4.0]));

    let g = SimpleFunction::new(2, vec![(iv(0.0, 1.0), el(&[1.0, 2.0]))]).unwrap();
    assert_eq!(g.integrate(&set(0.0, 1.0), &leb).unwrap(), el(&[1.0, 2.0]));

    let haar = MeasureSpace::haar();
    let h = SimpleFunction::new(1, vec![(iv(1.0, E), el(&[1.0]))]).unwrap();
    let v = h.integrate(&set(1.0, E), &haar).unwrap();
    assert!((v.values()[0] - 1.0).abs() < 1e-15);
}

#[test]
fn simple_integral_is_representation_independent() {
    let leb = MeasureSpace::lebesgue(0.0, 2.0).unwrap();
    let f = SimpleFunction::new(
        2,
        vec![(iv(0.0, 1.0), el(&[3.0, -1.0])), (iv(0.5, 2.0), el(&[1.0, 4.0]))],
    )
    .unwrap();
    let a = set(0.25, 1.75);
    let base = f.integrate(&a, &leb).unwrap();
    let mut g = f.clone();
    for _ in 0..5 {
        g = g.refine(&leb);
        let v = g.integrate(&a, &leb).unwrap();
        for (x, y) in v.values().iter().zip(base.values()) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn infinite_cell_is_an_error_unless_coefficient_is_zero() {
    let ms = MeasureSpace::lebesgue_real();
    let f = SimpleFunction::new(1, vec![(iv(0.0, f64::INFINITY), el(&[1.0]))]).unwrap();
    assert!(matches!(
        f.integrate(&set(0.0, f64::INFINITY), &ms),
        Err(Error::InfiniteMeasure(_))
    ));
    let z = SimpleFunction::new(1, vec![(iv(0.0, f64::INFINITY), el(&[0.0]))]).unwrap();
    assert!(z.integrate(&set(0.0, f64::INFINITY), &ms).unwrap().is_zero());
}

#[test]
fn defining_sequence_for_identity_on_unit_interval() {
    let ms = MeasureSpace::lebesgue(0.0, 1.0).unwrap();
    let f = LatticeFunction::scalar(|t| t);
    let deltas: Vec<f64> = (1..=12).map(|n| 0.5f64.powi(n)).collect();
    let ds = build_defining_sequence(&f, &ms, iv(0.0, 1.0), &deltas, Partition::Dyadic).unwrap();
    for (n, err) in ds.uniform_error.iter().enumerate() {
        assert!(*err <= 0.5f64.powi(n as i32 + 1) * (1.0 + 1e-12), "n = {}", n + 1);
    }
    // 0 ≤ f_n ≤ f_{n+1} ≤ f on a probe grid
    for n in 1..ds.len() {
        let (a, b) = (ds.term(n), ds.term(n + 1));
        for k in 0..200 {
            let t = (k as f64 + 0.5) / 200.0;
            let (x, y) = (a.eval(t)[0], b.eval(t)[0]);
            assert!(0.0 <= x && x <= y + 1e-15 && y <= t + 1e-15);
        }
    }
}

#[test]
fn defining_sequence_for_constant_is_exact() {
    let ms = MeasureSpace::lebesgue(0.0, 3.0).unwrap();
    let c = el(&[2.0, -0.5]);
    let f = LatticeFunction::constant(&c).with_support(iv(1.0, 3.0));
    let ds = build_defining_sequence(&f, &ms, iv(1.0, 3.0), &[2.0, 1.0], Partition::Dyadic).unwrap();
    let t1 = ds.term(1);
    assert_eq!(t1.cells().len(), 1);
    assert_eq!(t1.cells()[0], (iv(1.0, 3.0), c));
}

#[test]
fn defining_sequence_for_tent_matches_brute_force_minima() {
    let ms = MeasureSpace::lebesgue(0.0, 2.0).unwrap();
    let f = LatticeFunction::tent(0.0, 0.7, 2.0, 1.0);
    let ds = build_defining_sequence(&f, &ms, iv(0.0, 2.0), &[1.0, 0.25], Partition::Dyadic).unwrap();
    for n in 1..=2 {
        let term = ds.term(n);
        assert_eq!(term.cells().len(), if n == 1 { 2 } else { 8 });
        for (cell, c) in term.cells() {
            let brute = (0..=10_000)
                .map(|k| f.eval(cell.lo + (cell.hi - cell.lo) * k as f64 / 10_000.0).unwrap().values()[0])
                .fold(f64::INFINITY, f64::min);
            assert!((c.values()[0] - brute).abs() < 1e-12, "cell {cell:?}");
        }
    }
}

#[test]
fn defining_sequence_rejects_unbounded_integrand() {
    let ms = MeasureSpace::lebesgue(0.0, 1.0).unwrap();
    let f = LatticeFunction::scalar(|t| 1.0 / t);
    let r = build_defining_sequence(&f, &ms, iv(0.0, 1.0), &[0.1], Partition::Dyadic);
    assert!(matches!(r, Err(Error::Precondition(_))));
}

#[test]
fn log_cells_have_log_diameter() {
    let ms = MeasureSpace::haar();
    let f = LatticeFunction::scalar(|t| t.ln());
    let ds = build_defining_sequence(&f, &ms, iv(0.25, 4.0), &[0.5], Partition::Triadic).unwrap();
    for (cell, _) in ds.term(1).cells() {
        assert!(ms.domain.diameter(cell) <= 0.5 + 1e-12);
    }
}

#[test]
fn in_measure_examples() {
    let ms = MeasureSpace::lebesgue(0.0, 1.0).unwrap();
    let loose = ConvergenceStructure::ordinary(1e-2);
    let spikes = FunctionSequence::new(1000, |n| {
        LatticeFunction::indicator(iv(0.0, 1.0 / n as f64), &el(&[n as f64]))
    });
    let zero = LatticeFunction::zero(1);
    let r = converges_in_measure(&spikes, &zero, &iv(0.0, 1.0), &ms, &loose, InMeasureMode::KyFan, 1 << 14)
        .unwrap();
    assert_eq!(r.verdict, Verdict::Pass);
    for n in [10usize, 100, 1000] {
        assert!((r.exceptional_mass[n - 1] - 1.0 / n as f64).abs() < 1e-4);
    }

    let f = LatticeFunction::scalar(|t| t * t);
    let same = FunctionSequence::constant(50, f.clone());
    let r = converges_in_measure(&same, &f, &iv(0.0, 1.0), &ms, &loose, InMeasureMode::Uniform, 1024)
        .unwrap();
    assert_eq!(r.verdict, Verdict::Pass);
    assert!(r.distance.iter().all(|&d| d == 0.0));

    let flat = FunctionSequence::constant(50, LatticeFunction::indicator(iv(0.0, 1.0), &el(&[1.0])));
    let r = converges_in_measure(&flat, &zero, &iv(0.0, 1.0), &ms, &loose, InMeasureMode::KyFan, 1024)
        .unwrap();
    assert_eq!(r.verdict, Verdict::Fail);
}

fn shrinking_probe() -> Probe {
    Probe::explicit(|n| set(0.0, 1.0 / n as f64))
}

#[test]
fn eac_examples() {
    let ms = MeasureSpace::lebesgue(0.0, 1.0).unwrap();
    let loose = ConvergenceStructure::ordinary(1e-2);
    let spikes = FunctionSequence::new(200, |n| {
        LatticeFunction::indicator(iv(0.0, 1.0 / n as f64), &el(&[n as f64]))
    });
    let r = equiabsolute_continuity_audit(&spikes, &ms, &shrinking_probe(), &iv(0.0, 1.0), &loose, 4, 4096)
        .unwrap();
    assert_eq!(r.eac1, Verdict::Fail);
    assert_eq!(r.failing, Some("eac.1"));
    assert!(r.probe_integrals.iter().all(|v| (v - 1.0).abs() < 1e-9));

    let flat = FunctionSequence::new(200, |n| LatticeFunction::indicator(iv(0.0, 1.0 / n as f64), &el(&[1.0])));
    let r = equiabsolute_continuity_audit(&flat, &ms, &shrinking_probe(), &iv(0.0, 1.0), &loose, 4, 4096)
        .unwrap();
    assert_eq!(r.verdict(), Verdict::Pass);
    let r = equiabsolute_continuity_audit(&flat, &ms, &Probe::WorstCase, &iv(0.0, 1.0), &loose, 4, 4096)
        .unwrap();
    assert_eq!(r.verdict(), Verdict::Pass);
}

#[test]
fn eac2_catches_mass_escaping_to_infinity() {
    let ms = MeasureSpace::lebesgue_real();
    let loose = ConvergenceStructure::ordinary(1e-2);
    // unit bumps sliding off to infinity: each B_m eventually misses them
    let slide = FunctionSequence::new(100, |n| {
        LatticeFunction::indicator(iv(n as f64, n as f64 + 1.0), &el(&[1.0]))
    });
    let r = equiabsolute_continuity_audit(&slide, &ms, &Probe::WorstCase, &iv(0.0, 1.0), &loose, 8, 1024)
        .unwrap();
    assert_eq!(r.eac2, Verdict::Fail);
    assert!(r.outer_limsup.iter().all(|&v| (v - 1.0).abs() < 1e-9));
}

#[test]
fn integrate_examples() {
    let ms = MeasureSpace::lebesgue(0.0, 1.0).unwrap();
    let r = integrate(&LatticeFunction::scalar(|t| t), &set(0.0, 1.0), &ms, &cs()).unwrap();
    assert!((r.value.values()[0] - 0.5).abs() < 1e-4);
    assert_eq!(r.verdict, Verdict::Pass);

    let haar = MeasureSpace::haar();
    let u = el(&[1.0, 0.5]);
    let r = integrate(&LatticeFunction::constant(&u), &set(1.0, E), &haar, &cs()).unwrap();
    for (a, b) in r.value.values().iter().zip(u.values()) {
        assert!((a - b).abs() < 1e-10, "{a} vs {b} ({:?})", r.verdict);
    }

    let v1 = el(&[2.0, -3.0]);
    let h = |t: f64| (t * 3.0).sin();
    let f = LatticeFunction::along(h, &v1);
    let r = integrate(&f, &set(0.0, 1.0), &ms, &cs()).unwrap();
    let scalar = (1.0 - 3f64.cos()) / 3.0;
    for (a, b) in r.value.values().iter().zip(v1.values()) {
        assert!((a - scalar * b).abs() < 1e-4);
    }
}

#[test]
fn integral_is_well_defined_and_monotone() {
    let ms = MeasureSpace::lebesgue(-1.0, 2.0).unwrap();
    let f = LatticeFunction::scalar(|t| (t * 2.0).cos() * t);
    let a = set(-1.0, 2.0);
    let d = integrate_with(&f, &a, &ms, &cs(), Partition::Dyadic, 16).unwrap();
    let t = integrate_with(&f, &a, &ms, &cs(), Partition::Triadic, 10).unwrap();
    assert!((d.value.values()[0] - t.value.values()[0]).abs() < 2e-4);
    let g = f.add(&LatticeFunction::scalar(|t| t * t)).unwrap();
    let dg = integrate(&g, &a, &ms, &cs()).unwrap();
    assert!(dg.value.values()[0] >= d.value.values()[0]);
}

#[test]
fn zero_measure_set_integrates_to_zero() {
    let ms = MeasureSpace::lebesgue(0.0, 1.0).unwrap();
    let r = integrate(&LatticeFunction::scalar(|t| t), &set(0.5, 0.5), &ms, &cs()).unwrap();
    assert!(r.value.is_zero());
}

#[test]
fn vitali_examples() {
    let ms = MeasureSpace::lebesgue(0.0, 1.0).unwrap();
    let loose = ConvergenceStructure::ordinary(1e-2);
    let flat = FunctionSequence::new(300, |n| LatticeFunction::indicator(iv(0.0, 1.0 / n as f64), &el(&[1.0])));
    let r = vitali_audit(&flat, &ms, &loose, &iv(0.0, 1.0), &shrinking_probe(), None, 4096).unwrap();
    assert!(r.confirmed);

    let spikes = FunctionSequence::new(300, |n| {
        LatticeFunction::indicator(iv(0.0, 1.0 / n as f64), &el(&[n as f64]))
    });
    let r = vitali_audit(&spikes, &ms, &loose, &iv(0.0, 1.0), &shrinking_probe(), None, 4096).unwrap();
    assert_eq!(r.hypotheses, Verdict::Fail);
    assert!(!r.confirmed);
    assert!(r.l1_norms.iter().all(|v| (v - 1.0).abs() < 1e-6));

    let tent = LatticeFunction::tent(0.0, 0.5, 1.0, 1.0);
    let scaled = {
        let tent = tent.clone();
        FunctionSequence::new(300, move |n| tent.scale(1.0 / n as f64))
    };
    let r = vitali_audit(&scaled, &ms, &loose, &iv(0.0, 1.0), &shrinking_probe(), Some(&tent), 1024).unwrap();
    assert_eq!(r.dominated, Some(Verdict::Pass));
    assert!(r.confirmed);
}

#[test]
fn quadrature_reference_examples() {
    let ms = MeasureSpace::new(Domain::new(iv(0.0, 1.0), Metric::Euclidean).unwrap(), Density::Lebesgue).unwrap();
    let v = ms.quadrature_reference(&LatticeFunction::scalar(|t| t), &set(0.0, 1.0), 1e-10).unwrap();
    assert!((v.values()[0] - 0.5).abs() < 1e-13);
    assert!(matches!(
        ms.quadrature_reference(&LatticeFunction::scalar(|t| 1.0 / t), &set(0.0, 1.0), 1e-8),
        Err(Error::Divergent(_))
    ));
    let haar = MeasureSpace::haar();
    let l4 = LatticeFunction::scalar(|t| if t < 1.0 { 4.0 * t.powi(4) } else { 0.0 }).with_breaks(&[1.0]);
    let v = haar.quadrature_reference(&l4, &set(0.0, f64::INFINITY), 1e-10).unwrap();
    assert!((v.values()[0] - 1.0).abs() < 1e-10);
}

#[test]
fn product_examples() {
    let ms = MeasureSpace::lebesgue(0.0, 1.0).unwrap();
    let id = LatticeFunction::scalar(|t| t);
    let r = product_integrability(&id, &id, &set(0.0, 1.0), &ms, &cs()).unwrap();
    assert!((r.value.values()[0] - 1.0 / 3.0).abs() < 1e-4);
    let zero = LatticeFunction::scalar(|_| 0.0);
    let r = product_integrability(&id, &zero, &set(0.0, 1.0), &ms, &cs()).unwrap();
    assert!(r.value.is_zero());
    let one = LatticeFunction::scalar(|_| 1.0);
    let q = LatticeFunction::along(|t| t.exp(), &el(&[1.0, 2.0]));
    let r = product_integrability(&one, &q, &set(0.0, 1.0), &ms, &cs()).unwrap();
    let direct = integrate(&q, &set(0.0, 1.0), &ms, &cs()).unwrap();
    assert_eq!(r.value, direct.value);

    let real = MeasureSpace::lebesgue_real();
    let unbounded = LatticeFunction::scalar(|t| t);
    assert!(matches!(
        product_integrability(&unbounded, &one, &set(0.0, f64::INFINITY), &real, &cs()),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn measure_is_additive_and_exhausting_sets_grow() {
    for ms in [MeasureSpace::haar(), MeasureSpace::lebesgue_real()] {
        let mut prev = 0.0;
        for m in 1..6 {
            let b = ms.exhausting_set(m);
            let mu = ms.measure(&b);
            assert!(mu.is_finite() && mu > prev);
            prev = mu;
            let mid = 0.5 * (b.lo + b.hi);
            let split = ms.measure(&iv(b.lo, mid)) + ms.measure(&iv(mid, b.hi));
            assert!((split - mu).abs() < 1e-12 * mu.max(1.0));
        }
    }
    assert!((MeasureSpace::haar().measure(&MeasureSpace::haar().exhausting_set(3)) - 6.0).abs() < 1e-12);
}

#[test]
fn log_metric_triangle_inequality() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let d = Domain::positive();
    for _ in 0..1000 {
        let [a, b, c]: [f64; 3] = std::array::from_fn(|_| rng.random_range(1e-3..1e3));
        assert!(d.distance(a, c) <= d.distance(a, b) + d.distance(b, c) + 1e-12);
    }
    assert!(Domain::new(iv(-1.0, 1.0), Metric::Log).is_err());
}

#[test]
fn fixed_rule_and_reference_agree() {
    let haar = MeasureSpace::haar();
    let f = LatticeFunction::tent(0.25, 1.0, 4.0, 1.0);
    let a = set(0.0, f64::INFINITY);
    let q = haar.quadrature(&f, &a, 1e-9).unwrap();
    let r = haar.quadrature_reference(&f, &a, 1e-10).unwrap();
    assert!((q.value[0] - r.values()[0]).abs() < 1e-9);
}
