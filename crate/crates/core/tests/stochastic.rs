use rieszlab::convergence::Verdict;
use rieszlab::stochastic::{isometry_check, ito_integrate, simulate_brownian, Integrand, TimeGrid};

const M: usize = 100_000;

fn mean_var(x: &[f64]) -> (f64, f64) {
    let m = x.len() as f64;
    let mean = x.iter().sum::<f64>() / m;
    (mean, x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0))
}

#[test]
fn terminal_variance_and_independent_increments() {
    let b = simulate_brownian(M, &TimeGrid::new(1.0, 8).unwrap(), 2024).unwrap();
    let (_, var) = mean_var(b.terminal().values());
    assert!((var - 1.0).abs() <= 3.0 * (2.0 / M as f64).sqrt(), "Var(B_T) = {var}");

    let (x, y) = (b.increment(1).unwrap(), b.increment(5).unwrap());
    let (mx, vx) = mean_var(&x);
    let (my, vy) = mean_var(&y);
    assert!((vx - 0.125).abs() < 3.0 * 0.125 * (2.0 / M as f64).sqrt());
    let cov = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (M as f64 - 1.0);
    let corr = cov / (vx * vy).sqrt();
    assert!(corr.abs() <= 3.0 / (M as f64).sqrt(), "corr = {corr}");
}

#[test]
fn isometry_for_the_standard_integrands() {
    let b = simulate_brownian(M, &TimeGrid::new(1.0, 512).unwrap(), 7).unwrap();
    let cases = [
        (Integrand::deterministic("one", |_| 1.0), 1.0),
        (Integrand::deterministic("t", |t| t), 1.0 / 3.0),
        (Integrand::step(&[0.5], &[1.0, 2.0]).unwrap(), 2.5),
    ];
    for (f, reference) in &cases {
        let r = isometry_check(f, &b, *reference).unwrap();
        assert_eq!(r.verdict, Verdict::Pass, "{r:?}");
        // the forward sum of a deterministic integrand is centred Gaussian
        let sd = r.grid_reference.sqrt();
        assert!(r.sample_mean.abs() <= 3.0 * sd / (M as f64).sqrt(), "{r:?}");
    }
    let one = ito_integrate(&cases[0].0, &b).unwrap();
    let bt = b.terminal();
    assert!(one.values().iter().zip(bt.values()).all(|(x, y)| (x - y).abs() <= 1e-12 * y.abs().max(1.0)));
}

#[test]
fn sums_are_linear_in_the_integrand() {
    let b = simulate_brownian(1000, &TimeGrid::new(2.0, 64).unwrap(), 1).unwrap();
    let f = Integrand::deterministic("sin", f64::sin);
    let g = Integrand::step(&[0.3, 1.1], &[2.0, -1.0, 0.5]).unwrap();
    let gs = g.clone();
    let h = Integrand::deterministic("sin + 3 step", move |t| t.sin() + 3.0 * gs.eval(t, &[]));
    let (x, y, z) = (
        ito_integrate(&f, &b).unwrap(),
        ito_integrate(&g, &b).unwrap(),
        ito_integrate(&h, &b).unwrap(),
    );
    for i in 0..1000 {
        let want = x.values()[i] + 3.0 * y.values()[i];
        assert!((z.values()[i] - want).abs() < 1e-12 * want.abs().max(1.0));
    }
}
