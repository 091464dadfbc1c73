use chi2atom::dynamics::*;
use chi2atom::fock::*;
use chi2atom::ode::{uniform_grid, Tolerance};

fn scan(g: f64) -> (Vec<(f64, f64)>, f64) {
    let atom = AtomSpec::degenerate(g, 1.0, 1.0);
    let basis = build_basis(&atom, 4).unwrap();
    let det = uniform_grid(-10.0, 10.0, 801);
    let i20 = basis.index_with(&[(ModeLabel::A, 2)]).unwrap();
    let pop = steady_state_scan(&atom, &basis, ModeLabel::A, 0.2, &det, i20).unwrap();
    let center = pop[400];
    (find_peaks(&det, &pop), center)
}

#[test]
fn blockade_spectrum_splits_linearly_in_g() {
    let (p4, c4) = scan(4.0);
    let (p8, c8) = scan(8.0);
    assert_eq!(p4.len(), 2);
    assert_eq!(p8.len(), 2);
    let s4 = p4[1].0 - p4[0].0;
    let s8 = p8[1].0 - p8[0].0;
    assert!((s8 / s4 - 2.0).abs() < 0.1, "{}", s8 / s4);
    assert!(p4[0].1 / c4 >= 5.0 && p8[0].1 / c8 >= 5.0);
    // two drive photons reach the split two-excitation levels ±√2 g
    let levels = eigenlevels(
        &build_hamiltonian(
            &AtomSpec::degenerate(4.0, 1.0, 1.0),
            &build_basis(&AtomSpec::degenerate(4.0, 1.0, 1.0), 2).unwrap(),
        )
        .unwrap(),
        &build_basis(&AtomSpec::degenerate(4.0, 1.0, 1.0), 2).unwrap(),
        2,
    )
    .unwrap();
    let gap = levels[1].0.re - levels[0].0.re;
    assert!((s4 - gap / 2.0).abs() < 0.05 * s4, "{s4} {gap}");
}

#[test]
fn rabi_period_halves_with_double_drive() {
    let atom = AtomSpec::degenerate(80.0, 1.0, 1.0);
    let basis = build_basis(&atom, 3).unwrap();
    let t = uniform_grid(0.0, 2.0, 4001);
    let i10 = basis.index_with(&[(ModeLabel::A, 1)]).unwrap();
    let period = |eps: f64| {
        let tr = driven_no_jump(&atom, &basis, ModeLabel::A, eps, &t, Tolerance::default()).unwrap();
        let p: Vec<f64> = tr.populations.iter().map(|p| p[i10]).collect();
        oscillation_period(&t, &p).unwrap()
    };
    let (p10, p20) = (period(10.0), period(20.0));
    assert!((p20 / p10 - 0.5).abs() < 0.02);
    let two_level = |e: f64| std::f64::consts::PI / (e * e - 0.25f64).sqrt();
    assert!((p10 - two_level(10.0)).abs() < 0.02 * p10);
}
