use num_complex::Complex64 as C64;
use polspec::model::constants::*;
use polspec::model::*;
use polspec::tdse::propagator::evolve_cfm4;
use polspec::tdse::*;
use std::f64::consts::PI;

fn model(v1: f64, v2: f64, parity: Parity) -> LatticeModel {
    LatticeModel::new(LAMBDA_1064, RB85_MASS_AMU * AMU, v1, v2, 0.0, parity, vec![0.0], 1e-6).unwrap()
}

fn ktwo_pi(f: f64) -> f64 {
    2.0 * PI * f
}

#[test]
fn no_drive_no_transfer() {
    let m = model(ktwo_pi(250e3), ktwo_pi(250e3), Parity::Even);
    let s = m.derived();
    let p = DrivePulse::new(12e-6, 120e-6, 0.0).unwrap();
    assert_eq!(propagate(&m, &s, &p, 0.3, 0.0).unwrap(), 0.0);
    assert_eq!(propagate(&m, &s, &p, -4.7, 2e5).unwrap(), 0.0);
}

#[test]
fn diagonal_follows_free_energies() {
    let m = model(ktwo_pi(12.5e3), ktwo_pi(12.5e3), Parity::Even);
    let s = m.derived();
    let h = assemble(&m, &s, 0.0, Ladder::new(-2, 2), 0.0, 0.0);
    assert_eq!(h.diag_a[2], 0.0);
    assert_eq!(h.diag_a[1], s.omega_k);
    assert_eq!(h.diag_a[3], s.omega_k);
    let h = assemble(&m, &s, 0.6, Ladder::new(-2, 2), 3.0e4, 0.0);
    for (i, n) in (-2..=2).enumerate() {
        let e = s.omega_k * (0.3 + n as f64).powi(2);
        assert!((h.diag_a[i] - (e + 1.5e4)).abs() < 1e-9);
        assert!((h.diag_b[i] - (e - 1.5e4)).abs() < 1e-9);
    }
}

/// One rung of each level coupled by a constant drive.
fn two_rung(parity: Parity, omega: f64, delta: f64, t: f64) -> (f64, f64) {
    // V = 0 so the rungs only talk through the drive.
    let m = model(0.0, 0.0, parity);
    let s = m.derived();
    let ladder = Ladder::new(0, 1);
    let h = assemble(&m, &s, 0.3, ladder, delta, 0.0);
    let mut psi = vec![C64::new(0.0, 0.0); 4];
    psi[0] = C64::new(1.0, 0.0);
    evolve_cfm4(&h, |_| omega, omega, t, 64, 1e-15, &mut psi);
    // Level-2 rung 1 is the only state linked to level-1 rung 0.
    let p = psi[3].norm_sqr();
    let dd = h.diag_a[0] - h.diag_b[1];
    let w = h.with_omega(omega).link();
    let r = (w * w + 0.25 * dd * dd).sqrt();
    let exact = w * w / (r * r) * (r * t).sin().powi(2);
    (p, exact)
}

#[test]
fn two_rung_matches_rabi_formula() {
    for parity in [Parity::Even, Parity::Odd] {
        for (omega, delta, t) in [(1.0e5, 0.0, 40e-6), (2.0e5, -3.0e4, 25e-6), (5.0e4, 2.2e5, 60e-6)] {
            let (p, exact) = two_rung(parity, omega, delta, t);
            assert!((p - exact).abs() < 1e-6, "{parity:?} {p} {exact}");
        }
    }
}

#[test]
fn norm_is_conserved() {
    let o = ktwo_pi(1.25e6);
    let p = DrivePulse::pi_pulse(tau0_from_fwhm(20e-6).unwrap()).unwrap();
    for parity in [Parity::Even, Parity::Odd] {
        let m = model(o, 0.8 * o, parity);
        let s = m.derived();
        let solver = TdseSolver::new(&m, &s, &p, TdseOptions::default());
        for (beta, delta) in [(0.0, 0.0), (3.3, 1.5e6), (-7.9, -4.0e5), (1.0, 2.0e5)] {
            let plan = solver.plan(beta).unwrap();
            let out = solver.run(&plan, delta).unwrap();
            assert!(out.norm_drift < 1e-8, "{}", out.norm_drift);
            assert!(out.edge_population < 1e-10);
            assert!((0.0..=1.0).contains(&out.population));
        }
    }
}

#[test]
fn step_halving_and_widening_are_converged() {
    let o = ktwo_pi(1.25e6);
    let m = model(o, o, Parity::Even);
    let s = m.derived();
    let p = DrivePulse::pi_pulse(tau0_from_fwhm(20e-6).unwrap()).unwrap();
    let solver = TdseSolver::new(&m, &s, &p, TdseOptions::default());
    for (beta, delta) in [(0.0, 0.0), (2.5, 1.8e6), (-6.0, 0.9e6)] {
        let c = solver.convergence_check(beta, delta).unwrap();
        assert!(c.max_change() < 1e-4, "{c:?}");
    }
}

#[test]
fn folding_is_invisible() {
    let o = ktwo_pi(250e3);
    let p = DrivePulse::pi_pulse(50e-6).unwrap();
    for parity in [Parity::Even, Parity::Odd] {
        let m = model(o, 0.9 * o, parity);
        let s = m.derived();
        let solver = TdseSolver::new(&m, &s, &p, TdseOptions::default());
        for (q, n0, delta) in [(0.4, 0, 0.0), (-0.7, 3, 3.0e5), (1.0, -2, -2.0e5)] {
            let a = solver.run(&solver.plan_with_index(q, n0).unwrap(), delta).unwrap().population;
            let b = solver.run(&solver.plan_with_index(q - 2.0, n0 + 1).unwrap(), delta).unwrap().population;
            assert!((a - b).abs() < 1e-10, "{a} {b}");
        }
    }
}

/// At β = 0 the initial plane wave is even under z → -z. An even drive keeps
/// level 2 even (only even ν' reached, Δν even); an odd drive makes it odd.
#[test]
fn parity_selects_vibrational_changes() {
    let v = ktwo_pi(1.25e6);
    let p = DrivePulse::pi_pulse(tau0_from_fwhm(20e-6).unwrap()).unwrap();
    for (parity, sign) in [(Parity::Even, 1.0), (Parity::Odd, -1.0)] {
        let m = model(v, v, parity);
        let s = m.derived();
        let w = 2.0 * PI * s.f1;
        let solver = TdseSolver::new(&m, &s, &p, TdseOptions::default());
        let plan = solver.plan(0.0).unwrap();
        assert_eq!(plan.ladder.n_min, -plan.ladder.n_max);
        let mut peak = 0.0f64;
        for delta in [0.0, w - 0.25 * s.omega_k, 2.0 * w - 0.75 * s.omega_k, -w] {
            let (psi, _) = solver.evolve_on(&plan, plan.ladder, delta, solver.n_steps());
            let d = psi.b.len();
            let wrong: f64 = (0..d).map(|i| (psi.b[i] - psi.b[d - 1 - i] * sign).norm_sqr()).sum();
            let pop = psi.population_b();
            peak = peak.max(pop);
            assert!(wrong < 1e-20 + 1e-12 * pop, "{parity:?} {delta} {wrong}");
        }
        assert!(peak > 0.01);
    }
}

#[test]
fn ladder_indices_stay_on_the_momentum_comb() {
    let m = model(ktwo_pi(250e3), ktwo_pi(250e3), Parity::Even);
    let s = m.derived();
    let p = DrivePulse::pi_pulse(50e-6).unwrap();
    let solver = TdseSolver::new(&m, &s, &p, TdseOptions::default());
    let plan = solver.plan(3.4).unwrap();
    let (psi, _) = solver.evolve_on(&plan, plan.ladder, 0.0, solver.n_steps());
    for i in 0..psi.a.len() {
        let beta = psi.beta_of(i);
        let k = (beta - 3.4) / 2.0;
        assert!((k - k.round()).abs() < 1e-12);
    }
}

#[test]
fn deep_lattice_center_is_inside_the_central_peak() {
    let v = ktwo_pi(1.25e6);
    let m = model(v, v, Parity::Even);
    let s = m.derived();
    let p = DrivePulse::pi_pulse(tau0_from_fwhm(20e-6).unwrap()).unwrap();
    let center = propagate(&m, &s, &p, 0.0, 0.0).unwrap();
    let off = propagate(&m, &s, &p, 0.0, 2.0 * s.omega_k).unwrap();
    assert!(center > 0.3, "{center}");
    assert!(off < center);
}
