mod common;

use std::f64::consts::PI;

use common::{c, i0_quadrature, DrivenPropagator};
use num_complex::Complex64;
use proptest::prelude::*;
use starkfloq::integrator::{convergence_study, evolve, evolve_state, required_margin, step, IntegratorConfig};
use starkfloq::propagator::*;
use starkfloq::{ChainParams, Error, StateVector};

fn delta(params: &ChainParams) -> StateVector {
    StateVector::site(params, 0).unwrap()
}

/// Window wide enough for the integrator margin rule at `t`.
fn driven(kappa0: Complex64, omega: f64, omega0: f64, t: f64) -> ChainParams {
    let probe = ChainParams::centered(kappa0, omega, omega0, 1).unwrap();
    ChainParams::centered(kappa0, omega, omega0, required_margin(&probe, t)).unwrap()
}

#[test]
fn static_elements_match_interaction_picture_oracle() {
    for kappa in [c(1.0, 0.0), c(0.0, 1.0), Complex64::from_polar(1.0, PI / 4.0), c(0.3, -1.2)] {
        for t in [0.4, 1.7, 5.0] {
            let oracle = DrivenPropagator::new(kappa, 0.0, 1.0, t, 60);
            for (m, n) in [(0, 0), (3, 1), (-2, 4), (7, -1), (-5, -5)] {
                let got = u_mn(m, n, t, kappa, 1.0).unwrap();
                let want = oracle.element(m, n);
                assert!((got - want).norm() < 1e-12, "kappa {kappa} t {t} ({m},{n}): {got} vs {want}");
            }
        }
    }
}

#[test]
fn periodic_in_bloch_period() {
    let t_b = 2.0 * PI;
    for kappa in [c(1.0, 0.0), c(0.0, 1.0), Complex64::from_polar(1.0, PI / 4.0)] {
        for (m, n) in [(0, 0), (2, -1), (-3, 3), (5, 4)] {
            for t in [0.3, 2.2] {
                let a = u_mn(m, n, t, kappa, 1.0).unwrap();
                let b = u_mn(m, n, t + t_b, kappa, 1.0).unwrap();
                assert!((a - b).norm() < 1e-12);
            }
            let at_period = u_mn(m, n, t_b, kappa, 1.0).unwrap();
            let id = if m == n { c(1.0, 0.0) } else { c(0.0, 0.0) };
            assert!((at_period - id).norm() < 1e-10);
        }
    }
}

#[test]
fn group_property() {
    let kappa = c(1.0, 0.5);
    let (lo, hi) = (-100, 100);
    let u1 = propagator_matrix(lo, hi, 0.3, kappa, 1.0).unwrap();
    let u2 = propagator_matrix(lo, hi, 0.7, kappa, 1.0).unwrap();
    let u12 = propagator_matrix(lo, hi, 1.0, kappa, 1.0).unwrap();
    let len = u1.len();
    let mut worst: f64 = 0.0;
    // central block; the product sum is complete there because U is banded
    for i in 80..121 {
        for j in 80..121 {
            let s: Complex64 = (0..len).map(|k| u1[i][k] * u2[k][j]).sum();
            worst = worst.max((s - u12[i][j]).norm());
        }
    }
    assert!(worst < 1e-9, "{worst:e}");
}

#[test]
fn unitary_for_real_hopping() {
    let u = propagator_matrix(-50, 50, 2.3, c(1.0, 0.0), 1.0).unwrap();
    let mut worst: f64 = 0.0;
    for a in 30..71 {
        for b in 30..71 {
            let s: Complex64 = (0..u.len()).map(|k| u[k][a].conj() * u[k][b]).sum();
            let id = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((s - id).norm());
        }
    }
    assert!(worst < 1e-10, "{worst:e}");
}

#[test]
fn analytic_probability_for_real_and_mixed_hopping() {
    let p = ChainParams::centered(c(1.0, 0.0), 0.0, 1.0, 50).unwrap();
    let grid = uniform_grid(0.0, 6.0 * PI, 61);
    let tr = bloch_trajectory(&delta(&p), &p, &grid).unwrap();
    assert!(tr.totals.iter().all(|t| (t - 1.0).abs() < 1e-12));

    let p = ChainParams::centered(c(0.0, 1.0), 0.0, 1.0, 50).unwrap();
    let s = evolve_analytic(&delta(&p), 2.0 * PI, p.kappa0, 1.0).unwrap();
    assert!((s.norm_sqr() - 1.0).abs() < 1e-10);

    // Σ_m |J_m(x)|² = I0(2 Im x): P(t) never drops below 1 and returns to 1 each period
    let kappa = Complex64::from_polar(1.0, PI / 4.0);
    let p = ChainParams::centered(kappa, 0.0, 1.0, 50).unwrap();
    let tr = bloch_trajectory(&delta(&p), &p, &uniform_grid(0.0, 2.0 * PI, 101)).unwrap();
    for (&t, &total) in tr.times.iter().zip(&tr.totals) {
        let x_im = 4.0 * kappa.im * (t / 2.0).sin();
        let want = i0_quadrature(2.0 * x_im);
        assert!((total / want - 1.0).abs() < 1e-10, "t {t}: {total} vs {want}");
    }
    let max = tr.totals.iter().cloned().fold(0.0, f64::max);
    assert!(max > 40.0 && (tr.totals[100] - 1.0).abs() < 1e-10);
}

#[test]
fn narrow_window_trips_leak_monitor() {
    let p = ChainParams::centered(c(2.0, 0.0), 0.0, 1.0, 6).unwrap();
    assert!(matches!(evolve_analytic(&delta(&p), PI, p.kappa0, 1.0), Err(Error::Leak { .. })));
}

#[test]
fn integrator_matches_analytic_static_evolution() {
    for kappa in [c(0.0, 1.0), c(1.0, 1.0), Complex64::from_polar(1.0, PI / 4.0)] {
        let t = 3.0 * 2.0 * PI;
        let p = driven(kappa, 0.0, 1.0, t);
        let cfg = IntegratorConfig::default_for(&p);
        let num = evolve_state(&delta(&p), &p, t, &cfg).unwrap();
        let ana = evolve_analytic(&delta(&p), t, kappa, 1.0).unwrap();
        let err = num.max_abs_diff(&ana);
        assert!(err < 1e-6, "kappa {kappa}: {err:e}");
    }
    // total probability at t = π, κ = i
    let p = driven(c(0.0, 1.0), 0.0, 1.0, PI);
    let cfg = IntegratorConfig::default_for(&p);
    let num = evolve_state(&delta(&p), &p, PI, &cfg).unwrap();
    let ana = evolve_analytic(&delta(&p), PI, p.kappa0, 1.0).unwrap();
    assert!((num.norm_sqr() / ana.norm_sqr() - 1.0).abs() < 1e-8);
}

#[test]
fn integrator_matches_exact_driven_propagator() {
    for (kappa, omega, t) in [
        (c(1.0, 0.0), 1.0, 4.0 * PI),
        (c(0.0, 1.0), 1.0, 2.0 * PI),
        (Complex64::from_polar(1.0, PI / 4.0), 0.1, 3.0 * PI),
        (c(0.5, -0.3), 0.6, 5.0),
    ] {
        let p = driven(kappa, omega, 1.0, t);
        let cfg = IntegratorConfig::default_for(&p).with_dt(2.0 * PI / 4000.0);
        let num = evolve_state(&delta(&p), &p, t, &cfg).unwrap();
        let oracle = DrivenPropagator::new(kappa, omega, 1.0, t, 120);
        let scale = num.amplitudes.iter().map(|a| a.norm()).fold(0.0, f64::max);
        let err = num.sites().map(|m| (num.get(m) - oracle.element(m, 0)).norm()).fold(0.0, f64::max);
        assert!(err < 1e-6 * scale, "kappa {kappa} omega {omega}: {err:e} (scale {scale:e})");
    }
}

#[test]
fn diagonal_step_is_exact_phase() {
    let p = ChainParams::centered(c(0.0, 0.0), 0.0, 1.3, 10).unwrap();
    let mut s = StateVector::zeros(p.n_min, p.len());
    for (i, a) in s.amplitudes.iter_mut().enumerate() {
        *a = c(1.0 + i as f64, -0.5);
    }
    let dt = 0.01;
    let out = step(&s, 0.0, dt, &p, 1e-14).unwrap();
    for n in p.n_min..=p.n_max {
        let want = s.get(n) * c(0.0, -(n as f64) * 1.3 * dt).exp();
        assert!((out.get(n) - want).norm() < 1e-13);
    }
}

#[test]
fn bloch_return_after_one_period() {
    let p = driven(c(1.0, 0.0), 0.0, 1.0, 2.0 * PI);
    let cfg = IntegratorConfig::default_for(&p);
    let s = evolve_state(&delta(&p), &p, 2.0 * PI, &cfg).unwrap();
    assert!(s.max_abs_diff(&delta(&p)) < 1e-8);
}

#[test]
fn real_hopping_conserves_probability_over_ten_periods() {
    let t = 20.0 * PI;
    let p = driven(c(1.0, 0.0), 0.37, 1.0, t);
    let cfg = IntegratorConfig::default_for(&p).with_record_every(50);
    let tr = evolve(&delta(&p), &p, t, &cfg).unwrap();
    let dev = tr.totals.iter().map(|x| (x - 1.0).abs()).fold(0.0, f64::max);
    assert!(dev < 1e-8, "{dev:e}");
}

#[test]
fn resonance_spreads_without_return() {
    let t = 20.0 * PI;
    let p = driven(c(1.0, 0.0), 1.0, 1.0, t);
    let cfg = IntegratorConfig::default_for(&p).with_record_every(500);
    let tr = evolve(&delta(&p), &p, t, &cfg).unwrap();
    let p0 = tr.sites().iter().position(|&n| n == 0).unwrap();
    for (k, row) in tr.rescaled.iter().enumerate().skip(1) {
        assert!(row[p0] < 0.5, "returned at t = {}", tr.times[k]);
    }
}

#[test]
fn self_convergence_is_second_order() {
    let t = 2.0 * PI;
    let p = driven(c(1.0, 0.0), 1.0, 1.0, t);
    let base = 2.0 * PI / 100.0;
    let dts = [base, base / 2.0, base / 4.0];
    let rows = convergence_study(&delta(&p), &p, t, &dts, 1e-14).unwrap();
    let order = rows.last().unwrap().order.unwrap();
    assert!((order - 2.0).abs() < 0.1, "{rows:?}");
}

#[test]
fn richardson_ratio_off_resonance() {
    let t = 2.0 * PI;
    let p = driven(Complex64::from_polar(1.0, PI / 4.0), 0.1, 1.0, t);
    let base = 2.0 * PI / 100.0;
    let rows = convergence_study(&delta(&p), &p, t, &[base, base / 2.0], 1e-14).unwrap();
    let ratio = rows[0].error / rows[1].error;
    assert!((ratio - 4.0).abs() < 0.5, "{ratio}");
}

#[test]
fn margin_rule_is_enforced() {
    let p = ChainParams::centered(c(1.0, 0.0), 0.0, 1.0, 20).unwrap();
    let cfg = IntegratorConfig::default_for(&p);
    assert!(matches!(evolve(&delta(&p), &p, 10.0, &cfg), Err(Error::Window(_))));
}

#[test]
fn oversized_step_is_rejected() {
    let p = ChainParams::centered(c(1.0, 0.0), 0.0, 1.0, 50).unwrap();
    let cfg = IntegratorConfig::default_for(&p).with_dt(1.0);
    assert!(matches!(evolve(&delta(&p), &p, 1.0, &cfg), Err(Error::InvalidParams(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn analytic_matches_oracle_for_random_static_hopping(
        re in -1.5f64..1.5, im in -1.5f64..1.5, t in 0.0f64..20.0, m in -6i64..=6, n in -6i64..=6, w0 in 0.5f64..2.0,
    ) {
        let kappa = c(re, im);
        let got = u_mn(m, n, t, kappa, w0).unwrap();
        let want = DrivenPropagator::new(kappa, 0.0, w0, t, 60).element(m, n);
        prop_assert!((got - want).norm() < 1e-11 * want.norm().max(1.0));
    }

    #[test]
    fn real_hopping_conserves_norm(k in -2.0f64..2.0, t in 0.0f64..30.0) {
        let p = ChainParams::centered(c(k, 0.0), 0.0, 1.0, 60).unwrap();
        let s = evolve_analytic(&delta(&p), t, p.kappa0, 1.0).unwrap();
        prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
    }
}
