mod common;

use std::f64::consts::PI;

use common::{bessel_j_oracle, c, i0_quadrature};
use num_complex::Complex64;
use proptest::prelude::*;
use starkfloq::exponent::*;
use starkfloq::integrator::{required_margin, IntegratorConfig};
use starkfloq::propagator::uniform_grid;
use starkfloq::resonance::*;
use starkfloq::{ChainParams, StateVector};

fn i_pow(k: i64) -> Complex64 {
    [c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)][k.rem_euclid(4) as usize]
}

#[test]
fn heq_matches_closed_form() {
    for kappa in [c(1.0, 0.0), c(0.0, 1.0), Complex64::from_polar(1.0, PI / 4.0)] {
        let t = 7.0;
        let s = heq_evolve(&delta_levels(level_half_width(kappa, t)), kappa, t).unwrap();
        for n in [-9, -2, 0, 1, 5, 12] {
            let want = i_pow(n) * bessel_j_oracle(n, -kappa * t);
            assert!((s.get(n) - want).norm() < 1e-12 * want.norm().max(1.0), "kappa {kappa} n {n}");
        }
    }
}

#[test]
fn total_probability_follows_i0() {
    for t in [1.0, 5.0, 20.0] {
        let kappa = c(0.0, 1.0);
        let s = heq_evolve(&delta_levels(level_half_width(kappa, t)), kappa, t).unwrap();
        let want = i0_quadrature(2.0 * t);
        assert!((s.norm_sqr() / want - 1.0).abs() < 1e-8, "t {t}");
        assert!((total_level_probability(kappa, t).unwrap() / want - 1.0).abs() < 1e-12);
    }
    let s = heq_evolve(&delta_levels(level_half_width(c(1.0, 0.0), 50.0)), c(1.0, 0.0), 50.0).unwrap();
    assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
}

#[test]
fn growth_rate_matches_finite_difference() {
    let kappa = Complex64::from_polar(1.0, PI / 4.0);
    let t = 10.0;
    let h = 1e-3;
    let ln_p = |t: f64| {
        let s = heq_evolve(&delta_levels(level_half_width(kappa, t + 1.0)), kappa, t).unwrap();
        s.norm_sqr().ln()
    };
    let fd = (ln_p(t + h) - ln_p(t - h)) / (2.0 * h);
    let rate = level_growth_rate(kappa, t).unwrap();
    assert!((fd - rate).abs() < 1e-6, "{fd} vs {rate}");
    let asymptote = 2.0 * kappa.im;
    assert!((rate / asymptote - 1.0).abs() < 0.1);
}

fn fit(kappa: Complex64, method: Method) -> ExponentFit {
    let times = uniform_grid(10.0, 100.0, 91);
    let s = spread_series(kappa, &times, method).unwrap();
    fit_exponent(&s, (10.0, 100.0)).unwrap()
}

#[test]
fn ballistic_front_for_real_hopping() {
    let f = fit(c(1.0, 0.0), Method::auto(c(1.0, 0.0)));
    assert_eq!(f.method, Method::Wavefront);
    assert!((f.z - 1.0).abs() < 0.05, "{f:?}");
}

#[test]
fn outermost_peak_carries_finite_time_drift() {
    // second route to the front: the outermost maximum itself lags as t^{1/3}
    let times = uniform_grid(10.0, 100.0, 91);
    let pts: Vec<(f64, f64)> = times
        .iter()
        .map(|&t| {
            let s = heq_evolve(&delta_levels(level_half_width(c(1.0, 0.0), t)), c(1.0, 0.0), t).unwrap();
            (t, outermost_peak(&s.probs(), s.n_min, Side::Positive).unwrap())
        })
        .collect();
    let (z, _, _) = loglog_fit(&pts).unwrap();
    assert!(z > 1.0 && z < 1.1, "{z}");
    // both routes track the same front up to O(t^{1/3})
    let front = fit(c(1.0, 0.0), Method::Wavefront);
    assert!((front.z - 1.0).abs() < (z - 1.0).abs());
}

#[test]
fn diffusive_core_for_complex_hopping() {
    for kappa in [c(0.0, 1.0), Complex64::from_polar(1.0, PI / 4.0), c(0.5, 0.5)] {
        let f = fit(kappa, Method::auto(kappa));
        assert_eq!(f.method, Method::Fwhm);
        assert!((f.z - 0.5).abs() < 0.05, "kappa {kappa}: {f:?}");
    }
}

#[test]
fn gaussian_width_prediction() {
    for kappa in [c(0.0, 1.0), Complex64::from_polar(1.0, PI / 4.0)] {
        let t = 50.0;
        let s = heq_evolve(&delta_levels(level_half_width(kappa, t)), kappa, t).unwrap();
        let g = gaussian_profile_check(&s.probs(), s.n_min, kappa, t).unwrap();
        assert!(g.relative_error() < 0.15 && g.r_squared > 0.99, "kappa {kappa}: {g:?}");
    }
}

fn rwa_params(kappa: Complex64, t: f64) -> (ChainParams, StateVector) {
    let probe = ChainParams::centered(kappa, 1.0, 1.0, 1).unwrap();
    let p = ChainParams::centered(kappa, 1.0, 1.0, required_margin(&probe, t) + 20).unwrap();
    let init = StateVector::site(&p, 0).unwrap();
    (p, init)
}

#[test]
fn rwa_reproduces_full_dynamics_at_resonance() {
    for kappa in [c(0.25, 0.0), c(0.0, 0.25)] {
        let t = 4.0 * PI;
        let (p, init) = rwa_params(kappa, t);
        let pts = rwa_consistency(&init, &p, &[t], &IntegratorConfig::default_for(&p)).unwrap();
        assert!(pts[0].l1 < 0.15, "kappa {kappa}: {:?}", pts[0]);
    }
}

#[test]
fn rwa_rejects_off_resonance_and_strong_hopping() {
    let (mut p, init) = rwa_params(c(0.25, 0.0), 1.0);
    p.omega = 0.9;
    assert!(rwa_consistency(&init, &p, &[1.0], &IntegratorConfig::default_for(&p)).is_err());
    let (p, init) = rwa_params(c(0.5, 0.0), 1.0);
    assert!(rwa_consistency(&init, &p, &[1.0], &IntegratorConfig::default_for(&p)).is_err());
}

#[test]
fn level_projection_round_trip() {
    let p = ChainParams::centered(c(0.6, 0.3), 1.0, 1.0, 60).unwrap();
    let t = 0.8;
    let mut levels = StateVector::zeros(-20, 41);
    for (k, a) in levels.amplitudes.iter_mut().enumerate() {
        *a = c((k as f64 * 0.37).sin(), (k as f64 * 0.11).cos()) * (-(k as f64 - 20.0).powi(2) / 50.0).exp();
    }
    levels.time = t;
    let full = reconstruct_from_levels(&levels, &p, t).unwrap();
    let back = project_full_to_levels(&full, &p, t).unwrap();
    let err = (-20..=20).map(|m| (back.get(m) - levels.get(m)).norm()).fold(0.0, f64::max);
    assert!(err < 1e-12, "{err:e}");
}

#[test]
fn level_trajectory_csv_layout() {
    let tr = heq_trajectory(c(1.0, 0.0), &[0.0, 1.0, 2.0]).unwrap();
    let csv = tr.to_csv();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("t,P_total,P_level_"));
    assert_eq!(csv.lines().count(), 4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn heq_is_a_group(re in -1.0f64..1.0, im in -1.0f64..1.0, t1 in 0.0f64..6.0, t2 in 0.0f64..6.0) {
        let kappa = c(re, im);
        let half = level_half_width(kappa, t1 + t2);
        let direct = heq_evolve(&delta_levels(half), kappa, t1 + t2).unwrap();
        let two = heq_evolve(&heq_evolve(&delta_levels(half), kappa, t1).unwrap(), kappa, t2).unwrap();
        let scale = direct.amplitudes.iter().map(|a| a.norm()).fold(0.0, f64::max);
        prop_assert!(direct.max_abs_diff(&two) < 1e-11 * scale.max(1.0));
    }

    #[test]
    fn heq_total_matches_i0(re in -1.0f64..1.0, im in -1.0f64..1.0, t in 0.0f64..15.0) {
        let kappa = c(re, im);
        let s = heq_evolve(&delta_levels(level_half_width(kappa, t)), kappa, t).unwrap();
        let want = i0_quadrature(2.0 * im.abs() * t);
        prop_assert!((s.norm_sqr() / want - 1.0).abs() < 1e-9);
    }
}
