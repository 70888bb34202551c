//! Closed-form propagator of the static tilted chain and Bloch-oscillation
//! observables.
//!
//! For constant hopping κ the propagator is
//! `U_mn(t) = i^{m-n} e^{-i(m+n)ω0 t/2} J_{m-n}(-(4κ/ω0) sin(ω0 t/2))`,
//! periodic with period `2π/ω0`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::io;
use crate::model::{ChainParams, StateVector, DEFAULT_LEAK_THRESHOLD};
use crate::par::{self, Exec};
use crate::special_fn::{bessel_j, bessel_j_row};

/// Bessel orders with `|J_k| < TAIL_TOL * max|J|` are dropped from the sums.
pub const TAIL_TOL: f64 = 1e-15;

fn i_pow(p: i64) -> Complex64 {
    match p.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

fn propagator_arg(t: f64, kappa: Complex64, omega0: f64) -> Complex64 {
    -4.0 * kappa / omega0 * (0.5 * omega0 * t).sin()
}

fn half_phase(n: i64, t: f64, omega0: f64) -> Complex64 {
    Complex64::from_polar(1.0, -0.5 * n as f64 * omega0 * t)
}

/// Single matrix element `U_mn(t)`.
pub fn u_mn(m: i64, n: i64, t: f64, kappa: Complex64, omega0: f64) -> Result<Complex64> {
    if !(omega0 > 0.0) {
        return Err(Error::InvalidParams(format!("omega0 must be > 0, got {omega0}")));
    }
    let j = bessel_j(m - n, propagator_arg(t, kappa, omega0))?;
    Ok(i_pow(m - n) * half_phase(m + n, t, omega0) * j)
}

/// Bessel orders `0..=d` for argument `x`, where `d` covers the turning point
/// plus 20 and everything above the relative tail tolerance.
fn truncated_row(x: Complex64, span: usize) -> Result<Vec<Complex64>> {
    let d = ((x.norm().ceil() as usize) + 30).min(span);
    let mut row = bessel_j_row(d, x)?;
    let peak = row.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let keep_min = ((x.norm().ceil() as usize) + 20).min(row.len() - 1);
    while row.len() - 1 > keep_min && row.last().is_some_and(|v| v.norm() < TAIL_TOL * peak) {
        row.pop();
    }
    Ok(row)
}

/// `out_m = Σ_l w_{m-l} in_l` on the same window, with `w_k = i^k J_k(x)` and
/// `J_{-k} = (-1)^k J_k`.
pub(crate) fn bessel_convolve(input: &[Complex64], x: Complex64) -> Result<Vec<Complex64>> {
    let len = input.len();
    let row = truncated_row(x, len.saturating_sub(1))?;
    let d = row.len() as i64 - 1;
    let kernel: Vec<Complex64> = (-d..=d)
        .map(|k| {
            let j = row[k.unsigned_abs() as usize];
            let j = if k < 0 && k % 2 != 0 { -j } else { j };
            i_pow(k) * j
        })
        .collect();
    let support: Vec<usize> = (0..len).filter(|&l| input[l] != Complex64::new(0.0, 0.0)).collect();
    let mut out = vec![Complex64::new(0.0, 0.0); len];
    for &l in &support {
        let lo = (l as i64 - d).max(0) as usize;
        let hi = ((l as i64 + d) as usize).min(len - 1);
        let c = input[l];
        for (m, o) in out.iter_mut().enumerate().take(hi + 1).skip(lo) {
            *o += kernel[(m as i64 - l as i64 + d) as usize] * c;
        }
    }
    Ok(out)
}

/// Evolves `initial` by `t` under the static chain with hopping `kappa`,
/// failing if more than [`DEFAULT_LEAK_THRESHOLD`] of the norm² reaches the
/// window edges.
pub fn evolve_analytic(initial: &StateVector, t: f64, kappa: Complex64, omega0: f64) -> Result<StateVector> {
    evolve_analytic_checked(initial, t, kappa, omega0, DEFAULT_LEAK_THRESHOLD)
}

pub fn evolve_analytic_checked(
    initial: &StateVector,
    t: f64,
    kappa: Complex64,
    omega0: f64,
    leak_threshold: f64,
) -> Result<StateVector> {
    if !(omega0 > 0.0) {
        return Err(Error::InvalidParams(format!("omega0 must be > 0, got {omega0}")));
    }
    let len = initial.len();
    let phased: Vec<Complex64> = initial
        .amplitudes
        .iter()
        .enumerate()
        .map(|(i, &c)| c * half_phase(initial.n_min + i as i64, t, omega0))
        .collect();
    let mut out = bessel_convolve(&phased, propagator_arg(t, kappa, omega0))?;
    for (i, v) in out.iter_mut().enumerate() {
        *v *= half_phase(initial.n_min + i as i64, t, omega0);
    }
    debug_assert_eq!(out.len(), len);
    let state = StateVector { n_min: initial.n_min, amplitudes: out, time: initial.time + t };
    state.check_leak(leak_threshold)?;
    Ok(state)
}

/// Dense propagator matrix on the window `n_min..=n_max` (row m, column n).
pub fn propagator_matrix(n_min: i64, n_max: i64, t: f64, kappa: Complex64, omega0: f64) -> Result<Vec<Vec<Complex64>>> {
    let len = (n_max - n_min + 1) as usize;
    let x = propagator_arg(t, kappa, omega0);
    let row = bessel_j_row(len, x)?;
    Ok((0..len)
        .map(|i| {
            let m = n_min + i as i64;
            (0..len)
                .map(|j| {
                    let n = n_min + j as i64;
                    let p = m - n;
                    let jv = row[p.unsigned_abs() as usize];
                    let jv = if p < 0 && p % 2 != 0 { -jv } else { jv };
                    i_pow(p) * half_phase(m + n, t, omega0) * jv
                })
                .collect()
        })
        .collect())
}

/// Inclusive uniform grid of `samples` points.
pub fn uniform_grid(t0: f64, t1: f64, samples: usize) -> Vec<f64> {
    match samples {
        0 => vec![],
        1 => vec![t0],
        _ => (0..samples)
            .map(|k| if k + 1 == samples { t1 } else { t0 + (t1 - t0) * k as f64 / (samples - 1) as f64 })
            .collect(),
    }
}

/// Site probabilities `P_m(t)`, totals `P(t)` and rescaled rows `P_m/P`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlochTrajectory {
    pub n_min: i64,
    pub times: Vec<f64>,
    pub site_probs: Vec<Vec<f64>>,
    pub totals: Vec<f64>,
    pub rescaled: Vec<Vec<f64>>,
    /// Largest edge-leak fraction seen along the trajectory.
    pub max_leak: f64,
}

impl BlochTrajectory {
    pub fn from_states(states: &[StateVector]) -> Self {
        let n_min = states.first().map_or(0, |s| s.n_min);
        let mut t = Self {
            n_min,
            times: Vec::with_capacity(states.len()),
            site_probs: Vec::with_capacity(states.len()),
            totals: Vec::with_capacity(states.len()),
            rescaled: Vec::with_capacity(states.len()),
            max_leak: 0.0,
        };
        for s in states {
            t.push(s);
        }
        t
    }

    pub fn push(&mut self, s: &StateVector) {
        let probs = s.probs();
        let total: f64 = probs.iter().sum();
        self.times.push(s.time);
        self.rescaled.push(probs.iter().map(|p| if total > 0.0 { p / total } else { 0.0 }).collect());
        self.site_probs.push(probs);
        self.totals.push(total);
        self.max_leak = self.max_leak.max(s.edge_leak());
    }

    pub fn sites(&self) -> Vec<i64> {
        let len = self.site_probs.first().map_or(0, |r| r.len());
        (0..len as i64).map(|i| self.n_min + i).collect()
    }

    fn csv(&self, rows: &[Vec<f64>]) -> String {
        let mut header = vec!["t".to_string(), "P_total".to_string()];
        header.extend(self.sites().iter().map(|n| format!("P_{n}")));
        io::csv_table(
            &header,
            self.times.iter().zip(&self.totals).zip(rows).map(|((&t, &p), row)| {
                let mut r = vec![t, p];
                r.extend_from_slice(row);
                r
            }),
        )
    }

    /// Columns `t, P_total, P_<n_min>, ..., P_<n_max>` with raw probabilities.
    pub fn to_csv(&self) -> String {
        self.csv(&self.site_probs)
    }

    /// Same layout with the rescaled rows `P_n / P`.
    pub fn to_csv_rescaled(&self) -> String {
        self.csv(&self.rescaled)
    }
}

/// Trajectory of the static chain (ω = 0) sampled on `t_grid`.
pub fn bloch_trajectory(initial: &StateVector, params: &ChainParams, t_grid: &[f64]) -> Result<BlochTrajectory> {
    bloch_trajectory_with(Exec::default(), initial, params, t_grid)
}

pub fn bloch_trajectory_with(exec: Exec, initial: &StateVector, params: &ChainParams, t_grid: &[f64]) -> Result<BlochTrajectory> {
    if params.omega != 0.0 {
        return Err(Error::InvalidParams(format!(
            "analytic propagation needs a static drive (omega = 0), got omega = {}",
            params.omega
        )));
    }
    let states = par::try_map_indexed(exec, t_grid.len(), |k| {
        let mut s = evolve_analytic(initial, t_grid[k] - initial.time, params.kappa0, params.omega0)?;
        s.time = t_grid[k];
        Ok::<_, Error>(s)
    })?;
    Ok(BlochTrajectory::from_states(&states))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn identity_at_zero_and_period() {
        for kappa in [c(1.0, 0.0), c(0.0, 1.0), Complex64::from_polar(1.0, PI / 4.0)] {
            for (m, n) in [(0, 0), (3, 1), (-2, 4), (5, 5)] {
                let d = if m == n { c(1.0, 0.0) } else { c(0.0, 0.0) };
                assert!((u_mn(m, n, 0.0, kappa, 1.0).unwrap() - d).norm() < 1e-15);
                assert!((u_mn(m, n, 2.0 * PI, kappa, 1.0).unwrap() - d).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn convolution_matches_matrix_elements() {
        let kappa = c(0.7, 0.3);
        let p = ChainParams::centered(kappa, 0.0, 1.0, 40).unwrap();
        let mut s = StateVector::zeros(p.n_min, p.len());
        s.amplitudes[40] = c(1.0, 0.0);
        s.amplitudes[43] = c(0.0, 0.5);
        let t = 1.3;
        let out = evolve_analytic(&s, t, kappa, 1.0).unwrap();
        for m in -10..=10 {
            let want = u_mn(m, 0, t, kappa, 1.0).unwrap() + c(0.0, 0.5) * u_mn(m, 3, t, kappa, 1.0).unwrap();
            assert!((out.get(m) - want).norm() < 1e-14);
        }
    }

    #[test]
    fn static_drive_required() {
        let p = ChainParams::centered(c(1.0, 0.0), 0.5, 1.0, 40).unwrap();
        let s = StateVector::site(&p, 0).unwrap();
        assert!(bloch_trajectory(&s, &p, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn grid_is_inclusive() {
        let g = uniform_grid(0.0, 2.0 * PI, 5);
        assert_eq!(g.len(), 5);
        assert_eq!(g[4], 2.0 * PI);
        assert_eq!(g[0], 0.0);
    }

    #[test]
    fn leak_detected() {
        let p = ChainParams::centered(c(3.0, 0.0), 0.0, 0.2, 15).unwrap();
        let s = StateVector::site(&p, 0).unwrap();
        assert!(matches!(evolve_analytic(&s, 10.0, p.kappa0, p.omega0), Err(Error::Leak { .. })));
    }
}
