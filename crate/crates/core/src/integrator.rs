//! Time-ordered evolution under `κ(t) = κ0 cos(ωt)` with the exponential
//! midpoint rule: each step applies `exp(-i H(t + dt/2) dt)` through its Taylor
//! series on the tridiagonal Hamiltonian. Exact (to the series tolerance) for
//! constant H, second order in dt otherwise. The state is never renormalized.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{build_hamiltonian, ChainParams, StateVector, DEFAULT_LEAK_THRESHOLD};
use crate::propagator::BlochTrajectory;

pub const MAX_TAYLOR_TERMS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    MidpointExponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    pub dt: f64,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default = "default_taylor_tol")]
    pub taylor_tol: f64,
    #[serde(default = "default_leak")]
    pub leak_threshold: f64,
    /// Keep every `record_every`-th step in the trajectory (the last step is always kept).
    #[serde(default = "default_record")]
    pub record_every: usize,
}

fn default_taylor_tol() -> f64 {
    1e-13
}
fn default_leak() -> f64 {
    DEFAULT_LEAK_THRESHOLD
}
fn default_record() -> usize {
    1
}

impl IntegratorConfig {
    /// `dt = 2π / (1000 ω0)`.
    pub fn default_for(params: &ChainParams) -> Self {
        Self {
            dt: 2.0 * PI / (1000.0 * params.omega0),
            scheme: Scheme::MidpointExponential,
            taylor_tol: default_taylor_tol(),
            leak_threshold: default_leak(),
            record_every: 1,
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_record_every(mut self, k: usize) -> Self {
        self.record_every = k;
        self
    }

    pub fn validate(&self, params: &ChainParams) -> Result<()> {
        let mut bound = 2.0 * PI / params.omega0;
        if params.omega > 0.0 {
            bound = bound.min(2.0 * PI / params.omega);
        }
        if !(self.dt > 0.0 && self.dt <= 0.05 * bound) {
            return Err(Error::InvalidParams(format!(
                "dt = {} must lie in (0, {}] (5% of the shortest period)",
                self.dt,
                0.05 * bound
            )));
        }
        if !(self.taylor_tol > 0.0 && self.taylor_tol <= 1e-12) {
            return Err(Error::InvalidParams(format!("taylor_tol = {} must lie in (0, 1e-12]", self.taylor_tol)));
        }
        if !(self.leak_threshold > 0.0) {
            return Err(Error::InvalidParams("leak_threshold must be > 0".into()));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidParams("record_every must be >= 1".into()));
        }
        Ok(())
    }
}

fn vnorm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// One midpoint-exponential step from `t` to `t + dt`.
pub fn step(state: &StateVector, t: f64, dt: f64, params: &ChainParams, taylor_tol: f64) -> Result<StateVector> {
    let h = build_hamiltonian(&ChainParams { n_min: state.n_min, n_max: state.n_max(), ..*params }, t + 0.5 * dt);
    let norm = vnorm(&state.amplitudes);
    let mut sum = state.amplitudes.clone();
    let mut term = state.amplitudes.clone();
    let mut next = vec![Complex64::new(0.0, 0.0); term.len()];
    let mut converged = norm == 0.0;
    for k in 1..MAX_TAYLOR_TERMS {
        if converged {
            break;
        }
        h.apply(&term, &mut next);
        let f = Complex64::new(0.0, -dt / k as f64);
        for (a, b) in term.iter_mut().zip(&next) {
            *a = f * b;
        }
        for (s, a) in sum.iter_mut().zip(&term) {
            *s += a;
        }
        converged = vnorm(&term) < taylor_tol * norm;
    }
    if !converged {
        return Err(Error::NoConvergence {
            what: format!("Taylor series of exp(-iH dt) with dt = {dt}; reduce dt"),
            iterations: MAX_TAYLOR_TERMS,
        });
    }
    Ok(StateVector { n_min: state.n_min, amplitudes: sum, time: t + dt })
}

/// Sites per side needed for propagation to `t_final`: `ceil(4|κ0| t / ω0) + 40`.
pub fn required_margin(params: &ChainParams, t_final: f64) -> i64 {
    (4.0 * params.kappa0.norm() * t_final / params.omega0).ceil() as i64 + 40
}

/// Checks the distance between the occupied sites of `initial` and the window edges.
pub fn check_margin(initial: &StateVector, params: &ChainParams, t_final: f64) -> Result<()> {
    let need = required_margin(params, t_final);
    let occupied: Vec<i64> = initial.sites().filter(|&n| initial.get(n).norm() > 0.0).collect();
    let (Some(&lo), Some(&hi)) = (occupied.first(), occupied.last()) else {
        return Err(Error::ZeroState);
    };
    let have = (lo - initial.n_min).min(initial.n_max() - hi);
    if have < need {
        return Err(Error::Window(format!(
            "window margin {have} sites < required {need} for t_final = {t_final}"
        )));
    }
    Ok(())
}

/// Number of uniform steps reaching `t_final` with spacing at most `dt`.
pub fn step_count(t_final: f64, dt: f64) -> usize {
    ((t_final / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

/// Propagates from `initial.time` to `initial.time + duration` on a uniform
/// mesh of `steps` steps, returning the final state. Leak is checked at the end.
pub fn propagate(initial: &StateVector, params: &ChainParams, duration: f64, steps: usize, config: &IntegratorConfig) -> Result<StateVector> {
    let dt = duration / steps as f64;
    let t0 = initial.time;
    let mut s = initial.clone();
    for k in 0..steps {
        s = step(&s, t0 + k as f64 * dt, dt, params, config.taylor_tol)?;
    }
    s.time = t0 + duration;
    s.check_leak(config.leak_threshold)?;
    Ok(s)
}

/// Full trajectory from `initial.time` to `t_final` (absolute). The mesh is
/// uniform with `ceil((t_final - t0)/dt)` steps.
pub fn evolve(initial: &StateVector, params: &ChainParams, t_final: f64, config: &IntegratorConfig) -> Result<BlochTrajectory> {
    params.validate()?;
    config.validate(params)?;
    let duration = t_final - initial.time;
    if !(duration >= 0.0) {
        return Err(Error::InvalidParams(format!("t_final {t_final} precedes the initial time {}", initial.time)));
    }
    check_margin(initial, params, duration)?;
    let mut traj = BlochTrajectory::from_states(std::slice::from_ref(initial));
    if duration == 0.0 {
        return Ok(traj);
    }
    let steps = step_count(duration, config.dt);
    let dt = duration / steps as f64;
    let t0 = initial.time;
    let mut s = initial.clone();
    for k in 0..steps {
        s = step(&s, t0 + k as f64 * dt, dt, params, config.taylor_tol)?;
        let last = k + 1 == steps;
        if last {
            s.time = t_final;
        }
        if (k + 1) % config.record_every == 0 || last {
            s.check_leak(config.leak_threshold)?;
            traj.push(&s);
        }
    }
    Ok(traj)
}

/// Final state of [`evolve`] without recording.
pub fn evolve_state(initial: &StateVector, params: &ChainParams, t_final: f64, config: &IntegratorConfig) -> Result<StateVector> {
    params.validate()?;
    config.validate(params)?;
    let duration = t_final - initial.time;
    check_margin(initial, params, duration)?;
    if duration == 0.0 {
        return Ok(initial.clone());
    }
    propagate(initial, params, duration, step_count(duration, config.dt), config)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub dt: f64,
    /// Max-norm difference to the run with half the step.
    pub error: f64,
    /// `log(e_prev / e) / log(dt_prev / dt)`; absent on the first row.
    pub order: Option<f64>,
}

/// Self-convergence table: for each `dt` the max-norm difference between the
/// final states at `dt` and `dt/2`.
pub fn convergence_study(
    initial: &StateVector,
    params: &ChainParams,
    t_final: f64,
    dt_list: &[f64],
    taylor_tol: f64,
) -> Result<Vec<ConvergenceRow>> {
    if dt_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParams("dt_list must be strictly descending".into()));
    }
    check_margin(initial, params, t_final - initial.time)?;
    let cfg = IntegratorConfig { taylor_tol, ..IntegratorConfig::default_for(params) };
    let duration = t_final - initial.time;
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(dt_list.len());
    for &dt in dt_list {
        let steps = step_count(duration, dt);
        let coarse = propagate(initial, params, duration, steps, &cfg)?;
        let fine = propagate(initial, params, duration, 2 * steps, &cfg)?;
        let error = coarse.max_abs_diff(&fine);
        let order = rows.last().map(|p| (p.error / error).ln() / (p.dt / dt).ln());
        rows.push(ConvergenceRow { dt, error, order });
    }
    Ok(rows)
}

/// Errors against a fixed reference state for each `dt` (e.g. an analytic solution).
pub fn convergence_vs_reference(
    initial: &StateVector,
    params: &ChainParams,
    reference: &StateVector,
    dt_list: &[f64],
    taylor_tol: f64,
) -> Result<Vec<ConvergenceRow>> {
    let cfg = IntegratorConfig { taylor_tol, ..IntegratorConfig::default_for(params) };
    let duration = reference.time - initial.time;
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(dt_list.len());
    for &dt in dt_list {
        let s = propagate(initial, params, duration, step_count(duration, dt), &cfg)?;
        let error = s.max_abs_diff(reference);
        let order = rows.last().map(|p| (p.error / error).ln() / (p.dt / dt).ln());
        rows.push(ConvergenceRow { dt, error, order });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn zero_hopping_is_pure_phase() {
        let p = ChainParams::centered(c(0.0, 0.0), 0.0, 1.0, 10).unwrap();
        let mut s = StateVector::zeros(p.n_min, p.len());
        for (i, a) in s.amplitudes.iter_mut().enumerate() {
            *a = c(1.0 + i as f64, 0.5);
        }
        let dt = 0.01;
        let out = step(&s, 0.0, dt, &p, 1e-14).unwrap();
        for n in s.sites() {
            let want = s.get(n) * Complex64::from_polar(1.0, -(n as f64) * dt);
            assert!((out.get(n) - want).norm() < 1e-14 * want.norm());
        }
    }

    #[test]
    fn config_bounds() {
        let p = ChainParams::centered(c(1.0, 0.0), 0.1, 1.0, 50).unwrap();
        let cfg = IntegratorConfig::default_for(&p);
        assert!(cfg.validate(&p).is_ok());
        assert!(cfg.with_dt(0.5).validate(&p).is_err());
        assert!(IntegratorConfig { taylor_tol: 1e-10, ..cfg }.validate(&p).is_err());
    }

    #[test]
    fn step_reports_runaway_series() {
        let p = ChainParams::centered(c(1.0, 0.0), 0.0, 1.0, 200).unwrap();
        let s = StateVector::site(&p, 150).unwrap();
        assert!(matches!(step(&s, 0.0, 5.0, &p, 1e-13), Err(Error::NoConvergence { .. })));
    }

    #[test]
    fn margin_enforced() {
        let p = ChainParams::centered(c(1.0, 0.0), 0.0, 1.0, 50).unwrap();
        let s = StateVector::site(&p, 0).unwrap();
        let cfg = IntegratorConfig::default_for(&p);
        assert!(matches!(evolve(&s, &p, 10.0, &cfg), Err(Error::Window(_))));
        assert!(evolve(&s, &p, 2.0, &cfg).is_ok());
    }
}
