//! Level-space dynamics at resonance ω = ω0.
//!
//! Expanded in the instantaneous Bessel eigenbasis, the resonant drive turns
//! into a uniform chain of levels `H_eq = (κ0/2) Σ (|n><n+1| + h.c.)` with
//! dispersion `κ0 cos k`. Its propagator gives
//! `a_n(t) = Σ_l a_l(0) i^{n-l} J_{n-l}(-κ0 t)`, and the total level
//! probability from a single level is `I_0(2 |Im κ0| t)`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrator::{self, IntegratorConfig};
use crate::io;
use crate::model::{kappa_at, ChainParams, StateVector, DEFAULT_LEAK_THRESHOLD};
use crate::par::{self, Exec};
use crate::propagator::bessel_convolve;
use crate::spectrum::{check_rung_support, MIN_RUNG_MARGIN, SUPPORT_TOL};
use crate::special_fn::{
    bessel_j, bessel_j_span, ln_modified_bessel_i0, modified_bessel_i0, modified_bessel_ratio,
};

/// Half-width of a level window that holds the spreading from level 0 up to
/// time `t` with Bessel tails below the leak threshold.
pub fn level_half_width(kappa0: Complex64, t: f64) -> i64 {
    let x = kappa0.norm() * t;
    (x + 10.0 * x.sqrt()).ceil() as i64 + 30
}

/// Level amplitudes `a_n` on `-half..=half` with `a_0 = 1`.
pub fn delta_levels(half: i64) -> StateVector {
    let mut s = StateVector::zeros(-half, (2 * half + 1) as usize);
    s.amplitudes[half as usize] = Complex64::new(1.0, 0.0);
    s
}

/// Evolves level amplitudes under `H_eq` with hopping `kappa0` for time `t`.
pub fn heq_evolve(initial: &StateVector, kappa0: Complex64, t: f64) -> Result<StateVector> {
    heq_evolve_checked(initial, kappa0, t, DEFAULT_LEAK_THRESHOLD)
}

pub fn heq_evolve_checked(initial: &StateVector, kappa0: Complex64, t: f64, leak_threshold: f64) -> Result<StateVector> {
    let out = bessel_convolve(&initial.amplitudes, -kappa0 * t)?;
    let s = StateVector { n_min: initial.n_min, amplitudes: out, time: initial.time + t };
    s.check_leak(leak_threshold)?;
    Ok(s)
}

/// `𝒫(t) = I_0(2 |Im κ0| t)` (exactly 1 for real κ0).
pub fn total_level_probability(kappa0: Complex64, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParams(format!("t must be >= 0, got {t}")));
    }
    if kappa0.im == 0.0 {
        return Ok(1.0);
    }
    modified_bessel_i0(2.0 * kappa0.im.abs() * t)
}

/// `ln 𝒫(t)`, valid beyond the overflow range of [`total_level_probability`].
pub fn ln_total_level_probability(kappa0: Complex64, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParams(format!("t must be >= 0, got {t}")));
    }
    ln_modified_bessel_i0(2.0 * kappa0.im.abs() * t)
}

/// `d ln 𝒫 / dt = 2 |Im κ0| I_1(x) / I_0(x)`, `x = 2 |Im κ0| t`; tends to
/// `2 |Im κ0|` at late times.
pub fn level_growth_rate(kappa0: Complex64, t: f64) -> Result<f64> {
    let g = 2.0 * kappa0.im.abs();
    Ok(g * modified_bessel_ratio(g * t)?)
}

/// Level occupations over time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelTrajectory {
    pub n_min: i64,
    pub times: Vec<f64>,
    pub level_probs: Vec<Vec<f64>>,
    pub totals: Vec<f64>,
    pub source: LevelSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelSource {
    AnalyticHeq,
    ProjectedFull,
}

impl LevelTrajectory {
    pub fn from_states(states: &[StateVector], source: LevelSource) -> Self {
        let n_min = states.first().map_or(0, |s| s.n_min);
        let level_probs: Vec<Vec<f64>> = states.iter().map(|s| s.probs()).collect();
        Self {
            n_min,
            times: states.iter().map(|s| s.time).collect(),
            totals: level_probs.iter().map(|r| r.iter().sum()).collect(),
            level_probs,
            source,
        }
    }

    /// Columns `t, P_total, P_level_<n>...`.
    pub fn to_csv(&self) -> String {
        let len = self.level_probs.first().map_or(0, |r| r.len());
        let mut header = vec!["t".to_string(), "P_total".to_string()];
        header.extend((0..len as i64).map(|i| format!("P_level_{}", self.n_min + i)));
        io::csv_table(
            &header,
            self.times.iter().zip(&self.totals).zip(&self.level_probs).map(|((&t, &p), row)| {
                let mut r = vec![t, p];
                r.extend_from_slice(row);
                r
            }),
        )
    }
}

/// `H_eq` trajectory from level 0 on `times`, with a level window sized for the last time.
pub fn heq_trajectory(kappa0: Complex64, times: &[f64]) -> Result<LevelTrajectory> {
    heq_trajectory_with(Exec::default(), kappa0, times)
}

pub fn heq_trajectory_with(exec: Exec, kappa0: Complex64, times: &[f64]) -> Result<LevelTrajectory> {
    let t_max = times.iter().cloned().fold(0.0, f64::max);
    let init = delta_levels(level_half_width(kappa0, t_max));
    let states = par::try_map_indexed(exec, times.len(), |k| heq_evolve(&init, kappa0, times[k]))?;
    Ok(LevelTrajectory::from_states(&states, LevelSource::AnalyticHeq))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussianFit {
    /// Fitted center `-b/(2c)` of `ln 𝒫_n = a + b n + c n²`.
    pub center: f64,
    /// Fitted `-c`.
    pub inverse_width: f64,
    /// `1 / inverse_width`.
    pub width_sq: f64,
    /// Predicted `|Im κ0| / (|κ0|² t)`.
    pub predicted_inverse_width: f64,
    pub r_squared: f64,
    /// Levels in the half-maximum support used for the fit.
    pub levels: usize,
}

impl GaussianFit {
    pub fn relative_error(&self) -> f64 {
        (self.inverse_width - self.predicted_inverse_width).abs() / self.predicted_inverse_width
    }
}

/// Least-squares fit of `ln 𝒫_n` to a quadratic in `n` over the levels at or
/// above half the maximum, compared with the predicted inverse width.
pub fn gaussian_profile_check(row: &[f64], n_min: i64, kappa0: Complex64, t: f64) -> Result<GaussianFit> {
    if kappa0.im == 0.0 {
        return Err(Error::InvalidParams("Gaussian profile needs Im kappa0 != 0".into()));
    }
    let total: f64 = row.iter().sum();
    let occupied = row.iter().filter(|&&p| p > 1e-6 * total).count();
    if occupied < 20 {
        return Err(Error::Degenerate(format!("only {occupied} levels carry more than 1e-6 of the total")));
    }
    let peak = row.iter().cloned().fold(0.0, f64::max);
    let pts: Vec<(f64, f64)> = row
        .iter()
        .enumerate()
        .filter(|(_, &p)| p >= 0.5 * peak)
        .map(|(i, &p)| ((n_min + i as i64) as f64, p.ln()))
        .collect();
    if pts.len() < 4 {
        return Err(Error::Degenerate(format!("half-maximum support has {} levels", pts.len())));
    }
    let (coef, r_squared) = quadratic_fit(&pts)?;
    let c2 = coef[2];
    if !(c2 < 0.0) {
        return Err(Error::Degenerate("fitted curvature is not negative".into()));
    }
    Ok(GaussianFit {
        center: -coef[1] / (2.0 * c2),
        inverse_width: -c2,
        width_sq: -1.0 / c2,
        predicted_inverse_width: kappa0.im.abs() / (kappa0.norm_sqr() * t),
        r_squared,
        levels: pts.len(),
    })
}

/// Coefficients `[a, b, c]` of `y = a + b x + c x²` and `R²`.
fn quadratic_fit(pts: &[(f64, f64)]) -> Result<([f64; 3], f64)> {
    let mut m = [[0.0f64; 3]; 3];
    let mut r = [0.0f64; 3];
    for &(x, y) in pts {
        let v = [1.0, x, x * x];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += v[i] * v[j];
            }
            r[i] += v[i] * y;
        }
    }
    // Gaussian elimination with partial pivoting on the 3x3 normal equations
    let mut a = [[0.0f64; 4]; 3];
    for i in 0..3 {
        a[i][..3].copy_from_slice(&m[i]);
        a[i][3] = r[i];
    }
    for col in 0..3 {
        let piv = (col..3).max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs())).unwrap();
        a.swap(col, piv);
        if a[col][col].abs() < 1e-300 {
            return Err(Error::Degenerate("singular normal equations".into()));
        }
        for row in 0..3 {
            if row != col {
                let pivot = a[col];
                let f = a[row][col] / pivot[col];
                for (x, p) in a[row][col..].iter_mut().zip(&pivot[col..]) {
                    *x -= f * p;
                }
            }
        }
    }
    let coef = [a[0][3] / a[0][0], a[1][3] / a[1][1], a[2][3] / a[2][2]];
    let mean = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - mean).powi(2)).sum();
    let ss_res: f64 = pts
        .iter()
        .map(|&(x, y)| (y - coef[0] - coef[1] * x - coef[2] * x * x).powi(2))
        .sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok((coef, r2))
}

/// Eigenvector argument `-2κ(t)/ω0`.
fn instantaneous_arg(params: &ChainParams, t: f64) -> Complex64 {
    -2.0 * kappa_at(params, t) / params.omega0
}

/// Levels `m` whose eigenvectors fit inside the window at time `t`.
pub fn resolvable_levels(params: &ChainParams, t: f64) -> Result<(i64, i64)> {
    let arg = instantaneous_arg(params, t);
    let mut margin = MIN_RUNG_MARGIN.max(arg.norm().floor() as i64);
    while bessel_j(margin + 1, arg)?.norm() >= SUPPORT_TOL || (margin + 1) as f64 <= arg.norm() {
        margin += 1;
    }
    let lo = params.n_min + margin;
    let hi = params.n_max - margin;
    if hi < lo {
        return Err(Error::Window("window too small to resolve any level".into()));
    }
    Ok((lo, hi))
}

/// `a_m(t) = <φ_m(t)|Ψ(t)> e^{i m ω0 t}` for every resolvable level.
pub fn project_full_to_levels(full: &StateVector, params: &ChainParams, t: f64) -> Result<StateVector> {
    let p = ChainParams { n_min: full.n_min, n_max: full.n_max(), ..*params };
    let (lo, hi) = resolvable_levels(&p, t)?;
    check_rung_support(lo, &p, t)?;
    let arg = instantaneous_arg(&p, t);
    // conj(φ_m(n)) = J_{n-m}(-2κ/ω0)
    let row = bessel_j_span(p.n_min - hi, p.n_max - lo, arg)?;
    let amplitudes = (lo..=hi)
        .map(|m| {
            let s: Complex64 = full
                .amplitudes
                .iter()
                .enumerate()
                .map(|(i, &psi)| row[(p.n_min + i as i64 - m - (p.n_min - hi)) as usize] * psi)
                .sum();
            s * Complex64::from_polar(1.0, m as f64 * p.omega0 * t)
        })
        .collect();
    Ok(StateVector { n_min: lo, amplitudes, time: t })
}

/// `Ψ_n = Σ_m a_m e^{-i m ω0 t} ψ_m(n)` on the window of `params`.
pub fn reconstruct_from_levels(levels: &StateVector, params: &ChainParams, t: f64) -> Result<StateVector> {
    let arg = instantaneous_arg(params, t);
    let lo = levels.n_min;
    let hi = levels.n_max();
    let row = bessel_j_span(params.n_min - hi, params.n_max - lo, arg)?;
    let weighted: Vec<Complex64> = levels
        .amplitudes
        .iter()
        .enumerate()
        .map(|(k, &a)| a * Complex64::from_polar(1.0, -((lo + k as i64) as f64) * params.omega0 * t))
        .collect();
    let amplitudes = (params.n_min..=params.n_max)
        .map(|n| {
            weighted
                .iter()
                .enumerate()
                .map(|(k, &w)| w * row[(n - (lo + k as i64) - (params.n_min - hi)) as usize])
                .sum()
        })
        .collect();
    Ok(StateVector { n_min: params.n_min, amplitudes, time: t })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RwaPoint {
    pub t: f64,
    /// L1 distance between the normalized level distributions.
    pub l1: f64,
    pub total_full: f64,
    pub total_heq: f64,
}

/// Normalized L1 distance between two level distributions (aligned by level index).
pub fn normalized_l1(a: &StateVector, b: &StateVector) -> f64 {
    let ta = a.norm_sqr();
    let tb = b.norm_sqr();
    let lo = a.n_min.min(b.n_min);
    let hi = a.n_max().max(b.n_max());
    (lo..=hi).map(|n| (a.get(n).norm_sqr() / ta - b.get(n).norm_sqr() / tb).abs()).sum()
}

/// Compares level distributions of the full driven evolution (integrator then
/// projection) with `H_eq` evolution of the projected initial levels, at each checkpoint.
///
/// `H_eq` is applied with hopping `κ0`, which reproduces the Bessel argument
/// `κ0 t` of the resonant interaction-picture propagator.
pub fn rwa_consistency(
    initial: &StateVector,
    params: &ChainParams,
    checkpoints: &[f64],
    config: &IntegratorConfig,
) -> Result<Vec<RwaPoint>> {
    rwa_consistency_with(Exec::default(), initial, params, checkpoints, config)
}

pub fn rwa_consistency_with(
    exec: Exec,
    initial: &StateVector,
    params: &ChainParams,
    checkpoints: &[f64],
    config: &IntegratorConfig,
) -> Result<Vec<RwaPoint>> {
    if params.omega != params.omega0 {
        return Err(Error::InvalidParams(format!(
            "RWA comparison needs omega = omega0, got {} and {}",
            params.omega, params.omega0
        )));
    }
    if params.kappa0.norm() > 0.25 * params.omega0 {
        return Err(Error::InvalidParams(format!(
            "|kappa0| = {} exceeds 0.25 omega0, outside the RWA regime",
            params.kappa0.norm()
        )));
    }
    let levels0 = project_full_to_levels(initial, params, initial.time)?;
    par::try_map_indexed(exec, checkpoints.len(), |k| {
        let t = checkpoints[k];
        let full = integrator::evolve_state(initial, params, t, config)?;
        let projected = project_full_to_levels(&full, params, t)?;
        let heq = heq_evolve(&levels0, params.kappa0, t - initial.time)?;
        Ok(RwaPoint { t, l1: normalized_l1(&projected, &heq), total_full: projected.norm_sqr(), total_heq: heq.norm_sqr() })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn delta_at_time_zero() {
        let s = delta_levels(40);
        let out = heq_evolve(&s, c(0.3, 0.8), 0.0).unwrap();
        assert_eq!(out.get(0), c(1.0, 0.0));
        assert_eq!(out.norm_sqr(), 1.0);
    }

    #[test]
    fn total_probability_values() {
        assert_eq!(total_level_probability(c(1.0, 0.0), 7.0).unwrap(), 1.0);
        assert_eq!(total_level_probability(c(0.0, 1.0), 0.0).unwrap(), 1.0);
        let v = total_level_probability(c(0.0, 1.0), 2.0).unwrap();
        assert!((v - 11.301_921_952_136_33).abs() < 1e-12);
    }

    #[test]
    fn gaussian_fit_rejects_real_kappa() {
        assert!(matches!(gaussian_profile_check(&[1.0; 50], -25, c(1.0, 0.0), 10.0), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn quadratic_fit_exact() {
        let pts: Vec<(f64, f64)> = (-5..=5).map(|n| (n as f64, 2.0 - 0.5 * n as f64 - 0.1 * (n * n) as f64)).collect();
        let (coef, r2) = quadratic_fit(&pts).unwrap();
        assert!((coef[0] - 2.0).abs() < 1e-12 && (coef[1] + 0.5).abs() < 1e-12 && (coef[2] + 0.1).abs() < 1e-12);
        assert!((r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn projection_in_site_basis_when_hopping_vanishes() {
        let p = ChainParams::centered(c(0.5, 0.2), 1.0, 1.0, 40).unwrap();
        let t = std::f64::consts::FRAC_PI_2;
        let mut s = StateVector::zeros(p.n_min, p.len());
        s.amplitudes[40] = c(0.6, 0.0);
        s.amplitudes[41] = c(0.0, 0.8);
        let a = project_full_to_levels(&s, &p, t).unwrap();
        for m in [0i64, 1] {
            let want = s.get(m) * Complex64::from_polar(1.0, m as f64 * t);
            assert!((a.get(m) - want).norm() < 1e-15);
        }
    }
}
