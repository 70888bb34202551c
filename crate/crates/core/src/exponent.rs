//! Spreading fronts of level distributions and their dynamical exponent
//! `n_c ∝ t^z`.
//!
//! For real hopping the profile is ballistic with a sharp front; its position
//! is taken at the leading half-maximum beyond the outermost peak. For complex
//! hopping the profile is Gaussian and the half-maximum of the core (relative
//! to `𝒫_0`) is used.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::par::{self, Exec};
use crate::resonance::{delta_levels, heq_evolve, level_half_width};

/// Peaks below this fraction of the global maximum are treated as tail noise.
const PEAK_FLOOR: f64 = 1e-3;
pub const MIN_FIT_SAMPLES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Wavefront,
    Fwhm,
}

impl Method {
    /// Wavefront for real hopping, half-maximum otherwise.
    pub fn auto(kappa0: Complex64) -> Self {
        if kappa0.im == 0.0 {
            Method::Wavefront
        } else {
            Method::Fwhm
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Positive,
    Negative,
}

/// Values at `n = 0, 1, 2, ...` (or `0, -1, -2, ...`) from a row starting at `n_min`.
fn half_row(row: &[f64], n_min: i64, side: Side) -> Result<Vec<f64>> {
    let zero = -n_min;
    if zero < 0 || zero as usize >= row.len() {
        return Err(Error::Degenerate("profile does not contain level 0".into()));
    }
    let zero = zero as usize;
    Ok(match side {
        Side::Positive => row[zero..].to_vec(),
        Side::Negative => row[..=zero].iter().rev().cloned().collect(),
    })
}

/// Outermost local maximum on one side, refined by a parabola through three points.
pub fn outermost_peak(row: &[f64], n_min: i64, side: Side) -> Result<f64> {
    let h = half_row(row, n_min, side)?;
    let peak = h.iter().cloned().fold(0.0, f64::max);
    let k = outermost_peak_index(&h, peak).ok_or(Error::NoMaximum)?;
    let mut x = k as f64;
    if k >= 1 && k + 1 < h.len() {
        let (a, b, c) = (h[k - 1], h[k], h[k + 1]);
        let den = a - 2.0 * b + c;
        if den < 0.0 {
            x += 0.5 * (a - c) / den;
        }
    }
    Ok(x)
}

fn outermost_peak_index(h: &[f64], peak: f64) -> Option<usize> {
    (1..h.len().saturating_sub(1))
        .rev()
        .find(|&k| h[k] >= h[k - 1] && h[k] > h[k + 1] && h[k] > PEAK_FLOOR * peak)
}

/// Front position: where the profile falls to half the outermost peak value on
/// its leading edge, linearly interpolated.
pub fn wavefront_position(row: &[f64], n_min: i64) -> Result<f64> {
    wavefront_position_side(row, n_min, Side::Positive)
}

pub fn wavefront_position_side(row: &[f64], n_min: i64, side: Side) -> Result<f64> {
    let h = half_row(row, n_min, side)?;
    let peak = h.iter().cloned().fold(0.0, f64::max);
    let k = outermost_peak_index(&h, peak).ok_or(Error::NoMaximum)?;
    let half = 0.5 * h[k];
    let j = (k + 1..h.len())
        .find(|&j| h[j] < half)
        .ok_or_else(|| Error::Degenerate("front runs off the level window".into()))?;
    let (a, b) = (h[j - 1], h[j]);
    Ok((j - 1) as f64 + (a - half) / (a - b))
}

/// Half-maximum position relative to `𝒫_0`: the largest `|n|` with
/// `𝒫_n >= 𝒫_0 / 2`, interpolated to the crossing (larger of the two sides).
pub fn fwhm_position(row: &[f64], n_min: i64) -> Result<f64> {
    let pos = fwhm_side(row, n_min, Side::Positive)?;
    let neg = fwhm_side(row, n_min, Side::Negative)?;
    Ok(pos.max(neg))
}

fn fwhm_side(row: &[f64], n_min: i64, side: Side) -> Result<f64> {
    let h = half_row(row, n_min, side)?;
    let p0 = h[0];
    if !(p0 > 0.0) {
        return Err(Error::Degenerate("P_0 is zero".into()));
    }
    let half = 0.5 * p0;
    let last = (0..h.len())
        .rev()
        .find(|&j| h[j] >= half)
        .unwrap_or(0);
    if last + 1 >= h.len() {
        return Err(Error::Degenerate("profile does not fall to half of P_0 inside the window".into()));
    }
    let (a, b) = (h[last], h[last + 1]);
    Ok(last as f64 + (a - half) / (a - b))
}

/// Front or half-max positions `n_c` over time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpreadSeries {
    pub times: Vec<f64>,
    pub n_c: Vec<f64>,
    pub method: Method,
    /// Indices `i` with `n_c[i] < n_c[i-1]`.
    pub monotonicity_violations: Vec<usize>,
}

impl SpreadSeries {
    pub fn new(times: Vec<f64>, n_c: Vec<f64>, method: Method) -> Self {
        let monotonicity_violations = (1..n_c.len()).filter(|&i| n_c[i] < n_c[i - 1]).collect();
        Self { times, n_c, method, monotonicity_violations }
    }

    pub fn to_csv(&self) -> String {
        io::csv_table(
            &["t".to_string(), "n_c".to_string()],
            self.times.iter().zip(&self.n_c).map(|(&t, &n)| vec![t, n]),
        )
    }
}

/// Level spreading from level 0 under `H_eq` with hopping `kappa0`.
pub fn spread_series(kappa0: Complex64, times: &[f64], method: Method) -> Result<SpreadSeries> {
    spread_series_with(Exec::default(), kappa0, times, method)
}

pub fn spread_series_with(exec: Exec, kappa0: Complex64, times: &[f64], method: Method) -> Result<SpreadSeries> {
    let t_max = times.iter().cloned().fold(0.0, f64::max);
    let init = delta_levels(level_half_width(kappa0, t_max));
    let n_c = par::try_map_indexed(exec, times.len(), |k| {
        let s = heq_evolve(&init, kappa0, times[k])?;
        let row = s.probs();
        match method {
            Method::Wavefront => wavefront_position(&row, s.n_min),
            Method::Fwhm => fwhm_position(&row, s.n_min),
        }
    })?;
    Ok(SpreadSeries::new(times.to_vec(), n_c, method))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentFit {
    pub method: Method,
    pub t_lo: f64,
    pub t_hi: f64,
    pub z: f64,
    pub stderr: f64,
    pub samples: usize,
    pub intercept: f64,
}

/// Least-squares slope of `ln n_c` against `ln t` over `t_lo <= t <= t_hi`.
pub fn fit_exponent(series: &SpreadSeries, t_window: (f64, f64)) -> Result<ExponentFit> {
    let (t_lo, t_hi) = t_window;
    let pts: Vec<(f64, f64)> = series
        .times
        .iter()
        .zip(&series.n_c)
        .filter(|(&t, _)| t >= t_lo && t <= t_hi)
        .map(|(&t, &n)| (t, n))
        .collect();
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientSamples { need: MIN_FIT_SAMPLES, got: pts.len() });
    }
    let (z, stderr, intercept) = loglog_fit(&pts)?;
    Ok(ExponentFit { method: series.method, t_lo, t_hi, z, stderr, samples: pts.len(), intercept })
}

/// Slope, its standard error and the intercept of `ln y` against `ln x`.
pub fn loglog_fit(pts: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    if pts.len() < 3 {
        return Err(Error::InsufficientSamples { need: 3, got: pts.len() });
    }
    if pts.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(Error::Degenerate("log-log fit needs positive values".into()));
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all samples at the same abscissa".into()));
    }
    let z = sxy / sxx;
    let intercept = my - z * mx;
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - z * x).powi(2)).sum();
    Ok((z, (ss_res / (n - 2.0) / sxx).sqrt(), intercept))
}
