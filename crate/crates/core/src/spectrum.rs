//! Instantaneous eigensystem of the tilted chain: analytic Bessel eigenvectors,
//! biorthonormality, inverse participation ratio, and the numerical spectrum
//! of a finite chain.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::eigenvalues;
use crate::model::{build_hamiltonian, kappa_at, ChainParams, EigenPair, StateVector};
use crate::par::{self, Exec};
use crate::special_fn::{bessel_j, bessel_j_span};

/// Minimum distance (in sites) between a rung and either window edge.
pub const MIN_RUNG_MARGIN: i64 = 10;
/// Bessel amplitude that counts as "no support" beyond the margin.
pub const SUPPORT_TOL: f64 = 1e-14;
/// Threshold on `|Im E|` and on the spacing error for the measured real ladder.
pub const LADDER_TOL: f64 = 1e-6;
pub const MAX_DENSE_N: usize = 2000;

fn eigen_arg(kappa: Complex64, omega0: f64) -> Complex64 {
    -2.0 * kappa / omega0
}

/// Checks that rung `m` and its Bessel tail fit inside the window.
pub fn check_rung_support(m: i64, params: &ChainParams, t: f64) -> Result<()> {
    let margin = (m - params.n_min).min(params.n_max - m);
    if margin < MIN_RUNG_MARGIN {
        return Err(Error::Window(format!(
            "rung {m} is {margin} sites from the window edge, need {MIN_RUNG_MARGIN}"
        )));
    }
    let arg = eigen_arg(kappa_at(params, t), params.omega0);
    let d = margin + 1;
    let tail = bessel_j(d, arg)?.norm();
    if (d as f64) <= arg.norm() || tail >= SUPPORT_TOL {
        return Err(Error::Window(format!(
            "rung {m}: eigenvector amplitude {tail:.2e} at {d} sites is clipped by the window"
        )));
    }
    Ok(())
}

fn bessel_vector(m: i64, params: &ChainParams, arg: Complex64, t: f64) -> Result<StateVector> {
    let amplitudes = bessel_j_span(params.n_min - m, params.n_max - m, arg)?;
    Ok(StateVector { n_min: params.n_min, amplitudes, time: t })
}

/// `ψ_m(n) = J_{n-m}(-2κ(t)/ω0)`.
pub fn right_eigenvector(m: i64, params: &ChainParams, t: f64) -> Result<StateVector> {
    check_rung_support(m, params, t)?;
    bessel_vector(m, params, eigen_arg(kappa_at(params, t), params.omega0), t)
}

/// `φ_m(n) = J_{n-m}(-2κ(t)*/ω0)`.
pub fn left_eigenvector(m: i64, params: &ChainParams, t: f64) -> Result<StateVector> {
    check_rung_support(m, params, t)?;
    bessel_vector(m, params, eigen_arg(kappa_at(params, t).conj(), params.omega0), t)
}

pub fn eigen_pair(m: i64, params: &ChainParams, t: f64) -> Result<EigenPair> {
    Ok(EigenPair {
        m,
        energy: Complex64::new(m as f64 * params.omega0, 0.0),
        right: right_eigenvector(m, params, t)?,
        left: left_eigenvector(m, params, t)?,
    })
}

/// `<a|b> = Σ conj(a_n) b_n` over the overlap of the two windows.
pub fn inner(a: &StateVector, b: &StateVector) -> Complex64 {
    let lo = a.n_min.max(b.n_min);
    let hi = a.n_max().min(b.n_max());
    (lo..=hi).map(|n| a.get(n).conj() * b.get(n)).sum()
}

/// Inverse participation ratio `Σ|ψ_n|⁴ / (Σ|ψ_n|²)²`.
pub fn ipr(state: &StateVector) -> Result<f64> {
    let (s2, s4) = state.amplitudes.iter().fold((0.0, 0.0), |(s2, s4), a| {
        let p = a.norm_sqr();
        (s2 + p, s4 + p * p)
    });
    if s2 == 0.0 {
        return Err(Error::ZeroState);
    }
    Ok(s4 / (s2 * s2))
}

/// Max `|<φ_m|ψ_n> - δ_mn|` over all `m, n` in `rungs`.
pub fn biorthonormality_matrix(params: &ChainParams, t: f64, rungs: std::ops::RangeInclusive<i64>) -> Result<f64> {
    biorthonormality_matrix_with(Exec::default(), params, t, rungs)
}

pub fn biorthonormality_matrix_with(
    exec: Exec,
    params: &ChainParams,
    t: f64,
    rungs: std::ops::RangeInclusive<i64>,
) -> Result<f64> {
    let ms: Vec<i64> = rungs.collect();
    let pairs = par::try_map_indexed(exec, ms.len(), |i| eigen_pair(ms[i], params, t))?;
    let k = pairs.len();
    let rows = par::map_indexed(exec, k, |i| {
        (0..k)
            .map(|j| {
                let d = if i == j { 1.0 } else { 0.0 };
                (inner(&pairs[i].left, &pairs[j].right) - d).norm()
            })
            .fold(0.0, f64::max)
    });
    Ok(rows.into_iter().fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub n: usize,
    #[serde(with = "crate::io::complex_vec")]
    pub eigenvalues: Vec<Complex64>,
    /// Number of central levels over which `max_imag` and `max_spacing_dev` are taken.
    pub ladder_window: usize,
    pub max_imag: f64,
    pub max_spacing_dev: f64,
    /// Length of the contiguous central run with `|Im E| < 1e-6` and spacing within 1e-6 of ω0.
    pub real_ladder_len: usize,
}

/// `N/5` rounded to the nearest odd integer, at least 1.
pub fn default_ladder_window(n: usize) -> usize {
    let x = n as f64 / 5.0;
    let k = ((x - 1.0) / 2.0).round().max(0.0) as usize;
    (2 * k + 1).min(if n % 2 == 1 { n } else { n - 1 })
}

/// Dense spectrum of the `N`-site chain centered on site 0 at time `t`.
pub fn finite_chain_spectrum(n: usize, params: &ChainParams, t: f64) -> Result<SpectrumReport> {
    finite_chain_spectrum_windowed(n, params, t, default_ladder_window(n))
}

pub fn finite_chain_spectrum_windowed(n: usize, params: &ChainParams, t: f64, ladder_window: usize) -> Result<SpectrumReport> {
    if !(3..=MAX_DENSE_N).contains(&n) {
        return Err(Error::InvalidParams(format!("N = {n} outside 3..={MAX_DENSE_N}")));
    }
    if ladder_window == 0 || ladder_window > n {
        return Err(Error::InvalidParams(format!("ladder window {ladder_window} outside 1..={n}")));
    }
    let n_min = -((n as i64 - 1) / 2);
    let p = ChainParams { n_min, n_max: n_min + n as i64 - 1, ..*params };
    let h = build_hamiltonian(&p, t).to_dense();
    let mut eigs = eigenvalues(&h)?;
    eigs.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));

    let start = (n - ladder_window) / 2;
    let central = &eigs[start..start + ladder_window];
    let max_imag = central.iter().map(|e| e.im.abs()).fold(0.0, f64::max);
    let max_spacing_dev = central
        .windows(2)
        .map(|w| (w[1].re - w[0].re - params.omega0).abs())
        .fold(0.0, f64::max);

    Ok(SpectrumReport {
        n,
        real_ladder_len: real_ladder_len(&eigs, params.omega0),
        eigenvalues: eigs,
        ladder_window,
        max_imag,
        max_spacing_dev,
    })
}

/// Longest run around the middle of `sorted` of real, ω0-spaced levels.
pub fn real_ladder_len(sorted: &[Complex64], omega0: f64) -> usize {
    let n = sorted.len();
    let mid = n / 2;
    let good = |e: &Complex64| e.im.abs() < LADDER_TOL;
    let spaced = |a: &Complex64, b: &Complex64| (b.re - a.re - omega0).abs() < LADDER_TOL;
    if !good(&sorted[mid]) {
        return 0;
    }
    let mut lo = mid;
    while lo > 0 && good(&sorted[lo - 1]) && spaced(&sorted[lo - 1], &sorted[lo]) {
        lo -= 1;
    }
    let mut hi = mid;
    while hi + 1 < n && good(&sorted[hi + 1]) && spaced(&sorted[hi], &sorted[hi + 1]) {
        hi += 1;
    }
    hi - lo + 1
}

/// Number of eigenvalues whose complex conjugate is not in the set within `tol`.
pub fn unpaired_conjugates(eigs: &[Complex64], tol: f64) -> usize {
    eigs.iter()
        .filter(|e| !eigs.iter().any(|f| (f - e.conj()).norm() < tol))
        .count()
}
