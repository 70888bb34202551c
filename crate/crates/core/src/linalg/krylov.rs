//! Action of `exp(-i t H)` on a vector by Arnoldi projection with sub-stepping.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovOptions {
    /// Maximum Krylov subspace dimension.
    pub dim: usize,
    /// Per-substep error estimate bound, relative to the vector norm.
    pub tol: f64,
    /// Give up when more substeps than this are needed.
    pub max_substeps: usize,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self { dim: 30, tol: 1e-10, max_substeps: 100_000 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KrylovStats {
    pub substeps: usize,
    pub rejected: usize,
    pub max_error_estimate: f64,
}

/// Dense `exp(a)` by scaling and squaring of a Taylor series.
pub fn expm(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = a.nrows();
    let norm = (0..n)
        .map(|i| (0..n).map(|j| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut s = 0i32;
    if norm > 0.5 {
        s = (norm / 0.5).log2().ceil() as i32;
    }
    let scaled = a * Complex64::new(0.5f64.powi(s), 0.0);
    let mut result = DMatrix::<Complex64>::identity(n, n);
    let mut term = DMatrix::<Complex64>::identity(n, n);
    for k in 1..40 {
        term = &term * &scaled * Complex64::new(1.0 / k as f64, 0.0);
        result += &term;
        if term.norm() <= 1e-18 * result.norm() {
            break;
        }
    }
    for _ in 0..s {
        result = &result * &result;
    }
    result
}

fn vnorm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `exp(-i t H) v`, with `apply(x, y)` computing `y = H x` and `h_norm` an
/// upper bound on `||H||`.
pub fn expmv<F>(apply: F, h_norm: f64, v: &[Complex64], t: f64, opts: &KrylovOptions) -> Result<(Vec<Complex64>, KrylovStats)>
where
    F: Fn(&[Complex64], &mut [Complex64]),
{
    let n = v.len();
    let zero = Complex64::new(0.0, 0.0);
    let mut stats = KrylovStats::default();
    let mut w = v.to_vec();
    if t == 0.0 || n == 0 {
        return Ok((w, stats));
    }
    let minus_i = Complex64::new(0.0, -1.0);
    let m_max = opts.dim.min(n).max(1);
    let anorm = h_norm.max(1e-300);
    let mut t_done = 0.0;
    let mut tau = (t.abs()).min(m_max as f64 / (2.0 * anorm)).max(t.abs() * 1e-6);
    let sign = t.signum();
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(m_max + 1);
    let mut p = vec![zero; n];

    while t_done < t.abs() {
        if stats.substeps >= opts.max_substeps {
            return Err(Error::NoConvergence {
                what: format!("Krylov propagation reached t = {t_done} of {}", t.abs()),
                iterations: stats.substeps,
            });
        }
        let beta = vnorm(&w);
        if beta == 0.0 {
            break;
        }
        basis.clear();
        basis.push(w.iter().map(|z| z / beta).collect());
        let mut hm = DMatrix::<Complex64>::zeros(m_max + 1, m_max);
        let mut m = m_max;
        let mut breakdown = false;
        for j in 0..m_max {
            apply(&basis[j], &mut p);
            for z in p.iter_mut() {
                *z *= minus_i * sign;
            }
            // modified Gram-Schmidt, applied twice
            for _ in 0..2 {
                for (i, q) in basis.iter().enumerate() {
                    let d: Complex64 = q.iter().zip(&p).map(|(a, b)| a.conj() * b).sum();
                    hm[(i, j)] += d;
                    for (x, y) in p.iter_mut().zip(q) {
                        *x -= d * y;
                    }
                }
            }
            let hn = vnorm(&p);
            hm[(j + 1, j)] = Complex64::new(hn, 0.0);
            if hn <= 1e-13 * anorm {
                m = j + 1;
                breakdown = true;
                break;
            }
            basis.push(p.iter().map(|z| z / hn).collect());
        }
        let h_next = if breakdown { 0.0 } else { hm[(m, m - 1)].re };
        let hsq = hm.view((0, 0), (m, m)).into_owned();
        let remaining = t.abs() - t_done;
        if breakdown {
            tau = remaining;
        }
        tau = tau.min(remaining);
        let (e, err) = loop {
            let e = expm(&(&hsq * Complex64::new(tau, 0.0)));
            let err = beta * tau * h_next * e[(m - 1, 0)].norm();
            if err <= opts.tol * beta || breakdown {
                break (e, err);
            }
            stats.rejected += 1;
            tau *= 0.5;
            if tau < 1e-12 * t.abs() {
                return Err(Error::NoConvergence {
                    what: format!("Krylov step size collapsed at t = {t_done}, error estimate {err:.3e}"),
                    iterations: stats.substeps,
                });
            }
        };
        for z in w.iter_mut() {
            *z = zero;
        }
        for (k, q) in basis.iter().take(m).enumerate() {
            let coef = beta * e[(k, 0)];
            for (x, y) in w.iter_mut().zip(q) {
                *x += coef * y;
            }
        }
        t_done += tau;
        stats.substeps += 1;
        stats.max_error_estimate = stats.max_error_estimate.max(err / beta);
        if err < 0.1 * opts.tol * beta {
            tau *= 1.5;
        }
    }
    Ok((w, stats))
}
