//! Eigenvalues of a general complex matrix: Householder reduction to upper
//! Hessenberg form followed by single-shift QR iteration with Givens rotations.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Subdiagonal entries below `DEFLATION_TOL * ||H||_F` are set to zero.
pub const DEFLATION_TOL: f64 = 1e-12;
/// Iteration budget per eigenvalue.
pub const MAX_ITER_PER_EIGENVALUE: usize = 30;

/// Reduces `a` in place to upper Hessenberg form by unitary similarity.
pub fn hessenberg(a: &mut DMatrix<Complex64>) {
    let n = a.nrows();
    if n < 3 {
        return;
    }
    let zero = Complex64::new(0.0, 0.0);
    let mut v = vec![zero; n];
    for k in 0..n - 2 {
        let norm: f64 = (k + 1..n).map(|i| a[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = a[(k + 1, k)];
        let phase = if x0.norm() == 0.0 { Complex64::new(1.0, 0.0) } else { x0 / x0.norm() };
        let alpha = -phase * norm;
        for i in 0..n {
            v[i] = if i > k { a[(i, k)] } else { zero };
        }
        v[k + 1] -= alpha;
        let vn: f64 = v[k + 1..].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if vn == 0.0 {
            continue;
        }
        for z in v[k + 1..].iter_mut() {
            *z /= vn;
        }
        // a <- (I - 2 v v^H) a
        for j in k..n {
            let s: Complex64 = (k + 1..n).map(|i| v[i].conj() * a[(i, j)]).sum();
            for i in k + 1..n {
                a[(i, j)] -= 2.0 * v[i] * s;
            }
        }
        // a <- a (I - 2 v v^H)
        for i in 0..n {
            let s: Complex64 = (k + 1..n).map(|j| a[(i, j)] * v[j]).sum();
            for j in k + 1..n {
                a[(i, j)] -= 2.0 * s * v[j].conj();
            }
        }
        for i in k + 2..n {
            a[(i, k)] = zero;
        }
    }
}

/// Rotation `[[c, s], [-conj(s), c]]` mapping `(x, y)` to `(r, 0)`.
fn givens(x: Complex64, y: Complex64) -> (f64, Complex64) {
    let ax = x.norm();
    let ay = y.norm();
    if ay == 0.0 {
        return (1.0, Complex64::new(0.0, 0.0));
    }
    if ax == 0.0 {
        return (0.0, y.conj() / ay);
    }
    let r = ax.hypot(ay);
    (ax / r, (x / ax) * y.conj() / r)
}

fn wilkinson_shift(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let half_tr = 0.5 * (a + d);
    let disc = (0.25 * (a - d) * (a - d) + b * c).sqrt();
    let l1 = half_tr + disc;
    let l2 = half_tr - disc;
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

/// All eigenvalues of `a`, in deflation order.
pub fn eigenvalues(a: &DMatrix<Complex64>) -> Result<Vec<Complex64>> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix must be square");
    let mut h = a.clone();
    hessenberg(&mut h);
    let tol = DEFLATION_TOL * h.norm();
    let zero = Complex64::new(0.0, 0.0);
    let mut out = Vec::with_capacity(n);
    let mut rots: Vec<(f64, Complex64)> = Vec::with_capacity(n);
    let mut hi = n;
    let mut iter = 0usize;
    while hi > 0 {
        let last = hi - 1;
        let mut lo = last;
        while lo > 0 && h[(lo, lo - 1)].norm() >= tol {
            lo -= 1;
        }
        if lo > 0 {
            h[(lo, lo - 1)] = zero;
        }
        if lo == last {
            out.push(h[(last, last)]);
            hi = last;
            iter = 0;
            continue;
        }
        iter += 1;
        if iter > MAX_ITER_PER_EIGENVALUE {
            return Err(Error::NoConvergence {
                what: format!("QR iteration for eigenvalue {} of {n}", out.len() + 1),
                iterations: iter - 1,
            });
        }
        let mu = if iter.is_multiple_of(10) {
            let sub = h[(last, last - 1)].norm() + if last >= lo + 2 { h[(last - 1, last - 2)].norm() } else { 0.0 };
            h[(last, last)] + Complex64::new(0.75 * sub, 0.0)
        } else {
            wilkinson_shift(h[(last - 1, last - 1)], h[(last - 1, last)], h[(last, last - 1)], h[(last, last)])
        };
        for k in lo..=last {
            h[(k, k)] -= mu;
        }
        rots.clear();
        for k in lo..last {
            let (c, s) = givens(h[(k, k)], h[(k + 1, k)]);
            for j in k..=last {
                let x = h[(k, j)];
                let y = h[(k + 1, j)];
                h[(k, j)] = c * x + s * y;
                h[(k + 1, j)] = -s.conj() * x + c * y;
            }
            h[(k + 1, k)] = zero;
            rots.push((c, s));
        }
        for (idx, &(c, s)) in rots.iter().enumerate() {
            let k = lo + idx;
            for i in lo..=(k + 1).min(last) {
                let x = h[(i, k)];
                let y = h[(i, k + 1)];
                h[(i, k)] = c * x + s.conj() * y;
                h[(i, k + 1)] = -s * x + c * y;
            }
        }
        for k in lo..=last {
            h[(k, k)] += mu;
        }
    }
    Ok(out)
}
