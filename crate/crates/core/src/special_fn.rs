//! Integer-order Bessel functions of the first kind for complex argument, and
//! the modified Bessel functions I0, I1 for real argument.
//!
//! `bessel_j` uses the ascending series for small arguments and low orders and
//! Miller's backward recurrence everywhere else. The recurrence is normalized
//! with a generating-function identity chosen by the sign of `Im z`:
//!
//! * `Im z = 0`: `1 = J0 + 2 Σ J_{2k}`
//! * `Im z > 0`: `e^{-iz} = J0 + 2 Σ (-i)^k J_k`
//! * `Im z < 0`: `e^{iz} = J0 + 2 Σ i^k J_k`
//!
//! The last two sums have no cancellation along the imaginary axis, where the
//! plain Neumann sum alternates over terms of size `e^{|Im z|}`.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest supported `|n|` and `|z|`.
pub const MAX_ORDER: i64 = 10_000;
pub const MAX_ARG: f64 = 1.0e4;
/// Beyond this `|Im z|` (or `|x|` for I0) the result overflows a double.
pub const MAX_IMAG: f64 = 700.0;

const SERIES_MAX_ABS: f64 = 8.0;
const SERIES_MAX_TERMS: usize = 500;
const RESCALE_ABOVE: f64 = 1.0e250;
const RESCALE_BY: f64 = 1.0e-250;

fn check_arg(z: Complex64) -> Result<()> {
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::Domain(format!("bessel argument {z} is not finite")));
    }
    if z.norm() > MAX_ARG {
        return Err(Error::Range(format!("|z| = {} exceeds {MAX_ARG}", z.norm())));
    }
    if z.im.abs() > MAX_IMAG {
        return Err(Error::Overflow(format!(
            "|Im z| = {} exceeds {MAX_IMAG}",
            z.im.abs()
        )));
    }
    Ok(())
}

fn check_order(n: i64) -> Result<()> {
    if n.abs() > MAX_ORDER {
        return Err(Error::Range(format!("order {n} exceeds {MAX_ORDER}")));
    }
    Ok(())
}

/// `J_n(z)` for integer `n` and complex `z`.
pub fn bessel_j(n: i64, z: Complex64) -> Result<Complex64> {
    check_order(n)?;
    check_arg(z)?;
    let sign = if n < 0 && n % 2 != 0 { -1.0 } else { 1.0 };
    let n = n.unsigned_abs() as usize;
    if z == Complex64::new(0.0, 0.0) {
        return Ok(if n == 0 { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) });
    }
    let r = z.norm();
    let value = if r <= SERIES_MAX_ABS && (n as f64) <= r + 20.0 {
        series(n, z)
    } else {
        miller(n, z)[n]
    };
    Ok(value * sign)
}

/// `[J_0(z), ..., J_max_order(z)]` from a single backward-recurrence pass.
pub fn bessel_j_row(max_order: usize, z: Complex64) -> Result<Vec<Complex64>> {
    check_order(max_order as i64)?;
    check_arg(z)?;
    if z == Complex64::new(0.0, 0.0) {
        let mut row = vec![Complex64::new(0.0, 0.0); max_order + 1];
        row[0] = Complex64::new(1.0, 0.0);
        return Ok(row);
    }
    let mut row = miller(max_order, z);
    row.truncate(max_order + 1);
    Ok(row)
}

/// `J_k(z)` for `k` in `lo..=hi` (either sign), with `J_{-k} = (-1)^k J_k`.
pub fn bessel_j_span(lo: i64, hi: i64, z: Complex64) -> Result<Vec<Complex64>> {
    if hi < lo {
        return Ok(Vec::new());
    }
    let top = lo.unsigned_abs().max(hi.unsigned_abs()) as usize;
    let row = bessel_j_row(top, z)?;
    Ok((lo..=hi)
        .map(|k| {
            let v = row[k.unsigned_abs() as usize];
            if k < 0 && k % 2 != 0 {
                -v
            } else {
                v
            }
        })
        .collect())
}

/// Residual of the Neumann identity `J0 + 2 Σ J_{2k} = 1` on a row from
/// [`bessel_j_row`], relative to the absolute mass of the summed terms. The
/// row must extend past the point where the Bessel tail is negligible.
pub fn neumann_sum_residual(row: &[Complex64]) -> f64 {
    let mut sum = Complex64::new(0.0, 0.0);
    let mut mass = 0.0;
    for (k, v) in row.iter().enumerate().step_by(2) {
        let w = if k == 0 { 1.0 } else { 2.0 };
        sum += v * w;
        mass += w * v.norm();
    }
    (sum - 1.0).norm() / mass.max(1.0)
}

fn series(n: usize, z: Complex64) -> Complex64 {
    let half = z * 0.5;
    let mut pre = Complex64::new(1.0, 0.0);
    for j in 1..=n {
        pre *= half / j as f64;
    }
    let q = -(half * half);
    let mut term = pre;
    let mut sum = pre;
    for k in 1..SERIES_MAX_TERMS {
        term *= q / (k as f64 * (n + k) as f64);
        sum += term;
        if term.norm() <= 1e-17 * sum.norm() && k as f64 > half.norm() {
            break;
        }
    }
    sum
}

/// Start order for the backward recurrence. The margin above
/// `max(n, |z|)` keeps the minimal-solution contamination below 1e-15.
fn start_order(n: usize, r: f64) -> usize {
    let base = n.max(r.ceil() as usize);
    let margin = 30usize.max((8.0 * r.sqrt()).ceil() as usize + 20);
    let start = base + margin;
    start + (start % 2)
}

fn miller(n: usize, z: Complex64) -> Vec<Complex64> {
    let top = start_order(n, z.norm());
    let zero = Complex64::new(0.0, 0.0);
    let mut f = vec![zero; top + 2];
    f[top] = Complex64::new(1.0, 0.0);
    let two_over_z = 2.0 / z;
    // entries above `live` have underflowed to zero after rescaling
    let mut live = top;
    for k in (1..=top).rev() {
        let next = two_over_z * k as f64 * f[k] - f[k + 1];
        f[k - 1] = next;
        if next.norm() > RESCALE_ABOVE {
            for v in f[k - 1..=live].iter_mut() {
                *v *= RESCALE_BY;
            }
            while live > k && f[live] == zero {
                live -= 1;
            }
        }
    }
    f.truncate(top + 1);

    let (target, weight): (Complex64, fn(usize) -> Complex64) = if z.im == 0.0 {
        (Complex64::new(1.0, 0.0), |k| {
            if k % 2 == 0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    } else if z.im > 0.0 {
        ((-Complex64::i() * z).exp(), |k| Complex64::i().powu(3 * (k as u32 % 4)))
    } else {
        ((Complex64::i() * z).exp(), |k| Complex64::i().powu(k as u32 % 4))
    };
    let mut s = f[0];
    for (k, v) in f.iter().enumerate().skip(1) {
        s += 2.0 * weight(k) * v;
    }
    // avoid Complex division, which squares the magnitude
    let m = s.norm();
    let scale = target * (s.conj() / m) / m;
    for v in f.iter_mut() {
        *v *= scale;
    }
    f
}

fn check_real(x: f64) -> Result<()> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("argument {x} is not finite")));
    }
    if x.abs() > MAX_IMAG {
        return Err(Error::Overflow(format!("|x| = {} exceeds {MAX_IMAG}", x.abs())));
    }
    Ok(())
}

/// Sum of `(x/2)^{2k+nu} / (k! (k+nu)!)`; all terms positive.
fn modified_series(nu: u32, x: f64) -> f64 {
    let h = 0.5 * x.abs();
    let q = h * h;
    let mut term = if nu == 0 { 1.0 } else { h };
    let mut sum = term;
    let mut k = 1.0;
    loop {
        term *= q / (k * (k + nu as f64));
        sum += term;
        if term <= 1e-17 * sum && k > h {
            break;
        }
        k += 1.0;
    }
    sum
}

/// `I_0(x)` for `|x| <= 700`.
pub fn modified_bessel_i0(x: f64) -> Result<f64> {
    check_real(x)?;
    Ok(modified_series(0, x))
}

/// `I_1(x)` for `|x| <= 700` (odd in `x`).
pub fn modified_bessel_i1(x: f64) -> Result<f64> {
    check_real(x)?;
    Ok(modified_series(1, x).copysign(x))
}

/// `ln I_0(x)`, usable beyond the overflow guard of [`modified_bessel_i0`].
pub fn ln_modified_bessel_i0(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("argument {x} is not finite")));
    }
    let a = x.abs();
    if a <= MAX_IMAG {
        return Ok(modified_series(0, a).ln());
    }
    let inv = 1.0 / (8.0 * a);
    let corr = 1.0 + inv * (1.0 + inv * (4.5 + inv * 37.5));
    Ok(a - 0.5 * (2.0 * std::f64::consts::PI * a).ln() + corr.ln())
}

/// `I_1(x) / I_0(x)`, finite for every finite `x`.
pub fn modified_bessel_ratio(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("argument {x} is not finite")));
    }
    let a = x.abs();
    let r = if a <= MAX_IMAG {
        modified_series(1, a) / modified_series(0, a)
    } else {
        let inv = 1.0 / (8.0 * a);
        (1.0 - 3.0 * inv * (1.0 + inv * (2.5 + inv * 17.5))) / (1.0 + inv * (1.0 + inv * (4.5 + inv * 37.5)))
    };
    Ok(r.copysign(x))
}
