//! Independent reference implementations used only by the test suites.
#![allow(dead_code)]

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{Signed, ToPrimitive, Zero};

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Fixed-point precision of the series oracle, in bits.
const PREC: u32 = 420;

fn to_fixed(x: f64) -> BigInt {
    if x == 0.0 {
        return BigInt::zero();
    }
    let bits = x.to_bits();
    let sign = if bits >> 63 == 1 { -1 } else { 1 };
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let mant = if exp == 0 { (bits & 0xf_ffff_ffff_ffff) << 1 } else { (bits & 0xf_ffff_ffff_ffff) | (1 << 52) };
    // x = mant * 2^(exp - 1075)
    let shift = exp - 1075 + PREC as i64;
    let m = BigInt::from(mant) * sign;
    if shift >= 0 {
        m << shift as usize
    } else {
        m >> (-shift) as usize
    }
}

fn from_fixed(x: &BigInt) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        x.to_f64().unwrap() * 2f64.powi(-(PREC as i32))
    } else {
        let drop = bits - 1000;
        (x >> drop as usize).to_f64().unwrap() * 2f64.powi(drop as i32 - PREC as i32)
    }
}

#[derive(Clone)]
struct Fx {
    re: BigInt,
    im: BigInt,
}

impl Fx {
    fn from(z: Complex64) -> Self {
        Fx { re: to_fixed(z.re), im: to_fixed(z.im) }
    }
    fn mul(&self, o: &Fx) -> Fx {
        Fx {
            re: (&self.re * &o.re - &self.im * &o.im) >> PREC as usize,
            im: (&self.re * &o.im + &self.im * &o.re) >> PREC as usize,
        }
    }
    fn div_int(&self, d: u64) -> Fx {
        Fx { re: &self.re / d, im: &self.im / d }
    }
    fn add(&mut self, o: &Fx) {
        self.re += &o.re;
        self.im += &o.im;
    }
    fn is_tiny(&self) -> bool {
        self.re.abs().bits() + 40 < PREC as u64 / 2 && self.im.abs().bits() + 40 < PREC as u64 / 2
    }
    fn to_c(&self) -> Complex64 {
        c(from_fixed(&self.re), from_fixed(&self.im))
    }
}

/// `J_n(z)` from the ascending series in ~420-bit fixed point:
/// `(z/2)^n / n! * Σ_k (-z²/4)^k n! / (k! (n+k)!)`.
pub fn bessel_j_oracle(n: i64, z: Complex64) -> Complex64 {
    let sign = if n < 0 && n % 2 != 0 { -1.0 } else { 1.0 };
    let n = n.unsigned_abs();
    if z == c(0.0, 0.0) {
        return if n == 0 { c(1.0, 0.0) } else { c(0.0, 0.0) };
    }
    let half = Fx::from(z * 0.5);
    let w = {
        let sq = half.mul(&half);
        Fx { re: -sq.re, im: -sq.im }
    };
    let mut term = Fx::from(c(1.0, 0.0));
    let mut sum = term.clone();
    let wabs = (z * 0.5).norm_sqr();
    let mut k = 1u64;
    loop {
        term = term.mul(&w).div_int(k * (n + k));
        sum.add(&term);
        if k as f64 > wabs && term.is_tiny() {
            break;
        }
        k += 1;
        assert!(k < 5000, "series oracle did not converge");
    }
    // prefactor (z/2)^n / n! accumulated in the same fixed point, rescaled as
    // needed to stay representable
    let mut pre = c(1.0, 0.0);
    let mut log_scale = 0i32;
    for j in 1..=n {
        pre *= z * 0.5 / j as f64;
        let e = pre.norm().log2().floor() as i32;
        if e.abs() > 500 {
            pre *= 2f64.powi(-e);
            log_scale += e;
        }
    }
    let v = pre * sum.to_c();
    v * 2f64.powi(log_scale) * sign
}

/// `I_1(x)` from its series in ordinary double precision.
pub fn i1_series(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = x / 2.0;
    let mut sum = term;
    for k in 1..200 {
        term *= q / (k as f64 * (k + 1) as f64);
        sum += term;
    }
    sum
}

/// Adaptive Simpson quadrature.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// `(1/2π) ∫_{-π}^{π} e^{x sin k} dk` by adaptive quadrature.
pub fn i0_quadrature(x: f64) -> f64 {
    use std::f64::consts::PI;
    let scale = x.abs().exp();
    let f = move |k: f64| (x * k.sin()).exp();
    adaptive_simpson(&f, -PI, PI, 1e-14 * scale) / (2.0 * PI)
}

/// Exact infinite-chain propagator for `κ(t) = κ0 cos(ωt)`, from the
/// interaction picture where the hopping terms commute:
/// `U_mn(t) = e^{-i ω0 m t} J_{m-n}(2c) λ^{m-n}`, `c = sqrt(AB)`, `λ = -iB/c`,
/// `A = ∫ κ e^{-iω0 s} ds`, `B = ∫ κ e^{iω0 s} ds`.
pub struct DrivenPropagator {
    pub omega0: f64,
    pub t: f64,
    a: Complex64,
    b: Complex64,
    row: Vec<Complex64>,
    lambda: Complex64,
    cc: Complex64,
}

fn f_int(w: f64, t: f64) -> Complex64 {
    if w == 0.0 {
        c(t, 0.0)
    } else {
        (c(0.0, w * t).exp() - 1.0) / c(0.0, w)
    }
}

impl DrivenPropagator {
    pub fn new(kappa0: Complex64, omega: f64, omega0: f64, t: f64, max_order: usize) -> Self {
        let a = kappa0 * 0.5 * (f_int(omega - omega0, t) + f_int(-omega - omega0, t));
        let b = kappa0 * 0.5 * (f_int(omega + omega0, t) + f_int(omega0 - omega, t));
        let cc = (a * b).sqrt();
        let lambda = if cc.norm() > 0.0 { c(0.0, -1.0) * b / cc } else { c(0.0, 0.0) };
        let row = (0..=max_order as i64).map(|p| bessel_j_oracle(p, 2.0 * cc)).collect();
        Self { omega0, t, a, b, row, lambda, cc }
    }

    pub fn element(&self, m: i64, n: i64) -> Complex64 {
        let p = m - n;
        let k = p.unsigned_abs() as usize;
        if k >= self.row.len() {
            return c(0.0, 0.0);
        }
        let inter = if self.cc.norm() == 0.0 {
            let base = if p >= 0 { c(0.0, -1.0) * self.b } else { c(0.0, -1.0) * self.a };
            let mut fact = 1.0;
            for j in 1..=k {
                fact *= j as f64;
            }
            base.powu(k as u32) / fact
        } else {
            let j = if p < 0 && k % 2 == 1 { -self.row[k] } else { self.row[k] };
            j * self.lambda.powi(p as i32)
        };
        c(0.0, -self.omega0 * m as f64 * self.t).exp() * inter
    }
}
