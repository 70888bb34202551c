//! Chain parameters, state vectors and the tilted tight-binding Hamiltonian.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sites on each side of the window watched by the edge-leak monitor.
pub const EDGE_SITES: usize = 5;
/// Default failure threshold for the edge-leak monitor (fraction of norm²).
pub const DEFAULT_LEAK_THRESHOLD: f64 = 1e-8;

/// Parameters of the driven tilted chain `κ(t) Σ (|n><n+1| + h.c.) + ω0 Σ n |n><n|`
/// with `κ(t) = κ0 cos(ωt)`, restricted to the sites `n_min..=n_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    #[serde(with = "crate::io::complex")]
    pub kappa0: Complex64,
    pub omega: f64,
    pub omega0: f64,
    pub n_min: i64,
    pub n_max: i64,
}

impl ChainParams {
    pub fn new(kappa0: Complex64, omega: f64, omega0: f64, n_min: i64, n_max: i64) -> Result<Self> {
        let p = Self { kappa0, omega, omega0, n_min, n_max };
        p.validate()?;
        Ok(p)
    }

    /// Window of `2 * half + 1` sites centered on site 0.
    pub fn centered(kappa0: Complex64, omega: f64, omega0: f64, half: i64) -> Result<Self> {
        Self::new(kappa0, omega, omega0, -half, half)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa0.re.is_finite() && self.kappa0.im.is_finite()) {
            return Err(Error::InvalidParams("kappa0 must be finite".into()));
        }
        if !(self.omega.is_finite() && self.omega >= 0.0) {
            return Err(Error::InvalidParams(format!("omega must be >= 0, got {}", self.omega)));
        }
        if !(self.omega0.is_finite() && self.omega0 > 0.0) {
            return Err(Error::InvalidParams(format!("omega0 must be > 0, got {}", self.omega0)));
        }
        if self.n_max < self.n_min || self.n_max - self.n_min + 1 < 3 {
            return Err(Error::InvalidParams(format!(
                "window ({}, {}) must hold at least 3 sites",
                self.n_min, self.n_max
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        (self.n_max - self.n_min + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn kappa_at(&self, t: f64) -> Complex64 {
        kappa_at(self, t)
    }

    pub fn bloch_period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.omega0
    }
}

/// `κ(t) = κ0 cos(ωt)`.
pub fn kappa_at(params: &ChainParams, t: f64) -> Complex64 {
    if params.omega == 0.0 {
        params.kappa0
    } else {
        params.kappa0 * (params.omega * t).cos()
    }
}

/// Complex amplitudes on the sites `n_min .. n_min + len`. Never normalized
/// implicitly: non-Hermitian evolution changes the norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub n_min: i64,
    #[serde(with = "crate::io::complex_vec")]
    pub amplitudes: Vec<Complex64>,
    pub time: f64,
}

impl StateVector {
    pub fn zeros(n_min: i64, len: usize) -> Self {
        Self { n_min, amplitudes: vec![Complex64::new(0.0, 0.0); len], time: 0.0 }
    }

    /// Unit amplitude on `site`, zero elsewhere.
    pub fn site(params: &ChainParams, site: i64) -> Result<Self> {
        let mut s = Self::zeros(params.n_min, params.len());
        let idx = s
            .index(site)
            .ok_or_else(|| Error::Window(format!("site {site} outside window")))?;
        s.amplitudes[idx] = Complex64::new(1.0, 0.0);
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn n_max(&self) -> i64 {
        self.n_min + self.amplitudes.len() as i64 - 1
    }

    pub fn index(&self, n: i64) -> Option<usize> {
        let i = n - self.n_min;
        (i >= 0 && (i as usize) < self.amplitudes.len()).then_some(i as usize)
    }

    pub fn get(&self, n: i64) -> Complex64 {
        self.index(n).map_or(Complex64::new(0.0, 0.0), |i| self.amplitudes[i])
    }

    pub fn sites(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.amplitudes.len() as i64).map(move |i| self.n_min + i)
    }

    pub fn probs(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Fraction of norm² on the outermost [`EDGE_SITES`] sites at either end.
    pub fn edge_leak(&self) -> f64 {
        let total = self.norm_sqr();
        if total == 0.0 {
            return 0.0;
        }
        let k = EDGE_SITES.min(self.len() / 2);
        let n = self.len();
        let edge: f64 = self.amplitudes[..k]
            .iter()
            .chain(&self.amplitudes[n - k..])
            .map(|a| a.norm_sqr())
            .sum();
        edge / total
    }

    pub fn check_leak(&self, threshold: f64) -> Result<f64> {
        let leak = self.edge_leak();
        if leak > threshold {
            return Err(Error::Leak { t: self.time, fraction: leak, threshold });
        }
        Ok(leak)
    }

    /// Bilinear (unconjugated) product `Σ_n self_n other_n`.
    pub fn dot_bilinear(&self, other: &StateVector) -> Complex64 {
        let lo = self.n_min.max(other.n_min);
        let hi = self.n_max().min(other.n_max());
        (lo..=hi).map(|n| self.get(n) * other.get(n)).sum()
    }

    pub fn max_abs_diff(&self, other: &StateVector) -> f64 {
        let lo = self.n_min.min(other.n_min);
        let hi = self.n_max().max(other.n_max());
        (lo..=hi).map(|n| (self.get(n) - other.get(n)).norm()).fold(0.0, f64::max)
    }
}

/// One ladder rung: energy `m ω0`, right and left eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub m: i64,
    pub energy: Complex64,
    pub right: StateVector,
    pub left: StateVector,
}

/// Complex-symmetric tridiagonal matrix: `diag[i]` on the diagonal and
/// `off[i]` at both `(i, i+1)` and `(i+1, i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub diag: Vec<Complex64>,
    pub off: Vec<Complex64>,
}

impl Tridiagonal {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        let n = self.diag.len();
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.off[i] * x[i + 1];
            }
            y[i] = acc;
        }
    }

    /// Upper bound on the induced 1-norm.
    pub fn norm_bound(&self) -> f64 {
        let n = self.diag.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i].norm();
                if i > 0 {
                    s += self.off[i - 1].norm();
                }
                if i + 1 < n {
                    s += self.off[i].norm();
                }
                s
            })
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let n = self.diag.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            if i + 1 < n {
                m[(i, i + 1)] = self.off[i];
                m[(i + 1, i)] = self.off[i];
            }
        }
        m
    }

    pub fn trace(&self) -> Complex64 {
        self.diag.iter().sum()
    }
}

/// Hamiltonian on the window at time `t`, open boundaries.
pub fn build_hamiltonian(params: &ChainParams, t: f64) -> Tridiagonal {
    let k = kappa_at(params, t);
    let n = params.len();
    Tridiagonal {
        diag: (0..n)
            .map(|i| Complex64::new((params.n_min + i as i64) as f64 * params.omega0, 0.0))
            .collect(),
        off: vec![k; n - 1],
    }
}
