//! Static square lattice whose wavepacket dynamics replays the driven chain.
//!
//! `H = κ0 Σ cos(qm) |n,m><n+1,m| - J Σ |n,m><n,m+1| + h.c. + ω0 Σ n |n,m><n,m|`
//! where "h.c." repeats each hop with the same coefficient (complex-symmetric
//! for complex κ0). A packet launched along m with momentum π/2 travels at
//! about 2J, so the column index plays the role of time and `q = ω/(2J)`
//! reproduces the drive `κ0 cos(ωt)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::loglog_fit;
use crate::io;
use crate::linalg::{expmv, CsrMatrix, KrylovOptions, KrylovStats};
use crate::par::{self, Exec};

/// Minimum distance of the launch row `n0` from the n edges.
pub const MIN_N_MARGIN: i64 = 10;
/// Columns behind the packet center so that its amplitude tail is below 1e-8.
pub const DEFAULT_LAUNCH_OFFSET: i64 = 9;
pub const DENSE_ORACLE_MAX: usize = 1600;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice2DParams {
    #[serde(with = "crate::io::complex")]
    pub kappa0: Complex64,
    pub q: f64,
    pub j: f64,
    pub omega0: f64,
    pub n_sites: usize,
    pub m_sites: usize,
    pub n_min: i64,
    pub m_min: i64,
}

impl Lattice2DParams {
    /// Lattice with `q = ω/(2J)`.
    pub fn driven(kappa0: Complex64, omega: f64, omega0: f64, j: f64, n_sites: usize, m_sites: usize, n_min: i64, m_min: i64) -> Result<Self> {
        let p = Self { kappa0, q: omega / (2.0 * j), j, omega0, n_sites, m_sites, n_min, m_min };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.j > 0.0) {
            return Err(Error::InvalidParams(format!("J must be > 0, got {}", self.j)));
        }
        if !(self.omega0 > 0.0) {
            return Err(Error::InvalidParams(format!("omega0 must be > 0, got {}", self.omega0)));
        }
        if self.n_sites < 3 || self.m_sites < 3 {
            return Err(Error::InvalidParams(format!("lattice {}x{} smaller than 3x3", self.n_sites, self.m_sites)));
        }
        if self.kappa0.norm() > 0.5 * self.j {
            log::warn!(
                "|kappa0| = {} exceeds J/2 = {}; the column-as-time mapping assumes |kappa0| << J",
                self.kappa0.norm(),
                0.5 * self.j
            );
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n_sites * self.m_sites
    }

    pub fn n_max(&self) -> i64 {
        self.n_min + self.n_sites as i64 - 1
    }

    pub fn m_max(&self) -> i64 {
        self.m_min + self.m_sites as i64 - 1
    }

    pub fn index(&self, n: i64, m: i64) -> usize {
        (n - self.n_min) as usize * self.m_sites + (m - self.m_min) as usize
    }

    /// Drive frequency `ω = 2Jq` replayed by the lattice.
    pub fn omega(&self) -> f64 {
        2.0 * self.j * self.q
    }
}

/// Sparse lattice Hamiltonian, site `(n, m)` at index `(n - n_min) * m_sites + (m - m_min)`.
pub fn build_h2d(params: &Lattice2DParams) -> CsrMatrix {
    let mut trip = Vec::with_capacity(5 * params.dim());
    for n in params.n_min..=params.n_max() {
        for m in params.m_min..=params.m_max() {
            let i = params.index(n, m);
            trip.push((i, i, Complex64::new(n as f64 * params.omega0, 0.0)));
            if n < params.n_max() {
                let h = params.kappa0 * (params.q * m as f64).cos();
                let k = params.index(n + 1, m);
                trip.push((i, k, h));
                trip.push((k, i, h));
            }
            if m < params.m_max() {
                let k = params.index(n, m + 1);
                let h = Complex64::new(-params.j, 0.0);
                trip.push((i, k, h));
                trip.push((k, i, h));
            }
        }
    }
    CsrMatrix::from_triplets(params.dim(), trip)
}

#[derive(Debug, Clone, PartialEq)]
pub struct State2D {
    pub params: Lattice2DParams,
    pub amplitudes: Vec<Complex64>,
    pub time: f64,
}

impl State2D {
    pub fn get(&self, n: i64, m: i64) -> Complex64 {
        self.amplitudes[self.params.index(n, m)]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `p(n, m)` as rows over n, columns over m.
    pub fn probs(&self) -> Vec<Vec<f64>> {
        let p = &self.params;
        (0..p.n_sites)
            .map(|i| (0..p.m_sites).map(|k| self.amplitudes[i * p.m_sites + k].norm_sqr()).collect())
            .collect()
    }

    pub fn max_abs_diff(&self, other: &State2D) -> f64 {
        self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PacketKind {
    Delta,
    Gaussian,
}

/// Column profile `y(m) ∝ e^{imπ/2} e^{-m²/4}` centered at `m = 0`, normalized to unit norm.
pub fn column_profile(m: i64) -> Complex64 {
    // (2π)^{-1/4} normalizes Σ e^{-m²/2} to 1 up to exponentially small lattice corrections
    let amp = (2.0 * PI).powf(-0.25) * (-(m * m) as f64 / 4.0).exp();
    Complex64::from_polar(amp, m as f64 * PI / 2.0)
}

/// `ψ(n, m, 0) = x(n) y(m)` normalized to 1, with `x` a delta or `e^{-(n-n0)²/4}`.
pub fn initial_wavepacket(kind: PacketKind, n0: i64, params: &Lattice2DParams) -> Result<State2D> {
    if n0 - params.n_min < MIN_N_MARGIN || params.n_max() - n0 < MIN_N_MARGIN {
        return Err(Error::Window(format!(
            "launch row n0 = {n0} needs {MIN_N_MARGIN} sites of margin in n range [{}, {}]",
            params.n_min,
            params.n_max()
        )));
    }
    if -params.m_min < DEFAULT_LAUNCH_OFFSET || params.m_max() < DEFAULT_LAUNCH_OFFSET {
        return Err(Error::Window(format!(
            "packet at m = 0 needs {DEFAULT_LAUNCH_OFFSET} columns on each side, m range is [{}, {}]",
            params.m_min,
            params.m_max()
        )));
    }
    let mut amps = vec![Complex64::new(0.0, 0.0); params.dim()];
    for n in params.n_min..=params.n_max() {
        let x = match kind {
            PacketKind::Delta => {
                if n == n0 {
                    1.0
                } else {
                    0.0
                }
            }
            PacketKind::Gaussian => (-((n - n0) * (n - n0)) as f64 / 4.0).exp(),
        };
        if x == 0.0 {
            continue;
        }
        for m in params.m_min..=params.m_max() {
            amps[params.index(n, m)] = x * column_profile(m);
        }
    }
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for a in amps.iter_mut() {
        *a /= norm;
    }
    Ok(State2D { params: *params, amplitudes: amps, time: 0.0 })
}

/// `e^{-iHt} ψ` by Arnoldi sub-stepping.
pub fn evolve2d(initial: &State2D, t: f64) -> Result<(State2D, KrylovStats)> {
    evolve2d_with(initial, &build_h2d(&initial.params), t, &KrylovOptions { tol: 1e-12, ..Default::default() })
}

pub fn evolve2d_with(initial: &State2D, h: &CsrMatrix, t: f64, opts: &KrylovOptions) -> Result<(State2D, KrylovStats)> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParams(format!("t must be >= 0, got {t}")));
    }
    let (amps, stats) = expmv(|x, y| h.matvec(x, y), h.norm_inf(), &initial.amplitudes, t, opts)?;
    Ok((State2D { params: initial.params, amplitudes: amps, time: initial.time + t }, stats))
}

/// Dense matrix exponential (small lattices only), for cross-checking [`evolve2d`].
pub fn evolve2d_dense(initial: &State2D, t: f64) -> Result<State2D> {
    let dim = initial.params.dim();
    if dim > DENSE_ORACLE_MAX {
        return Err(Error::InvalidParams(format!("dense propagation limited to {DENSE_ORACLE_MAX} sites, got {dim}")));
    }
    let h = build_h2d(&initial.params).to_dense();
    let u = (h * Complex64::new(0.0, -t)).exp();
    let v = nalgebra::DVector::from_vec(initial.amplitudes.clone());
    let w = u * v;
    Ok(State2D { params: initial.params, amplitudes: w.iter().cloned().collect(), time: initial.time + t })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioId {
    I,
    Ii,
    Iii,
    Iv,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 4] = [ScenarioId::I, ScenarioId::Ii, ScenarioId::Iii, ScenarioId::Iv];

    pub fn name(&self) -> &'static str {
        match self {
            ScenarioId::I => "i",
            ScenarioId::Ii => "ii",
            ScenarioId::Iii => "iii",
            ScenarioId::Iv => "iv",
        }
    }

    /// Drive parameters in units of J.
    pub fn drive(&self) -> Drive2D {
        let (kappa0, omega, omega0, packet) = match self {
            ScenarioId::I => (Complex64::new(1.0, 0.0), 0.0, 0.5, PacketKind::Delta),
            ScenarioId::Ii => (Complex64::new(1.0, 0.0), 0.0, 0.5, PacketKind::Gaussian),
            ScenarioId::Iii => (Complex64::new(0.25, 0.0), 0.5, 0.5, PacketKind::Delta),
            ScenarioId::Iv => (Complex64::new(0.0, 0.25), 0.5, 0.5, PacketKind::Delta),
        };
        Drive2D { kappa0, omega, omega0, packet }
    }
}

/// Chain drive replayed by the lattice, in units of J.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Drive2D {
    #[serde(with = "crate::io::complex")]
    pub kappa0: Complex64,
    pub omega: f64,
    pub omega0: f64,
    pub packet: PacketKind,
}

impl std::str::FromStr for ScenarioId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "i" => Ok(ScenarioId::I),
            "ii" => Ok(ScenarioId::Ii),
            "iii" => Ok(ScenarioId::Iii),
            "iv" => Ok(ScenarioId::Iv),
            _ => Err(Error::InvalidParams(format!("unknown scenario '{s}', expected i, ii, iii or iv"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub j: f64,
    /// Sites along n (the simulated chain).
    pub n_sites: usize,
    /// Columns along m (the time axis).
    pub m_sites: usize,
    /// Columns kept behind the packet center at launch.
    pub launch_offset: i64,
    pub snapshot_times: Vec<f64>,
    pub tau: f64,
    /// Trace accumulation stops once the far-edge column holds this fraction of the total.
    pub stop_fraction: f64,
    pub krylov_tol: f64,
    /// Column range `[lo, hi]` (m, relative to the launch center) for the width exponent fit.
    pub width_fit: (f64, f64),
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            j: 1.0,
            n_sites: 30,
            m_sites: 60,
            launch_offset: DEFAULT_LAUNCH_OFFSET,
            snapshot_times: (0..5).map(|k| 2.0 * PI * k as f64).collect(),
            tau: 0.1,
            stop_fraction: 1e-4,
            krylov_tol: 1e-12,
            width_fit: (5.0, 25.0),
        }
    }
}

impl ScenarioConfig {
    pub fn lattice(&self, drive: &Drive2D) -> Result<Lattice2DParams> {
        let (k, w, w0) = (drive.kappa0, drive.omega, drive.omega0);
        if self.launch_offset < DEFAULT_LAUNCH_OFFSET {
            return Err(Error::Window(format!(
                "launch offset {} leaves more than 1e-8 of the packet amplitude at the edge (need >= {DEFAULT_LAUNCH_OFFSET})",
                self.launch_offset
            )));
        }
        Lattice2DParams::driven(
            k * self.j,
            w * self.j,
            w0 * self.j,
            self.j,
            self.n_sites,
            self.m_sites,
            -(self.n_sites as i64 / 2),
            -self.launch_offset,
        )
    }

    fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::InvalidParams("tau must be > 0".into()));
        }
        if self.snapshot_times.iter().any(|t| !(*t >= 0.0)) {
            return Err(Error::InvalidParams("snapshot times must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot2D {
    pub t: f64,
    pub probs: Vec<Vec<f64>>,
    /// False when the far-edge stop rule had already fired at this time.
    pub before_stop: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trace2D {
    /// `Σ_j p(n, m, jτ)`, rows over n.
    pub accum: Vec<Vec<f64>>,
    /// `Σ_j p(n, m, jτ) / Σ_{n,m} p(n, m, jτ)`.
    pub normalized: Vec<Vec<f64>>,
    pub tau: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepDiagnostic {
    pub t: f64,
    pub total: f64,
    pub centroid_m: f64,
    pub peak_m: f64,
    pub far_edge_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WidthFit {
    pub z: f64,
    pub stderr: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioAnalysis {
    /// Centroid displacement of the column marginal over the first 2/J, divided by the time.
    pub velocity_centroid: f64,
    /// Displacement of the marginal's maximum over the first 2/J.
    pub velocity_peak: f64,
    /// `2J e^{-1/8}`: exact centroid velocity of the launched packet on an infinite lattice.
    pub velocity_centroid_exact: f64,
    pub max_total_deviation: f64,
    pub final_total: f64,
    /// `(m, std of the n-marginal)` per sufficiently occupied trace column.
    pub widths: Vec<(f64, f64)>,
    pub width_fit: Option<WidthFit>,
    /// Period of the width oscillation along m, converted to time with v = 2J.
    pub breathing_period: Option<f64>,
    /// Reference `2π/ω0`.
    pub bloch_period: f64,
    pub stop_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioRun {
    pub label: String,
    pub drive: Drive2D,
    pub params: Lattice2DParams,
    pub config: ScenarioConfig,
    pub snapshots: Vec<Snapshot2D>,
    pub trace: Trace2D,
    pub diagnostics: Vec<StepDiagnostic>,
    pub analysis: ScenarioAnalysis,
    pub krylov_substeps: usize,
}

fn column_marginal(state: &State2D) -> Vec<f64> {
    let p = &state.params;
    let mut col = vec![0.0; p.m_sites];
    for i in 0..p.n_sites {
        for (k, c) in col.iter_mut().enumerate() {
            *c += state.amplitudes[i * p.m_sites + k].norm_sqr();
        }
    }
    col
}

fn diagnose(state: &State2D) -> StepDiagnostic {
    let p = &state.params;
    let col = column_marginal(state);
    let total: f64 = col.iter().sum();
    let centroid = col.iter().enumerate().map(|(k, c)| (p.m_min + k as i64) as f64 * c).sum::<f64>() / total;
    let kmax = col.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map_or(0, |x| x.0);
    let mut peak = kmax as f64;
    if kmax >= 1 && kmax + 1 < col.len() {
        let (a, b, c) = (col[kmax - 1], col[kmax], col[kmax + 1]);
        let den = a - 2.0 * b + c;
        if den < 0.0 {
            peak += 0.5 * (a - c) / den;
        }
    }
    StepDiagnostic {
        t: state.time,
        total,
        centroid_m: centroid,
        peak_m: p.m_min as f64 + peak,
        far_edge_fraction: col[col.len() - 1] / total,
    }
}

/// Standard deviation over n of each column of `trace`, for columns holding
/// more than 1% of the largest column mass.
pub fn column_widths(trace: &[Vec<f64>], params: &Lattice2DParams) -> Vec<(f64, f64)> {
    let masses: Vec<f64> = (0..params.m_sites).map(|k| trace.iter().map(|r| r[k]).sum()).collect();
    let max_mass = masses.iter().cloned().fold(0.0, f64::max);
    (0..params.m_sites)
        .filter(|&k| masses[k] > 0.01 * max_mass)
        .map(|k| {
            let w = masses[k];
            let mean = trace.iter().enumerate().map(|(i, r)| (params.n_min + i as i64) as f64 * r[k]).sum::<f64>() / w;
            let var = trace
                .iter()
                .enumerate()
                .map(|(i, r)| ((params.n_min + i as i64) as f64 - mean).powi(2) * r[k])
                .sum::<f64>()
                / w;
            ((params.m_min + k as i64) as f64, var.sqrt())
        })
        .collect()
}

/// Mean spacing between successive local maxima of `widths` (in m), at least two needed.
pub fn breathing_period_m(widths: &[(f64, f64)]) -> Option<f64> {
    let mut peaks = Vec::new();
    for k in 1..widths.len().saturating_sub(1) {
        let (a, b, c) = (widths[k - 1].1, widths[k].1, widths[k + 1].1);
        // contiguous columns only
        if widths[k + 1].0 - widths[k - 1].0 != 2.0 {
            continue;
        }
        if b > a && b >= c {
            let den = a - 2.0 * b + c;
            let off = if den < 0.0 { 0.5 * (a - c) / den } else { 0.0 };
            peaks.push(widths[k].0 + off);
        }
    }
    if peaks.len() < 2 {
        return None;
    }
    Some((peaks[peaks.len() - 1] - peaks[0]) / (peaks.len() - 1) as f64)
}

/// Runs one scenario: trace accumulation every `tau` until the far-edge rule
/// fires, plus snapshots at the requested times.
pub fn run_scenario(id: ScenarioId, config: &ScenarioConfig) -> Result<ScenarioRun> {
    run_drive(id.name(), &id.drive(), config)
}

/// [`run_scenario`] for arbitrary drive parameters.
pub fn run_drive(label: &str, drive: &Drive2D, config: &ScenarioConfig) -> Result<ScenarioRun> {
    config.validate()?;
    let params = config.lattice(drive)?;
    let initial = initial_wavepacket(drive.packet, 0, &params)?;
    let h = build_h2d(&params);
    let opts = KrylovOptions { tol: config.krylov_tol, ..Default::default() };
    let tau = config.tau / config.j;
    let t_end_snap = config.snapshot_times.iter().cloned().fold(0.0, f64::max) / config.j;

    let zeros = vec![vec![0.0; params.m_sites]; params.n_sites];
    let mut trace = Trace2D { accum: zeros.clone(), normalized: zeros, tau, count: 0 };
    let mut diagnostics = vec![diagnose(&initial)];
    let mut snapshots = Vec::new();
    let mut snap_times: Vec<f64> = config.snapshot_times.iter().map(|t| t / config.j).collect();
    snap_times.sort_by(f64::total_cmp);
    let mut next_snap = 0usize;
    let mut substeps = 0usize;
    let mut state = initial.clone();
    let mut stopped = false;
    let mut stop_time = 0.0;
    let mut j = 0usize;

    loop {
        // snapshots falling inside [t_j, t_j + tau)
        let t_now = j as f64 * tau;
        while next_snap < snap_times.len() && snap_times[next_snap] < t_now + tau - 1e-12 {
            let ts = snap_times[next_snap];
            let s = if (ts - t_now).abs() <= 1e-12 {
                state.clone()
            } else {
                let (s, st) = evolve2d_with(&state, &h, ts - state.time, &opts)?;
                substeps += st.substeps;
                s
            };
            snapshots.push(Snapshot2D { t: ts, probs: s.probs(), before_stop: !stopped });
            next_snap += 1;
        }
        if stopped && next_snap >= snap_times.len() {
            break;
        }
        if !stopped && t_now >= t_end_snap.max(200.0 / config.j) {
            break;
        }
        let target = (j + 1) as f64 * tau;
        // resume from the last trace state; snapshot states are side branches
        let (s, st) = evolve2d_with(&state, &h, target - state.time, &opts)?;
        substeps += st.substeps;
        state = s;
        state.time = target;
        j += 1;
        if !stopped {
            let d = diagnose(&state);
            let probs = state.probs();
            for (acc, (nrm, row)) in trace.accum.iter_mut().zip(trace.normalized.iter_mut().zip(&probs)) {
                for k in 0..row.len() {
                    acc[k] += row[k];
                    nrm[k] += row[k] / d.total;
                }
            }
            trace.count += 1;
            stop_time = target;
            if d.far_edge_fraction > config.stop_fraction {
                stopped = true;
            }
            diagnostics.push(d);
        }
    }

    let analysis = analyse(&params, config, &diagnostics, &trace, stop_time);
    Ok(ScenarioRun { label: label.to_string(), drive: *drive, params, config: config.clone(), snapshots, trace, diagnostics, analysis, krylov_substeps: substeps })
}

fn analyse(params: &Lattice2DParams, config: &ScenarioConfig, diags: &[StepDiagnostic], trace: &Trace2D, stop_time: f64) -> ScenarioAnalysis {
    let t_v = 2.0 / config.j;
    let d0 = &diags[0];
    let dv = diags.iter().min_by(|a, b| (a.t - t_v).abs().total_cmp(&(b.t - t_v).abs())).unwrap_or(d0);
    let dt = if dv.t > 0.0 { dv.t } else { f64::NAN };
    let widths = column_widths(&trace.normalized, params);
    let (lo, hi) = config.width_fit;
    let pts: Vec<(f64, f64)> = widths.iter().cloned().filter(|&(m, _)| m >= lo && m <= hi).collect();
    let width_fit = loglog_fit(&pts).ok().map(|(z, stderr, _)| WidthFit { z, stderr, samples: pts.len() });
    let v = 2.0 * params.j;
    ScenarioAnalysis {
        velocity_centroid: (dv.centroid_m - d0.centroid_m) / dt,
        velocity_peak: (dv.peak_m - d0.peak_m) / dt,
        velocity_centroid_exact: v * (-0.125f64).exp(),
        max_total_deviation: diags.iter().map(|d| (d.total - 1.0).abs()).fold(0.0, f64::max),
        final_total: diags.last().map_or(1.0, |d| d.total),
        breathing_period: breathing_period_m(&widths).map(|p| p / v),
        bloch_period: 2.0 * PI / params.omega0,
        widths,
        width_fit,
        stop_time,
    }
}

/// All four scenarios, run concurrently.
pub fn run_all_scenarios(config: &ScenarioConfig) -> Result<Vec<ScenarioRun>> {
    run_scenarios_with(Exec::default(), &ScenarioId::ALL, config)
}

pub fn run_scenarios_with(exec: Exec, ids: &[ScenarioId], config: &ScenarioConfig) -> Result<Vec<ScenarioRun>> {
    par::try_map_indexed(exec, ids.len(), |k| run_scenario(ids[k], config))
}

/// Rows over n, columns over m.
pub fn matrix_csv(rows: &[Vec<f64>]) -> String {
    io::csv_matrix(rows)
}
