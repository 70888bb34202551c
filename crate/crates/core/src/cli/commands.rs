//! The five subcommands. Each writes its CSV files into the sink and returns
//! the content of `report.json`.

use std::f64::consts::PI;

use serde_json::{json, Value};

use super::config::{merge, CommandKind, preset, set_path, BlochConfig, Engine, ExponentConfig, Sim2dConfig, SpectrumConfig, SweepConfig};
use super::manifest::OutputSink;
use super::{execute, CliError};
use crate::exponent::{fit_exponent, spread_series, MIN_FIT_SAMPLES};
use crate::integrator::{check_margin, propagate, step_count, IntegratorConfig, Scheme};
use crate::io;
use crate::lattice2d::{matrix_csv, run_drive, ScenarioRun};
use crate::model::{ChainParams, StateVector};
use crate::par::{self, Exec};
use crate::propagator::{evolve_analytic_checked, uniform_grid, BlochTrajectory};
use crate::spectrum::{default_ladder_window, finite_chain_spectrum_windowed};

pub fn spectrum(cfg: &SpectrumConfig, sink: &mut OutputSink) -> Result<Value, CliError> {
    let sizes = cfg.sizes()?;
    let base = ChainParams::centered(cfg.kappa0, cfg.omega, cfg.omega0, 1)?;
    let reports = par::try_map_indexed(Exec::default(), sizes.len(), |k| {
        let n = sizes[k];
        let window = cfg.ladder_window.unwrap_or_else(|| default_ladder_window(n)).min(n);
        finite_chain_spectrum_windowed(n, &base, cfg.t, window)
    })?;
    let mut summary = Vec::with_capacity(reports.len());
    for r in &reports {
        let csv = io::csv_table(
            &["index".to_string(), "re".to_string(), "im".to_string()],
            r.eigenvalues.iter().enumerate().map(|(i, e)| vec![i as f64, e.re, e.im]),
        );
        sink.write(&format!("spectrum_N{}.csv", r.n), csv.as_bytes())?;
        summary.push(json!({
            "N": r.n,
            "ladder_window": r.ladder_window,
            "max_imag": r.max_imag,
            "max_spacing_dev": r.max_spacing_dev,
            "real_ladder_len": r.real_ladder_len,
        }));
    }
    let grows = |f: fn(&crate::spectrum::SpectrumReport) -> usize| {
        let mut rs: Vec<_> = reports.iter().collect();
        rs.sort_by_key(|r| r.n);
        rs.windows(2).all(|w| f(w[1]) >= f(w[0]))
    };
    Ok(json!({
        "sizes": summary,
        "ladder_window_monotone": grows(|r| r.ladder_window),
        "real_ladder_len_monotone": grows(|r| r.real_ladder_len),
    }))
}

/// Fills `dt` and `half_width` so the manifest records the values actually used.
pub fn resolve_bloch(cfg: &mut BlochConfig) -> Result<(), CliError> {
    if cfg.engine == Engine::Analytic && cfg.omega != 0.0 {
        return Err(CliError::Validation(format!(
            "engine: `analytic` needs a static drive (omega = 0), got omega = {}",
            cfg.omega
        )));
    }
    if !(cfg.omega0 > 0.0) {
        return Err(CliError::Validation(format!("omega0: must be > 0, got {}", cfg.omega0)));
    }
    if !(cfg.t_final > 0.0) {
        return Err(CliError::Validation(format!("t_final: must be > 0, got {}", cfg.t_final)));
    }
    if cfg.samples < 2 {
        return Err(CliError::Validation("samples: need at least 2".into()));
    }
    let spread = 4.0 * cfg.kappa0.norm() / cfg.omega0;
    cfg.dt.get_or_insert(2.0 * PI / (1000.0 * cfg.omega0));
    cfg.half_width.get_or_insert(match cfg.engine {
        // static chain: the propagator never reaches beyond 4|κ|/ω0 sites plus the Bessel tail
        Engine::Analytic => spread.ceil() as i64 + 40,
        Engine::Numeric => (spread * cfg.t_final).ceil() as i64 + 40,
    });
    Ok(())
}

fn bloch_states(cfg: &BlochConfig, params: &ChainParams, init: &StateVector) -> Result<(Vec<StateVector>, Option<usize>), CliError> {
    match cfg.engine {
        Engine::Analytic => {
            let grid = uniform_grid(0.0, cfg.t_final, cfg.samples);
            let states = par::try_map_indexed(Exec::default(), grid.len(), |k| {
                evolve_analytic_checked(init, grid[k], params.kappa0, params.omega0, cfg.leak_threshold)
            })?;
            Ok((states, None))
        }
        Engine::Numeric => {
            let icfg = IntegratorConfig {
                dt: cfg.dt.unwrap_or(2.0 * PI / (1000.0 * cfg.omega0)),
                scheme: Scheme::MidpointExponential,
                taylor_tol: cfg.taylor_tol,
                leak_threshold: cfg.leak_threshold,
                record_every: 1,
            };
            icfg.validate(params)?;
            check_margin(init, params, cfg.t_final)?;
            let steps = step_count(cfg.t_final, icfg.dt);
            let stride = ((steps as f64 / (cfg.samples - 1) as f64).round() as usize).max(1);
            let dt = cfg.t_final / steps as f64;
            let mut states = vec![init.clone()];
            let mut done = 0;
            while done < steps {
                let chunk = stride.min(steps - done);
                let last = states.last().expect("non-empty");
                let mut next = propagate(last, params, chunk as f64 * dt, chunk, &icfg)?;
                done += chunk;
                next.time = if done == steps { cfg.t_final } else { done as f64 * dt };
                states.push(next);
            }
            Ok((states, Some(steps)))
        }
    }
}

pub fn bloch(cfg: &BlochConfig, sink: &mut OutputSink) -> Result<Value, CliError> {
    let half = cfg.half_width.unwrap_or(0);
    let params = ChainParams::new(cfg.kappa0, cfg.omega, cfg.omega0, cfg.initial - half, cfg.initial + half)?;
    let init = StateVector::site(&params, cfg.initial)?;
    let (states, steps) = bloch_states(cfg, &params, &init)?;
    let traj = BlochTrajectory::from_states(&states);

    sink.write("trajectory.csv", traj.to_csv().as_bytes())?;
    sink.write("trajectory_rescaled.csv", traj.to_csv_rescaled().as_bytes())?;
    let ln_total = io::csv_table(
        &["t".to_string(), "ln_P".to_string()],
        traj.times.iter().zip(&traj.totals).map(|(&t, &p)| vec![t, p.ln()]),
    );
    sink.write("ln_total.csv", ln_total.as_bytes())?;
    if cfg.amplitudes {
        let mut header = vec!["t".to_string()];
        for n in params.n_min..=params.n_max {
            header.push(format!("re_{n}"));
            header.push(format!("im_{n}"));
        }
        let csv = io::csv_table(
            &header,
            states.iter().map(|s| {
                let mut row = vec![s.time];
                row.extend(s.amplitudes.iter().flat_map(|a| [a.re, a.im]));
                row
            }),
        );
        sink.write("amplitudes.csv", csv.as_bytes())?;
    }

    let first = &traj.rescaled[0];
    let last = traj.rescaled.last().expect("at least two samples");
    let return_l1: f64 = first.iter().zip(last).map(|(a, b)| (a - b).abs()).sum();
    Ok(json!({
        "engine": cfg.engine,
        "n_min": params.n_min,
        "n_max": params.n_max,
        "samples": traj.times.len(),
        "steps": steps,
        "P_min": traj.totals.iter().cloned().fold(f64::INFINITY, f64::min),
        "P_max": traj.totals.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        "P_final": traj.totals.last(),
        "max_leak": traj.max_leak,
        "final_rescaled_l1_to_initial": return_l1,
    }))
}

pub fn exponent(cfg: &ExponentConfig, sink: &mut OutputSink) -> Result<Value, CliError> {
    let (lo, hi) = cfg.t_window;
    if !(lo > 0.0 && hi > lo) {
        return Err(CliError::Validation(format!("t_window: need 0 < lo < hi, got [{lo}, {hi}]")));
    }
    if cfg.samples < MIN_FIT_SAMPLES {
        return Err(CliError::Validation(format!("samples: need at least {MIN_FIT_SAMPLES}, got {}", cfg.samples)));
    }
    let method = cfg.method.resolve(cfg.kappa0);
    let times = uniform_grid(lo, hi, cfg.samples);
    let series = spread_series(cfg.kappa0, &times, method)?;
    let fit = fit_exponent(&series, cfg.t_window)?;
    sink.write("spread.csv", series.to_csv().as_bytes())?;
    Ok(json!({
        "method": method,
        "fit": fit,
        "monotonicity_violations": series.monotonicity_violations,
    }))
}

fn scenario_files(run: &ScenarioRun, sink: &mut OutputSink) -> Result<(), CliError> {
    let id = &run.label;
    for s in &run.snapshots {
        sink.write(&format!("scenario_{id}_snapshot_{:.4}.csv", s.t), matrix_csv(&s.probs).as_bytes())?;
    }
    sink.write(&format!("scenario_{id}_trace.csv"), matrix_csv(&run.trace.accum).as_bytes())?;
    sink.write(&format!("scenario_{id}_trace_normalized.csv"), matrix_csv(&run.trace.normalized).as_bytes())?;
    let diag = io::csv_table(
        &["t", "total", "centroid_m", "peak_m", "far_edge_fraction"].map(String::from),
        run.diagnostics.iter().map(|d| vec![d.t, d.total, d.centroid_m, d.peak_m, d.far_edge_fraction]),
    );
    sink.write(&format!("scenario_{id}_diagnostics.csv"), diag.as_bytes())?;
    sink.write_json(
        &format!("scenario_{id}.json"),
        &json!({
            "label": run.label,
            "drive": run.drive,
            "lattice": run.params,
            "config": run.config,
            "rows": format!("n = {}..={}", run.params.n_min, run.params.n_max()),
            "columns": format!("m = {}..={}", run.params.m_min, run.params.m_max()),
            "snapshots": run.snapshots.iter().map(|s| json!({ "t": s.t, "before_stop": s.before_stop })).collect::<Vec<_>>(),
            "trace_samples": run.trace.count,
            "tau": run.trace.tau,
            "krylov_substeps": run.krylov_substeps,
        }),
    )
}

pub fn sim2d(cfg: &Sim2dConfig, sink: &mut OutputSink) -> Result<Value, CliError> {
    let drives = cfg.drives()?;
    let sc = cfg.scenario_config();
    let runs = par::try_map_indexed(Exec::default(), drives.len(), |k| run_drive(&drives[k].0, &drives[k].1, &sc))?;
    let mut reports = Vec::with_capacity(runs.len());
    for run in &runs {
        scenario_files(run, sink)?;
        reports.push(json!({ "label": run.label, "analysis": run.analysis }));
    }
    Ok(json!({ "scenarios": reports }))
}

/// Runs every grid point into `point_<k>/`; failures are collected, not fatal.
/// Returns the report and, if any point failed, the aggregate error.
pub fn sweep(cfg: &SweepConfig, sink: &mut OutputSink) -> Result<(Value, Option<CliError>), CliError> {
    cfg.validate()?;
    let mut base = Value::Object(Default::default());
    if let Some(name) = &cfg.preset {
        if cfg.command != CommandKind::Bloch {
            return Err(CliError::Validation("preset: presets apply to `bloch` sweeps only".into()));
        }
        merge(&mut base, preset(name).ok_or_else(|| CliError::Validation(format!("preset: unknown preset '{name}'")))?);
    }
    merge(&mut base, cfg.base.clone());
    let grid = cfg.grid();
    let dir = sink.dir().to_path_buf();
    let results = par::map_indexed(Exec::default(), grid.len(), |k| {
        let mut v = base.clone();
        for (path, value) in &grid[k] {
            set_path(&mut v, path, value.clone())?;
        }
        let point_dir = dir.join(format!("point_{k:03}"));
        let entries = execute(cfg.command, v, &point_dir)?;
        let report = std::fs::read(point_dir.join("report.json"))
            .ok()
            .and_then(|b| serde_json::from_slice::<Value>(&b).ok())
            .unwrap_or(Value::Null);
        Ok::<_, CliError>((entries, report))
    });

    let mut points = Vec::with_capacity(grid.len());
    let mut failed = 0;
    let mut numerical = false;
    for (k, (assign, res)) in grid.iter().zip(results).enumerate() {
        let name = format!("point_{k:03}");
        let values: serde_json::Map<String, Value> = assign.iter().cloned().collect();
        match res {
            Ok((entries, report)) => {
                sink.extend(&name, entries);
                points.push(json!({ "dir": name, "values": values, "status": "ok", "report": report }));
            }
            Err(e) => {
                failed += 1;
                numerical |= e.exit_code() == super::EXIT_NUMERICAL;
                points.push(json!({ "dir": name, "values": values, "status": "error", "exit_code": e.exit_code(), "error": e.to_string() }));
            }
        }
    }
    let index = json!({ "command": cfg.command, "points": points, "failed": failed });
    sink.write_json("index.json", &index)?;
    let deferred = (failed > 0).then_some(CliError::Sweep { failed, total: grid.len(), numerical });
    Ok((json!({ "points": grid.len(), "failed": failed }), deferred))
}
