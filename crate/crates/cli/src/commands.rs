//! Subcommand implementations.

use std::io;
use std::path::PathBuf;

use gausstopo::algebra::{default_ep_tol, eigensystem, pauli_decompose, PauliForm};
use gausstopo::dynamics::{
    evolve_bloch_ode, evolve_propagator, evolve_realspace_oracle, evolve_spectral, initial_state, CorrelationField, DynamicsError,
    InitialStateSpec, PropagatorEngine,
};
use gausstopo::model::{bloch_blocks, build_ssh_model, from_bloch, kgrid, pt_classify, pt_label, to_bloch, BlochBlock, ModelError};
use gausstopo::phasemap::{dynamics_frame, sweep, Axis, PhaseError, ScanSettings};
use gausstopo::topology::{check_chiral, correlation_from_modular, modular_from_correlation, nk_nc_antiparallel_check, transition_scan, TopologyError};
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::output::{stamped, write_json, write_table, Cell, Provenance, Table};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Compute(String),
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("validation failed: {0}")]
    ValidationFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Compute(_) => 2,
            CliError::ValidationFailed(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

macro_rules! compute_errors {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Compute(e.to_string())
            }
        }
    )*};
}
compute_errors!(ModelError, DynamicsError, TopologyError, PhaseError);

fn blocks(cfg: &RunConfig, n_k: usize) -> Result<Vec<BlochBlock>, CliError> {
    let m = &cfg.model;
    Ok(bloch_blocks(&build_ssh_model(m.u, m.w, m.lambda, m.cells)?, n_k)?)
}

fn spec(cfg: &RunConfig) -> Result<InitialStateSpec, CliError> {
    Ok(InitialStateSpec::new(cfg.initial.a, cfg.initial.b)?)
}

/// Initial field, with the upper occupation replaced when an override is set.
fn initial_field(cfg: &RunConfig, n_k: usize) -> Result<CorrelationField, CliError> {
    let mut c0 = initial_state(&spec(cfg)?, &kgrid(n_k));
    if let Some(upper) = cfg.initial.eigenvalue_override {
        for b in c0.blocks.iter_mut() {
            let p = pauli_decompose(b);
            let (alpha, n) = (p.alpha.re, p.n_re());
            let r = n.iter().map(|x| x * x).sum::<f64>().sqrt();
            let dir = if r > 0.0 { n.map(|x| x / r) } else { [0.0, 0.0, 1.0] };
            let lower = alpha - r;
            let half = 0.5 * (upper - lower);
            *b = PauliForm::real(0.5 * (upper + lower), dir.map(|x| x * half)).compose();
        }
    }
    Ok(c0)
}

fn settings(cfg: &RunConfig) -> ScanSettings {
    ScanSettings {
        n_k: cfg.grid.n_k,
        t_max: cfg.grid.t_max,
        n_samples: cfg.grid.n_samples,
        ep_tol: cfg.tolerances.ep_tol,
        gap_tol: cfg.tolerances.gap_tol,
    }
}

pub fn spectrum(cfg: &RunConfig, prov: &Provenance) -> Result<Vec<PathBuf>, CliError> {
    let blocks = blocks(cfg, cfg.grid.n_k)?;
    let rows = blocks
        .iter()
        .map(|b| {
            let [plus, minus] = b.eigenvalues();
            vec![
                Cell::Num(b.k),
                Cell::Num(plus.re),
                Cell::Num(plus.im),
                Cell::Num(minus.re),
                Cell::Num(minus.im),
                Cell::Text(pt_label(b, cfg.tolerances.ep_tol).as_str().into()),
            ]
        })
        .collect();
    let table = Table { columns: vec!["k", "re_eps_plus", "im_eps_plus", "re_eps_minus", "im_eps_minus", "pt_label"], rows };
    Ok(vec![write_table(&cfg.output.directory, "spectrum", &table, prov, cfg.output.format)?])
}

pub fn trace(cfg: &RunConfig, prov: &Provenance) -> Result<Vec<PathBuf>, CliError> {
    let n_k = cfg.grid.n_k;
    let blocks = blocks(cfg, n_k)?;
    let c0 = initial_field(cfg, n_k)?;
    let frame = dynamics_frame(&blocks, &spec(cfg)?)?;
    let trace = transition_scan(&blocks, &c0, &frame, cfg.grid.t_max, cfg.grid.n_samples, cfg.tolerances.gap_tol)?;
    let engine = PropagatorEngine::new(&blocks, &c0)?;

    let rows = trace
        .times
        .iter()
        .zip(&trace.nu)
        .zip(&trace.min_planar_amplitude)
        .map(|((&t, nu), &amp)| {
            vec![Cell::Num(t), nu.map_or(Cell::Empty, Cell::Int), Cell::Num(amp), Cell::Num(engine.at(t).total_occupation())]
        })
        .collect();
    let table = Table { columns: vec!["t", "nu", "min_planar_amplitude", "total_occupation"], rows };
    let csv = write_table(&cfg.output.directory, "trace", &table, prov, cfg.output.format)?;

    let transitions = json!({
        "pt_phase": pt_classify(&blocks, cfg.tolerances.ep_tol).global.as_str(),
        "chiral_axis": frame.n_gamma.map(|x| x + 0.0),
        "initial_nu": trace.nu.first().copied().flatten(),
        "final_nu": trace.final_nu(),
        "transitions": trace.transitions,
    });
    let sidecar = write_json(&cfg.output.directory, "transitions.json", &stamped(transitions, prov))?;
    Ok(vec![csv, sidecar])
}

pub fn phase_diagram(cfg: &RunConfig, prov: &Provenance) -> Result<Vec<PathBuf>, CliError> {
    let s = &cfg.sweep;
    let u_axis = Axis::new(s.u_min, s.u_max, s.u_steps).map_err(|e| ConfigError::Invalid(format!("sweep u axis: {e}")))?;
    let w_axis = Axis::new(s.w_min, s.w_max, s.w_steps).map_err(|e| ConfigError::Invalid(format!("sweep w axis: {e}")))?;
    let result = sweep(u_axis, w_axis, cfg.model.lambda, &spec(cfg)?, &settings(cfg))?;

    let rows = result
        .points
        .iter()
        .map(|p| {
            vec![
                Cell::Num(p.u),
                Cell::Num(p.w),
                Cell::Text(p.label.pt_part.as_str().into()),
                Cell::Text(p.label.region.as_str().into()),
                Cell::Int(p.n_transitions() as i64),
                p.first_transition_time().into(),
            ]
        })
        .collect();
    let table = Table { columns: vec!["u", "w", "pt_part", "region", "n_transitions", "first_transition_time"], rows };
    let csv = write_table(&cfg.output.directory, "phase_diagram", &table, prov, cfg.output.format)?;

    let points: Vec<Value> = result
        .points
        .iter()
        .map(|p| json!({ "u": p.u, "w": p.w, "label": p.label, "transition_times": p.transition_times }))
        .collect();
    let meta = json!({ "metadata": result.metadata, "points": points });
    let sidecar = write_json(&cfg.output.directory, "phase_diagram.meta.json", &stamped(meta, prov))?;
    Ok(vec![csv, sidecar])
}

/// Outcome of one validation check.
struct Check {
    name: &'static str,
    max_discrepancy: Option<f64>,
    status: &'static str,
    reason: Option<String>,
}

impl Check {
    fn measured(name: &'static str, value: f64, tol: f64) -> Self {
        let status = if value <= tol { "pass" } else { "fail" };
        Check { name, max_discrepancy: Some(value), status, reason: None }
    }

    fn skipped(name: &'static str, reason: &str) -> Self {
        Check { name, max_discrepancy: None, status: "skipped", reason: Some(reason.into()) }
    }

    fn error(name: &'static str, reason: String) -> Self {
        Check { name, max_discrepancy: None, status: "error", reason: Some(reason) }
    }

    fn from_result(name: &'static str, r: Result<f64, String>, tol: f64) -> Self {
        match r {
            Ok(v) => Check::measured(name, v, tol),
            Err(e) => Check::error(name, e),
        }
    }

    fn failed(&self) -> bool {
        matches!(self.status, "fail" | "error")
    }

    fn to_json(&self) -> Value {
        json!({ "name": self.name, "max_discrepancy": self.max_discrepancy, "status": self.status, "reason": self.reason })
    }
}

fn max_block_diff(a: &CorrelationField, b: &CorrelationField) -> f64 {
    a.blocks.iter().zip(&b.blocks).map(|(x, y)| x.max_abs_diff(y)).fold(0.0, f64::max)
}

fn max_over_times(times: &[f64], mut f: impl FnMut(f64) -> Result<f64, String>) -> Result<f64, String> {
    times.iter().try_fold(0.0f64, |acc, &t| Ok(acc.max(f(t)?)))
}

pub fn validate(cfg: &RunConfig, prov: &Provenance) -> Result<Vec<PathBuf>, CliError> {
    let tol = cfg.tolerances.engine_tol;
    let n_k = cfg.grid.n_k;
    let times = &cfg.validate.times;
    let blocks = blocks(cfg, n_k)?;
    let c0 = initial_field(cfg, n_k)?;
    let engine = PropagatorEngine::new(&blocks, &c0)?;
    let frame = dynamics_frame(&blocks, &spec(cfg)?)?;
    let mut checks = Vec::new();

    let defective = blocks.iter().any(|b| eigensystem(&b.x_tilde, default_ep_tol(&b.x_tilde)).defective);
    checks.push(if defective {
        Check::skipped("propagator_vs_spectral", "defective")
    } else {
        let r = max_over_times(times, |t| Ok(max_block_diff(&engine.at(t), &evolve_spectral(&blocks, &c0, t).map_err(|e| e.to_string())?)));
        Check::from_result("propagator_vs_spectral", r, tol)
    });

    let ode = evolve_bloch_ode(&blocks, &c0, times, cfg.validate.ode_dt_max)
        .map(|traj| traj.times.iter().zip(&traj.fields).map(|(&t, f)| max_block_diff(&engine.at(t), f)).fold(0.0, f64::max))
        .map_err(|e| e.to_string());
    checks.push(Check::from_result("propagator_vs_ode", ode, tol));

    let cells = cfg.model.cells.max(8);
    let real = (|| -> Result<f64, String> {
        let m = &cfg.model;
        let model = build_ssh_model(m.u, m.w, m.lambda, cells).map_err(|e| e.to_string())?;
        let small_blocks = bloch_blocks(&model, cells).map_err(|e| e.to_string())?;
        let small_c0 = initial_field(cfg, cells).map_err(|e| e.to_string())?;
        let c_real = from_bloch(&small_c0.blocks).transpose();
        max_over_times(times, |t| {
            let k_space = evolve_propagator(&small_blocks, &small_c0, t).map_err(|e| e.to_string())?;
            let evolved = evolve_realspace_oracle(&model, &c_real, t).map_err(|e| e.to_string())?;
            let via_real = to_bloch(&evolved.transpose(), cells);
            Ok(k_space.blocks.iter().zip(&via_real).map(|(x, y)| x.max_abs_diff(y)).fold(0.0, f64::max))
        })
    })();
    checks.push(Check::from_result("kspace_vs_realspace", real, tol));

    let round_trip = max_over_times(times, |t| {
        let c = engine.at(t);
        let k = modular_from_correlation(&c).map_err(|e| e.to_string())?;
        Ok(max_block_diff(&c, &correlation_from_modular(&k)))
    });
    checks.push(Check::from_result("correlation_modular_round_trip", round_trip, tol));

    let chiral = max_over_times(times, |t| Ok(check_chiral(&engine.at(t), &frame, tol).max_axis_component));
    checks.push(Check::from_result("chiral_plane_deviation", chiral, tol));

    let angle = max_over_times(times, |t| Ok(nk_nc_antiparallel_check(&engine.at(t)).map_err(|e| e.to_string())?.max_angle));
    checks.push(Check::from_result("nk_nc_angle", angle, tol));

    let failed: Vec<&str> = checks.iter().filter(|c| c.failed()).map(|c| c.name).collect();
    let report = json!({
        "engine_tol": tol,
        "times": times,
        "passed": failed.is_empty(),
        "checks": checks.iter().map(Check::to_json).collect::<Vec<_>>(),
    });
    let path = write_json(&cfg.output.directory, "validate.json", &stamped(report, prov))?;
    if failed.is_empty() {
        Ok(vec![path])
    } else {
        Err(CliError::ValidationFailed(format!("{} (report in {})", failed.join(", "), path.display())))
    }
}
