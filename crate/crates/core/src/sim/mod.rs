//! Scenario configuration, closed-loop integration, sweeps and trace output.

pub mod closed_loop;
pub mod config;
pub mod integrator;
pub mod plot;
pub mod sweep;
pub mod trace;

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use nalgebra::{Vector2, Vector3};

pub use closed_loop::{run_closed_loop, RunOptions, RunOutput, Snapshot};
pub use config::{Mode, Scenario, ScenarioConfig};
pub use sweep::{epsilon_sweep, SweepReport};
pub use trace::{read_trace_csv, write_trace_csv, Summary, TraceRow, TRACE_COLUMNS};

use crate::error::{Error, Result};
use crate::excitation::{boundary_layer_sim, certify, BoundaryLayerSetup, BoundaryLayerTrajectory, CertificateInputs, GramianReport};

/// Validates and runs a closed-loop scenario.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutput> {
    run_closed_loop(&cfg.resolve()?, RunOptions::default())
}

/// Result of [`simulate`], depending on the configured mode.
#[derive(Debug, Clone)]
pub enum Outcome {
    ClosedLoop(RunOutput),
    BoundaryLayer(BoundaryLayerTrajectory),
}

pub fn simulate(cfg: &ScenarioConfig) -> Result<Outcome> {
    match cfg.mode {
        Mode::BoundaryLayer => run_boundary_layer(cfg).map(Outcome::BoundaryLayer),
        _ => run_scenario(cfg).map(Outcome::ClosedLoop),
    }
}

/// Boundary-layer setup from the configured gains: `κ`s from the `ε`
/// scaling, `w(0) = (W, 0)`.
pub fn boundary_layer_setup(cfg: &ScenarioConfig) -> Result<BoundaryLayerSetup> {
    let gains = cfg.gains.resolve(&cfg.plant)?;
    let scaling = gains.fast_scaling(cfg.plant.inductance);
    let bl = &cfg.boundary_layer;
    if !(bl.windows > 0.0 && bl.step > 0.0 && bl.record_every > 0) {
        return Err(Error::Config("boundary_layer needs positive windows, step and record_every".into()));
    }
    Ok(BoundaryLayerSetup {
        w0: Vector2::new(cfg.injection, 0.0),
        iq: bl.iq,
        kappa_e: scaling.kappa_e,
        kappa_p: scaling.kappa_p,
        kappa_z: scaling.kappa_z,
        e0: Vector2::from(bl.e0),
        i_tilde0: Vector2::from(bl.i_tilde0),
        z0: Vector3::from(bl.z0),
        horizon: bl.windows * 2.0 * PI,
        step: bl.step,
        record_every: bl.record_every,
    })
}

pub fn run_boundary_layer(cfg: &ScenarioConfig) -> Result<BoundaryLayerTrajectory> {
    boundary_layer_sim(&boundary_layer_setup(cfg)?)
}

/// Certificate inputs for a scenario: `I*` from the torque clamp, the fast
/// error at `t = 0` from the initial observer state.
pub fn certificate_inputs(cfg: &ScenarioConfig) -> Result<CertificateInputs> {
    let sc = cfg.resolve()?;
    let scaling = sc.gains.fast_scaling(sc.plant.inductance);
    let x0 = closed_loop::initial_state(&sc)?;
    let frame = x0.rot[1];
    let i_frame = frame.rotate_back(&Vector2::new(x0.flat[0], x0.flat[1]));
    let estimate = Vector2::new(x0.flat[4], x0.flat[5]);
    let a = &cfg.analysis;
    Ok(CertificateInputs {
        injection: cfg.injection,
        i_star: cfg.i_star(),
        rho: a.rho,
        kappa_e: scaling.kappa_e,
        kappa_p: scaling.kappa_p,
        kappa_z: scaling.kappa_z,
        e0: estimate - Vector2::new(cfg.injection, 0.0),
        i_tilde0: i_frame - estimate,
        a2f: a.a2f,
        delta: a.delta,
        windows: a.windows,
        step: a.delta / 2048.0,
    })
}

pub fn analyze_config(cfg: &ScenarioConfig) -> Result<GramianReport> {
    certify(&certificate_inputs(cfg)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TraceFormat {
    #[default]
    Csv,
    Svg,
}

impl std::str::FromStr for TraceFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(TraceFormat::Csv),
            "svg" => Ok(TraceFormat::Svg),
            other => Err(Error::Config(format!("unknown trace format '{other}' (expected csv or svg)"))),
        }
    }
}

/// Writes `trace.csv` or the SVG panels into `dir`.
pub fn emit_trace(rows: &[TraceRow], dir: &Path, format: TraceFormat) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    match format {
        TraceFormat::Csv => {
            let path = dir.join("trace.csv");
            write_trace_csv(rows, &path)?;
            Ok(vec![path])
        }
        TraceFormat::Svg => plot::write_panels(rows, dir),
    }
}

/// Writes a boundary-layer trajectory as
/// `tau,e_d,e_q,i_err_d,i_err_q,z_1,z_2,z_3,w_1,w_2`.
pub fn write_boundary_layer_csv(traj: &BoundaryLayerTrajectory, path: &Path) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["tau", "e_d", "e_q", "i_err_d", "i_err_q", "z_1", "z_2", "z_3", "w_1", "w_2"])
        .map_err(csv_err)?;
    for k in 0..traj.tau.len() {
        let (e, it, z, wv) = (traj.e[k], traj.i_tilde[k], traj.z[k], traj.w[k]);
        let vals = [traj.tau[k], e.x, e.y, it.x, it.y, z.x, z.y, z.z, wv.x, wv.y];
        w.write_record(vals.iter().map(|&v| trace::format_f64(v))).map_err(csv_err)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
