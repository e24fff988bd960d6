//! Trace rows, CSV emission and steady-state summary metrics.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::closed_loop::State;
use super::config::{Mode, Scenario};
use crate::error::{Error, Result};
use crate::observer::Diagnostics;

/// CSV column order; matches the field order of [`TraceRow`].
pub const TRACE_COLUMNS: [&str; 25] = [
    "t",
    "omega_m_rpm",
    "omega_hat_m_rpm",
    "theta_err",
    "xi",
    "xi_hat",
    "r",
    "r_hat",
    "t_el",
    "t_el_hat",
    "t_el_ref",
    "i_d",
    "i_q",
    "i_ref_d",
    "i_ref_q",
    "e_d",
    "e_q",
    "i_err_d",
    "i_err_q",
    "z_norm",
    "sigma_hat",
    "u_d",
    "u_q",
    "w_1",
    "w_2",
];

/// One decimated sample. Frame quantities (`i_*`, `e_*`, `u_*`) are in the
/// estimated χ-frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub omega_m_rpm: f64,
    pub omega_hat_m_rpm: f64,
    pub theta_err: f64,
    pub xi: f64,
    pub xi_hat: f64,
    pub r: f64,
    pub r_hat: f64,
    pub t_el: f64,
    pub t_el_hat: f64,
    pub t_el_ref: f64,
    pub i_d: f64,
    pub i_q: f64,
    pub i_ref_d: f64,
    pub i_ref_q: f64,
    pub e_d: f64,
    pub e_q: f64,
    pub i_err_d: f64,
    pub i_err_q: f64,
    pub z_norm: f64,
    pub sigma_hat: f64,
    pub u_d: f64,
    pub u_q: f64,
    pub w_1: f64,
    pub w_2: f64,
}

impl TraceRow {
    pub fn values(&self) -> [f64; 25] {
        [
            self.t,
            self.omega_m_rpm,
            self.omega_hat_m_rpm,
            self.theta_err,
            self.xi,
            self.xi_hat,
            self.r,
            self.r_hat,
            self.t_el,
            self.t_el_hat,
            self.t_el_ref,
            self.i_d,
            self.i_q,
            self.i_ref_d,
            self.i_ref_q,
            self.e_d,
            self.e_q,
            self.i_err_d,
            self.i_err_q,
            self.z_norm,
            self.sigma_hat,
            self.u_d,
            self.u_q,
            self.w_1,
            self.w_2,
        ]
    }
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_trace_csv(rows: &[TraceRow], path: &Path) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(TRACE_COLUMNS).map_err(csv_err)?;
    for row in rows {
        w.write_record(row.values().iter().map(|&v| format_f64(v)))
            .map_err(csv_err)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<TraceRow>> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
    if header != TRACE_COLUMNS {
        return Err(Error::Config(format!("{}: unexpected trace header", path.display())));
    }
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

/// Steady-state metrics (taken after the transient) and settling times.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Summary {
    pub horizon: f64,
    pub steps: u64,
    pub transient: f64,
    /// `max |R̂ - R|` [Ω].
    pub max_resistance_error: f64,
    /// `max |ω̂ - ω| / p` [rpm].
    pub max_speed_error_rpm: f64,
    /// `max |ω_m - ω_m*|` [rpm]; absent when the speed is imposed.
    pub max_speed_tracking_error_rpm: Option<f64>,
    /// RMS of `T_el - T*` [N·m].
    pub torque_rms_error: f64,
    /// `max |T*|` [N·m].
    pub peak_torque_ref: f64,
    /// `max |e|` [A].
    pub max_tracking_error: f64,
    /// `max |(e, ĩ, z)|`.
    pub max_fast_residual: f64,
    pub max_sigma_hat: f64,
    /// Time after which `|R̂ - R| < 10% R` holds until the end [s].
    pub resistance_settling_time: Option<f64>,
    /// Time after which `|ω̂ - ω|/p < 2%` of nominal speed holds [s].
    pub speed_settling_time: Option<f64>,
    /// Time after which `|e|` stays below the tracking tolerance [s].
    pub tracking_settling_time: Option<f64>,
    /// Largest disagreement between the static-frame current and the one
    /// integrated in the estimated frame, per 10 ms window [A].
    pub frame_equivalence_gap: f64,
    /// Largest `| |ζ| - 1 |` over all circle states.
    pub max_norm_drift: f64,
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), |v| format!("{v:.6e}"));
        writeln!(f, "horizon: {}", self.horizon)?;
        writeln!(f, "steps: {}", self.steps)?;
        writeln!(f, "transient: {}", self.transient)?;
        writeln!(f, "max_resistance_error: {:.6e}", self.max_resistance_error)?;
        writeln!(f, "max_speed_error_rpm: {:.6e}", self.max_speed_error_rpm)?;
        writeln!(f, "max_speed_tracking_error_rpm: {}", opt(self.max_speed_tracking_error_rpm))?;
        writeln!(f, "torque_rms_error: {:.6e}", self.torque_rms_error)?;
        writeln!(f, "peak_torque_ref: {:.6e}", self.peak_torque_ref)?;
        writeln!(f, "max_tracking_error: {:.6e}", self.max_tracking_error)?;
        writeln!(f, "max_fast_residual: {:.6e}", self.max_fast_residual)?;
        writeln!(f, "max_sigma_hat: {:.6e}", self.max_sigma_hat)?;
        writeln!(f, "resistance_settling_time: {}", opt(self.resistance_settling_time))?;
        writeln!(f, "speed_settling_time: {}", opt(self.speed_settling_time))?;
        writeln!(f, "tracking_settling_time: {}", opt(self.tracking_settling_time))?;
        writeln!(f, "frame_equivalence_gap: {:.6e}", self.frame_equivalence_gap)?;
        write!(f, "max_norm_drift: {:.6e}", self.max_norm_drift)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Settle {
    since: Option<f64>,
}

impl Settle {
    fn update(&mut self, t: f64, ok: bool) {
        match (ok, self.since) {
            (true, None) => self.since = Some(t),
            (false, _) => self.since = None,
            _ => {}
        }
    }
}

pub(crate) struct SummaryBuilder {
    s: Summary,
    resistance: f64,
    speed_band: f64,
    tolerance: f64,
    sq_torque: f64,
    samples: u64,
    settle_r: Settle,
    settle_w: Settle,
    settle_e: Settle,
    tracks_speed: bool,
}

impl SummaryBuilder {
    pub(crate) fn new(sc: &Scenario) -> Self {
        Self {
            s: Summary {
                horizon: sc.steps as f64 * sc.dt,
                steps: sc.steps,
                transient: sc.transient,
                ..Default::default()
            },
            resistance: sc.plant.resistance,
            speed_band: 0.02 * sc.plant.nominal_speed_rpm,
            tolerance: sc.tracking_tolerance,
            sq_torque: 0.0,
            samples: 0,
            settle_r: Settle::default(),
            settle_w: Settle::default(),
            settle_e: Settle::default(),
            tracks_speed: sc.mode != Mode::ExogenousSpeed,
        }
    }

    /// `speed_error_rpm` is `ω_m - ω_m*` when the speed is tracked.
    pub(crate) fn observe(&mut self, row: &TraceRow, d: &Diagnostics, speed_error_rpm: Option<f64>, x: &State) {
        let t = row.t;
        let r_err = (row.r_hat - row.r).abs();
        let w_err = (row.omega_hat_m_rpm - row.omega_m_rpm).abs();
        let e = d.e.norm();

        let drift = x.rot.iter().map(|z| z.norm_error()).fold(0.0, f64::max);
        self.s.max_norm_drift = self.s.max_norm_drift.max(drift);
        self.settle_r.update(t, r_err < 0.1 * self.resistance);
        self.settle_w.update(t, w_err < self.speed_band);
        self.settle_e.update(t, e < self.tolerance);

        if t + 1e-12 < self.s.transient {
            return;
        }
        let s = &mut self.s;
        s.max_resistance_error = s.max_resistance_error.max(r_err);
        s.max_speed_error_rpm = s.max_speed_error_rpm.max(w_err);
        if let (true, Some(err)) = (self.tracks_speed, speed_error_rpm) {
            s.max_speed_tracking_error_rpm = Some(s.max_speed_tracking_error_rpm.unwrap_or(0.0).max(err.abs()));
        }
        self.sq_torque += (row.t_el - row.t_el_ref).powi(2);
        s.peak_torque_ref = s.peak_torque_ref.max(row.t_el_ref.abs());
        s.max_tracking_error = s.max_tracking_error.max(e);
        s.max_fast_residual = s.max_fast_residual.max(d.fast_norm());
        s.max_sigma_hat = s.max_sigma_hat.max(d.sigma_hat());
        self.samples += 1;
    }

    pub(crate) fn frame_gap(&mut self, gap: f64) {
        self.s.frame_equivalence_gap = self.s.frame_equivalence_gap.max(gap);
    }

    pub(crate) fn finish(mut self) -> Summary {
        if self.samples > 0 {
            self.s.torque_rms_error = (self.sq_torque / self.samples as f64).sqrt();
        }
        self.s.resistance_settling_time = self.settle_r.since;
        self.s.speed_settling_time = self.settle_w.since;
        self.s.tracking_settling_time = self.settle_e.since;
        self.s
    }
}
