//! One SVG line chart per figure panel.

use std::path::{Path, PathBuf};

use plotters::prelude::*;

use super::trace::TraceRow;
use crate::excitation::BoundaryLayerTrajectory;
use crate::error::{Error, Result};

/// Window shown by the current panels [s].
pub const STARTUP_WINDOW: f64 = 0.015;

type Getter = fn(&TraceRow) -> f64;

struct Panel {
    file: &'static str,
    title: &'static str,
    y_label: &'static str,
    startup_only: bool,
    series: &'static [(&'static str, Getter)],
}

const PALETTE: [RGBColor; 4] = [BLUE, RED, RGBColor(0, 150, 0), RGBColor(200, 120, 0)];

const PANELS: [Panel; 8] = [
    Panel {
        file: "a1_speed.svg",
        title: "Rotor speed",
        y_label: "speed [rpm]",
        startup_only: false,
        series: &[("omega_m", |r| r.omega_m_rpm), ("omega_hat_m", |r| r.omega_hat_m_rpm)],
    },
    Panel {
        file: "a2_speed_error.svg",
        title: "Speed estimation error",
        y_label: "error [rpm]",
        startup_only: false,
        series: &[("omega_hat_m - omega_m", |r| r.omega_hat_m_rpm - r.omega_m_rpm)],
    },
    Panel {
        file: "b1_angle_error.svg",
        title: "Rotor angle error",
        y_label: "angle [rad]",
        startup_only: false,
        series: &[("theta_err", |r| r.theta_err)],
    },
    Panel {
        file: "b2_inverse_flux.svg",
        title: "Inverse flux",
        y_label: "xi [1/Wb]",
        startup_only: false,
        series: &[("xi", |r| r.xi), ("xi_hat", |r| r.xi_hat)],
    },
    Panel {
        file: "c1_resistance.svg",
        title: "Stator resistance",
        y_label: "R [ohm]",
        startup_only: false,
        series: &[("R", |r| r.r), ("R_hat", |r| r.r_hat)],
    },
    Panel {
        file: "c2_torque.svg",
        title: "Electrical torque",
        y_label: "torque [N m]",
        startup_only: false,
        series: &[("T_el", |r| r.t_el), ("T_el_hat", |r| r.t_el_hat), ("T_ref", |r| r.t_el_ref)],
    },
    Panel {
        file: "d1_current.svg",
        title: "Currents in the estimated frame",
        y_label: "current [A]",
        startup_only: true,
        series: &[
            ("i_d", |r| r.i_d),
            ("i_q", |r| r.i_q),
            ("i_ref_d", |r| r.i_ref_d),
            ("i_ref_q", |r| r.i_ref_q),
        ],
    },
    Panel {
        file: "d2_tracking_error.svg",
        title: "Tracking error",
        y_label: "e [A]",
        startup_only: true,
        series: &[("e_d", |r| r.e_d), ("e_q", |r| r.e_q)],
    },
];

/// File names written by [`write_panels`], in order.
pub fn panel_files() -> Vec<&'static str> {
    PANELS.iter().map(|p| p.file).collect()
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return (0.0, 1.0);
    }
    let span = hi - lo;
    let pad = if span > 0.0 { 0.05 * span } else { 0.5 * lo.abs().max(1e-9) };
    (lo - pad, hi + pad)
}

struct Series<'a> {
    label: &'a str,
    points: Vec<(f64, f64)>,
}

fn draw_lines(path: &Path, title: &str, x_label: &str, y_label: &str, default_x: (f64, f64), series: &[Series]) -> Result<()> {
    let plot_err = |e: &dyn std::fmt::Display| Error::Plot {
        path: path.to_path_buf(),
        detail: e.to_string(),
    };
    let xs = series.iter().flat_map(|s| s.points.iter().map(|p| p.0));
    let (x0, x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let (x0, x1) = if x1 > x0 { (x0, x1) } else { default_x };
    let ys = series.iter().flat_map(|s| s.points.iter().map(|p| p.1));
    let (lo, hi) = ys
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let (lo, hi) = padded(lo, hi);

    let root = SVGBackend::new(path, (900, 420)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot_err(&e))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(64)
        .build_cartesian_2d(x0..x1, lo..hi)
        .map_err(|e| plot_err(&e))?;
    chart
        .configure_mesh()
        .x_desc(x_label)
        .y_desc(y_label)
        .draw()
        .map_err(|e| plot_err(&e))?;
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        chart
            .draw_series(LineSeries::new(s.points.iter().copied(), &color))
            .map_err(|e| plot_err(&e))?
            .label(s.label)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| plot_err(&e))?;
    root.present().map_err(|e| plot_err(&e))
}

fn draw_panel(panel: &Panel, rows: &[TraceRow], path: &Path) -> Result<()> {
    let rows: Vec<&TraceRow> = rows
        .iter()
        .filter(|r| !panel.startup_only || r.t <= STARTUP_WINDOW)
        .collect();
    let series: Vec<Series> = panel
        .series
        .iter()
        .map(|(label, getter)| Series {
            label,
            points: rows.iter().map(|r| (r.t, getter(r))).collect(),
        })
        .collect();
    let default_x = (0.0, if panel.startup_only { STARTUP_WINDOW } else { 1.0 });
    draw_lines(path, panel.title, "t [s]", panel.y_label, default_x, &series)
}

/// Norms of the fast error and parameter error against fast time.
pub fn write_boundary_layer_svg(traj: &BoundaryLayerTrajectory, path: &Path) -> Result<()> {
    let series = [
        Series {
            label: "|(e, i_err)|",
            points: (0..traj.tau.len()).map(|k| (traj.tau[k], traj.fast_norm(k))).collect(),
        },
        Series {
            label: "|z|",
            points: traj.tau.iter().zip(&traj.z).map(|(&t, z)| (t, z.norm())).collect(),
        },
    ];
    draw_lines(path, "Boundary-layer system", "fast time", "norm", (0.0, 1.0), &series)
}

/// Writes every panel into `dir` and returns the paths.
pub fn write_panels(rows: &[TraceRow], dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    PANELS
        .iter()
        .map(|panel| {
            let path = dir.join(panel.file);
            draw_panel(panel, rows, &path)?;
            Ok(path)
        })
        .collect()
}
