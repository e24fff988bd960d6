mod common;

use std::fs;

use pmsm_core::excitation::{GramianReport, RegressorSignal};
use pmsm_core::sim::plot::panel_files;
use pmsm_core::sim::trace::format_f64;
use pmsm_core::sim::{
    emit_trace, read_trace_csv, run_boundary_layer, run_scenario, write_boundary_layer_csv, write_trace_csv, Mode,
    TraceRow, TRACE_COLUMNS,
};
use pmsm_core::Error;

fn short_trace() -> Vec<TraceRow> {
    run_scenario(&common::short_benchmark(0.02, 0.0)).unwrap().trace
}

#[test]
fn trace_csv_round_trips_bit_for_bit() {
    let rows = short_trace();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    write_trace_csv(&rows, &path).unwrap();
    let back = read_trace_csv(&path).unwrap();
    assert_eq!(back.len(), rows.len());
    for (a, b) in rows.iter().zip(&back) {
        for (x, y) in a.values().iter().zip(b.values().iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
    let text = fs::read_to_string(&path).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(header, TRACE_COLUMNS.join(","));
    assert!(header.starts_with("t,omega_m_rpm,omega_hat_m_rpm,theta_err"));
}

#[test]
fn values_use_seventeen_significant_digits() {
    assert_eq!(format_f64(0.1), "1.0000000000000001e-1");
    assert_eq!(format_f64(-2.0), "-2.0000000000000000e0");
    for v in [std::f64::consts::PI, 1e-300, -123456.789, 5e-324] {
        let s = format_f64(v);
        let mantissa = s.split('e').next().unwrap().trim_start_matches('-').replace('.', "");
        assert_eq!(mantissa.len(), 17, "{s}");
        assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits());
    }
}

#[test]
fn empty_trace_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.csv");
    write_trace_csv(&[], &path).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(read_trace_csv(&path).unwrap().is_empty());
}

#[test]
fn foreign_csv_header_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("other.csv");
    fs::write(&path, "a,b\n1,2\n").unwrap();
    assert!(matches!(read_trace_csv(&path), Err(Error::Config(_))));
}

#[test]
fn svg_panels_are_well_formed_xml() {
    let rows = short_trace();
    let dir = tempfile::tempdir().unwrap();
    let paths = emit_trace(&rows, dir.path(), "svg".parse().unwrap()).unwrap();
    assert_eq!(paths.len(), 8);
    for (path, name) in paths.iter().zip(panel_files()) {
        assert_eq!(path.file_name().unwrap().to_str().unwrap(), name);
        let text = fs::read_to_string(path).unwrap();
        let doc = roxmltree::Document::parse(&text).unwrap();
        assert_eq!(doc.root_element().tag_name().name(), "svg");
        assert!(doc.descendants().any(|n| n.tag_name().name() == "polyline" || n.tag_name().name() == "path"));
    }
}

#[test]
fn svg_panels_survive_an_empty_trace() {
    let dir = tempfile::tempdir().unwrap();
    for path in emit_trace(&[], dir.path(), "svg".parse().unwrap()).unwrap() {
        roxmltree::Document::parse(&fs::read_to_string(path).unwrap()).unwrap();
    }
}

#[test]
fn csv_format_writes_a_single_trace_file() {
    let rows = short_trace();
    let dir = tempfile::tempdir().unwrap();
    let paths = emit_trace(&rows, &dir.path().join("nested"), "csv".parse().unwrap()).unwrap();
    assert_eq!(paths, vec![dir.path().join("nested").join("trace.csv")]);
    assert!("png".parse::<pmsm_core::sim::TraceFormat>().is_err());
}

#[test]
fn boundary_layer_trajectory_exports_and_feeds_the_gramian() {
    let mut cfg = common::benchmark();
    cfg.mode = Mode::BoundaryLayer;
    cfg.boundary_layer.windows = 4.0;
    let traj = run_boundary_layer(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();

    let path = dir.path().join("bl.csv");
    write_boundary_layer_csv(&traj, &path).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("tau,e_d,e_q,i_err_d,i_err_q,z_1,z_2,z_3,w_1,w_2\n"));
    assert_eq!(text.lines().count(), traj.tau.len() + 1);

    // regressor CSV round trip then the report
    let sig = traj.regressor_signal().unwrap();
    let reg = dir.path().join("regressor.csv");
    sig.write_csv(&reg).unwrap();
    let back = RegressorSignal::read_csv(&reg).unwrap();
    let a = GramianReport::from_signal(&sig, 2.0 * std::f64::consts::PI, std::f64::consts::PI).unwrap();
    let b = GramianReport::from_signal(&back, 2.0 * std::f64::consts::PI, std::f64::consts::PI).unwrap();
    assert_eq!(a.to_string(), b.to_string());

    let eig = dir.path().join("eig.csv");
    a.write_eigen_csv(&eig).unwrap();
    let text = fs::read_to_string(&eig).unwrap();
    assert!(text.starts_with("window_start,lambda_min,lambda_mid,lambda_max\n"));
    assert_eq!(text.lines().count(), a.windows.len() + 1);
}

#[test]
fn malformed_regressor_csv_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = [
        "tau,o11\n0,1\n",
        "tau,o11,o21,o31,o12,o22,o32\n0,1,0,0,0,1,0\n0.1,1,0,0,0,1,0\n0.3,1,0,0,0,1,0\n",
        "tau,o11,o21,o31,o12,o22,o32\n0.5,1,0,0,0,1,0\n0.6,1,0,0,0,1,0\n",
        "tau,o11,o21,o31,o12,o22,o32\n0,x,0,0,0,1,0\n0.1,1,0,0,0,1,0\n",
    ];
    for (k, text) in bad.iter().enumerate() {
        let path = dir.path().join(format!("bad{k}.csv"));
        fs::write(&path, text).unwrap();
        assert!(matches!(RegressorSignal::read_csv(&path), Err(Error::Config(_))), "case {k}");
    }
}
