use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pmsm-lab"))
}

fn benchmark_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/benchmark.json")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn tune_poles_prints_slow_gains() {
    let o = run(&["tune-poles", "--poles", "-100±33.333333333333336i", "--chi", "5.7573"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let value = |key: &str| -> f64 {
        text.lines()
            .find_map(|l| l.strip_prefix(&format!("{key}: ")))
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!((value("k_eta") - 34.75).abs() < 0.005 * 34.75);
    assert!((value("gamma") - 335.34).abs() < 0.005 * 335.34);

    let both = run(&["tune-poles", "--poles", "-100+33.333333333333336i,-100-33.333333333333336i", "--chi", "5.7573"]);
    assert_eq!(stdout(&both), text);
}

#[test]
fn tune_poles_rejects_bad_input() {
    assert_eq!(run(&["tune-poles", "--poles", "abc", "--chi", "5"]).status.code(), Some(1));
    assert_eq!(run(&["tune-poles", "--poles", "10±1i", "--chi", "5"]).status.code(), Some(1));
    assert_eq!(run(&["tune-poles", "--poles", "-1±1i", "--chi", "0"]).status.code(), Some(1));
    assert_eq!(run(&["tune-poles", "--chi", "5"]).status.code(), Some(1));
}

#[test]
fn help_and_unknown_subcommands() {
    let help = run(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    for sub in ["simulate", "analyze", "sweep-epsilon", "tune-poles"] {
        assert!(stdout(&help).contains(sub));
    }
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&[]).status.code(), Some(1));
}

#[test]
fn simulate_writes_csv_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "short.json", r#"{"horizon": 0.02, "transient": 0.01}"#);

    let out_csv = dir.path().join("csv");
    let o = run(&["simulate", cfg.to_str().unwrap(), "--out", out_csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("max_resistance_error: "));
    let trace = fs::read_to_string(out_csv.join("trace.csv")).unwrap();
    assert!(trace.starts_with("t,omega_m_rpm,omega_hat_m_rpm,theta_err,xi,xi_hat,r,r_hat,"));
    assert_eq!(trace.lines().count(), 202);

    let out_svg = dir.path().join("svg");
    let o = run(&["simulate", cfg.to_str().unwrap(), "--out", out_svg.to_str().unwrap(), "--format", "svg"]);
    assert_eq!(o.status.code(), Some(0));
    let svgs: Vec<_> = fs::read_dir(&out_svg)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "svg"))
        .collect();
    assert_eq!(svgs.len(), 8);
}

#[test]
fn simulate_boundary_layer_mode() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bl.json",
        r#"{"mode": "boundary-layer", "boundary_layer": {"windows": 10}}"#,
    );
    let o = run(&["simulate", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let value = |key: &str| -> f64 {
        text.lines()
            .find_map(|l| l.strip_prefix(&format!("{key}: ")))
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!(value("z_final_norm") < value("z_initial_norm"));
    assert!(dir.path().join("o/boundary_layer.csv").exists());
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    assert_eq!(run(&["simulate", missing.to_str().unwrap()]).status.code(), Some(1));

    let garbage = write_config(dir.path(), "g.json", "{ not json");
    assert_eq!(run(&["simulate", garbage.to_str().unwrap()]).status.code(), Some(1));

    let stiff = write_config(dir.path(), "stiff.json", r#"{"dt": 1e-5}"#);
    let o = run(&["simulate", stiff.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("stiffness"));

    let cfg = benchmark_config();
    assert_eq!(
        run(&["simulate", cfg.to_str().unwrap(), "--format", "png"]).status.code(),
        Some(1)
    );
}

#[test]
fn divergence_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "div.json",
        r#"{"horizon": 0.02, "transient": 0.01, "gains": {"k_z": [5.0, 500.0, 500.0]}}"#,
    );
    let o = run(&["simulate", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("diverge"));

    let o = run(&["sweep-epsilon", cfg.to_str().unwrap(), "--eps", "1x"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("diverged"));
}

#[test]
fn analyze_config_and_regressor_csv() {
    let dir = tempfile::tempdir().unwrap();
    let eig = dir.path().join("eig.csv");
    let o = run(&["analyze", benchmark_config().to_str().unwrap(), "--eigen-csv", eig.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let keys: Vec<&str> = text.lines().map(|l| l.split(": ").next().unwrap()).collect();
    assert_eq!(&keys[..4], ["delta", "alpha1", "alpha2", "uco"]);
    assert!(keys.contains(&"w_star") && keys.contains(&"decay_rate"));
    assert!(fs::read_to_string(&eig).unwrap().starts_with("window_start,lambda_min,lambda_mid,lambda_max"));

    // pure injection W = 2, i_q* = 0, one column-major sample per row
    let mut csv = String::from("tau,o11,o21,o31,o12,o22,o32\n");
    let n = 4000;
    let step = 4.0 * std::f64::consts::PI / n as f64;
    for k in 0..=n {
        let tau = k as f64 * step;
        let i1 = 2.0 * tau.cos();
        csv.push_str(&format!("{tau:.17e},{},1,0,0,0,1\n", -i1));
    }
    let reg = write_config(dir.path(), "reg.csv", &csv);
    let o = run(&["analyze", reg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let alpha2: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("alpha2: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((alpha2 - 4.0 * std::f64::consts::PI).abs() < 1e-4, "{alpha2}");
    assert!(text.contains("uco: true"));

    let bad = write_config(dir.path(), "bad.csv", "x,y\n1,2\n");
    assert_eq!(run(&["analyze", bad.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn sweep_epsilon_reports_each_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "short.json", r#"{"horizon": 0.02, "transient": 0.01}"#);
    let o = run(&["sweep-epsilon", cfg.to_str().unwrap(), "--eps", "1x,0.5x,0.25x"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(text.matches(" ok ").count(), 2);
    assert!(text.contains("rejected"));
    assert!(text.contains("fast_monotone: "));
    assert_eq!(run(&["sweep-epsilon", cfg.to_str().unwrap(), "--eps", "zz"]).status.code(), Some(1));
}
