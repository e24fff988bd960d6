mod common;

use nalgebra::Vector2;
use pmsm_core::plant::{plant_derivative, PlantParams, PlantState, SpeedSource, RPM_TO_RAD_S};
use pmsm_core::sim::integrator::{rk4_step, Bundle, Rates};
use pmsm_core::sim::{run_scenario, TraceRow};
use pmsm_core::so2::UnitVec;

/// Plant driven open-loop by a rotating voltage, mechanical speed free.
fn plant_endpoint(dt: f64, horizon: f64) -> Bundle<3, 1> {
    let params = PlantParams::uav_benchmark();
    let w0 = 3500.0 * RPM_TO_RAD_S;
    let mut x = Bundle::<3, 1> {
        flat: [0.5, -1.0, w0],
        rot: [UnitVec::from_angle(0.4)],
    };
    let n = (horizon / dt).round() as usize;
    for k in 0..n {
        x = rk4_step(&x, k as f64 * dt, dt, |t, b| {
            let s = PlantState {
                current: Vector2::new(b.flat[0], b.flat[1]),
                rotor: b.rot[0],
                mech_speed: b.flat[2],
            };
            // voltage leading the rotor by a quarter turn plus a ripple
            let v = UnitVec::from_angle(s.rotor.angle() + 1.7).as_vector() * (6.0 + 0.5 * (9000.0 * t).sin());
            let r = plant_derivative(&s, &v, &params, SpeedSource::Mechanical)?;
            Ok(Rates {
                flat: [r.current.x, r.current.y, r.mech_accel],
                rot: [r.rotor_rate],
            })
        })
        .unwrap();
    }
    x
}

fn distance(a: &Bundle<3, 1>, b: &Bundle<3, 1>) -> f64 {
    let da = (a.rot[0].inverse().mul(&b.rot[0])).angle();
    ((a.flat[0] - b.flat[0]).powi(2) + (a.flat[1] - b.flat[1]).powi(2) + ((a.flat[2] - b.flat[2]) * 1e-3).powi(2) + da * da)
        .sqrt()
}

#[test]
fn plant_rk4_error_shrinks_sixteenfold_per_halving() {
    let horizon = 4e-3;
    let reference = plant_endpoint(1.25e-6, horizon);
    let coarse = plant_endpoint(20e-6, horizon);
    let mid = plant_endpoint(10e-6, horizon);
    let fine = plant_endpoint(5e-6, horizon);
    let (e1, e2, e3) = (distance(&coarse, &reference), distance(&mid, &reference), distance(&fine, &reference));
    let (r1, r2) = (e1 / e2, e2 / e3);
    assert!((13.0..19.0).contains(&r1), "ratio {r1} ({e1:e} / {e2:e})");
    assert!((13.0..19.0).contains(&r2), "ratio {r2} ({e2:e} / {e3:e})");
}

fn closed_loop_endpoint(dt: f64) -> TraceRow {
    let mut cfg = common::constant_speed(3500.0, 3e-3);
    cfg.dt = dt;
    cfg.decimation = (1e-3 / dt).round() as usize;
    *run_scenario(&cfg).unwrap().trace.last().unwrap()
}

fn row_distance(a: &TraceRow, b: &TraceRow) -> f64 {
    a.values()
        .iter()
        .zip(b.values().iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// With the speed imposed the closed loop has a smooth right-hand side, so
/// the whole controller-observer integrates at fourth order.
#[test]
fn closed_loop_rk4_is_fourth_order_with_exogenous_speed() {
    let reference = closed_loop_endpoint(0.25e-6);
    let coarse = closed_loop_endpoint(3e-6);
    let mid = closed_loop_endpoint(1.5e-6);
    let fine = closed_loop_endpoint(0.75e-6);
    assert_eq!(coarse.t, reference.t);
    let (e1, e2, e3) = (
        row_distance(&coarse, &reference),
        row_distance(&mid, &reference),
        row_distance(&fine, &reference),
    );
    assert!((13.0..19.0).contains(&(e1 / e2)), "ratio {} ({e1:e} / {e2:e})", e1 / e2);
    assert!((13.0..19.0).contains(&(e2 / e3)), "ratio {} ({e2:e} / {e3:e})", e2 / e3);
}
