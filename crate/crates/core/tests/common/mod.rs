#![allow(dead_code)]

use pmsm_core::plant::{Segment, SpeedBounds, SpeedProfile};
use pmsm_core::sim::{Mode, ScenarioConfig};

pub const BENCHMARK_JSON: &str = include_str!("../../../../configs/benchmark.json");

pub fn benchmark() -> ScenarioConfig {
    ScenarioConfig::from_json(BENCHMARK_JSON).expect("shipped benchmark config parses")
}

/// Benchmark config cut to `horizon` seconds with the steady-state window
/// starting at `transient`.
pub fn short_benchmark(horizon: f64, transient: f64) -> ScenarioConfig {
    let mut cfg = benchmark();
    cfg.horizon = Some(horizon);
    cfg.transient = Some(transient);
    cfg
}

/// Constant mechanical speed [rpm] with the speed imposed.
pub fn constant_speed(rpm: f64, duration: f64) -> ScenarioConfig {
    let mut cfg = benchmark();
    cfg.mode = Mode::ExogenousSpeed;
    cfg.profile = SpeedProfile::new(
        vec![Segment::Hold { value: rpm, duration }],
        SpeedBounds {
            min: rpm.abs(),
            max: rpm.abs(),
            max_rate: 0.0,
        },
    )
    .unwrap();
    cfg.horizon = None;
    cfg.transient = Some(0.5 * duration);
    cfg
}
