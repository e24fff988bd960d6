//! Scenario configuration (JSON) and its validated runtime form.

use std::f64::consts::PI;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{Vector2, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::excitation::{DEFAULT_RHO, DEFAULT_WINDOW};
use crate::observer::{gains_from_poles, ControllerGains, FastScaling, DEFAULT_INJECTION, DEFAULT_XI_HAT0};
use crate::plant::{PlantParams, SpeedProfile, RPM_TO_RAD_S};
use crate::speed_loop::SpeedLoopGains;

/// Default integration step [s].
pub const DEFAULT_DT: f64 = 1e-6;
/// Stiffness guard: `dt` must not exceed the fastest time constant over this.
pub const STIFFNESS_MARGIN: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Speed imposed from the profile, constant torque reference.
    ExogenousSpeed,
    /// Mechanical dynamics with the PI speed loop closing on `ω̂`.
    #[default]
    FullCascade,
    /// Full cascade with the observer replaced by ground truth.
    SensoredAblation,
    /// Frozen-slow-variable fast dynamics in fast time.
    BoundaryLayer,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::Config(format!("unknown mode '{s}'")))
    }
}

/// Controller gains, either given directly or through the `ε` scaling
/// `λ = k_e/κ_e = k_p/κ_p = K_z/(L κ_z) = 1/ε`. The slow pair `(k_η, γ)` can
/// instead come from two poles placed at `pole_speed_rpm`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GainsConfig {
    pub k_eta: Option<f64>,
    pub gamma: Option<f64>,
    pub poles: Option<Vec<String>>,
    pub pole_speed_rpm: Option<f64>,
    pub k_p: Option<f64>,
    pub k_e: Option<f64>,
    pub k_z: Option<[f64; 3]>,
    pub lambda: Option<f64>,
    pub epsilon: Option<f64>,
    pub kappa_e: Option<f64>,
    pub kappa_p: Option<f64>,
    pub kappa_z: Option<[f64; 3]>,
}

/// Mechanical speed at which the benchmark poles are placed [rpm].
pub const DEFAULT_POLE_SPEED_RPM: f64 = 3500.0;

/// Parses `a±bi` (a conjugate pair), or one or two complex numbers separated
/// by a comma. A single non-real pole implies its conjugate.
pub fn parse_poles(text: &str) -> Result<(Complex64, Complex64)> {
    let parse_one = |s: &str| {
        Complex64::from_str(s.trim()).map_err(|_| Error::Config(format!("cannot parse pole '{}'", s.trim())))
    };
    let text = text.trim();
    if let Some((re, im)) = text.split_once('±') {
        let re = if re.trim().is_empty() { 0.0 } else { parse_one(re)?.re };
        let im = parse_one(&format!("+{}", im.trim()))?;
        let p = Complex64::new(re, im.im);
        return Ok((p, p.conj()));
    }
    let parts: Vec<&str> = text.split(',').collect();
    match parts.as_slice() {
        [one] => {
            let p = parse_one(one)?;
            Ok((p, p.conj()))
        }
        [a, b] => Ok((parse_one(a)?, parse_one(b)?)),
        _ => Err(Error::Config(format!("expected one or two poles, got '{text}'"))),
    }
}

impl GainsConfig {
    pub fn resolve(&self, plant: &PlantParams) -> Result<ControllerGains> {
        let bench = ControllerGains::benchmark();
        let (k_eta, gamma) = match &self.poles {
            Some(poles) => {
                if self.k_eta.is_some() || self.gamma.is_some() {
                    return Err(Error::Config("give either poles or k_eta/gamma, not both".into()));
                }
                let (p1, p2) = match poles.as_slice() {
                    [one] => parse_poles(one)?,
                    [a, b] => (parse_poles(a)?.0, parse_poles(b)?.0),
                    _ => return Err(Error::Config("poles must list one or two entries".into())),
                };
                let rpm = self.pole_speed_rpm.unwrap_or(DEFAULT_POLE_SPEED_RPM);
                let chi = rpm.abs() * RPM_TO_RAD_S * plant.p() * plant.flux;
                gains_from_poles(p1, p2, chi).map_err(|e| Error::Config(e.to_string()))?
            }
            None => (self.k_eta.unwrap_or(bench.k_eta), self.gamma.unwrap_or(bench.gamma)),
        };
        let gains = match self.epsilon {
            Some(eps) => {
                if self.k_p.is_some() || self.k_e.is_some() || self.k_z.is_some() || self.lambda.is_some() {
                    return Err(Error::Config(
                        "give either epsilon with kappa_* or direct k_p/k_e/k_z/lambda, not both".into(),
                    ));
                }
                let base = bench.fast_scaling(plant.inductance);
                let scaling = FastScaling {
                    kappa_e: self.kappa_e.unwrap_or(base.kappa_e),
                    kappa_p: self.kappa_p.unwrap_or(base.kappa_p),
                    kappa_z: self.kappa_z.map(Vector3::from).unwrap_or(base.kappa_z),
                };
                ControllerGains::from_epsilon(eps, &scaling, plant.inductance, k_eta, gamma)
                    .map_err(|e| Error::Config(e.to_string()))?
            }
            None => {
                if self.kappa_e.is_some() || self.kappa_p.is_some() || self.kappa_z.is_some() {
                    return Err(Error::Config("kappa_* require epsilon".into()));
                }
                ControllerGains {
                    k_eta,
                    gamma,
                    k_p: self.k_p.unwrap_or(bench.k_p),
                    k_e: self.k_e.unwrap_or(bench.k_e),
                    k_z: self.k_z.map(Vector3::from).unwrap_or(bench.k_z),
                    lambda: self.lambda.unwrap_or(bench.lambda),
                }
            }
        };
        gains.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(gains)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpeedLoopConfig {
    pub k_p: f64,
    pub k_i: f64,
    pub tau: f64,
    pub torque_max: Option<f64>,
    /// Close the speed loop on the true speed instead of `ω̂`.
    pub sensored: bool,
}

impl Default for SpeedLoopConfig {
    fn default() -> Self {
        let b = SpeedLoopGains::benchmark();
        Self {
            k_p: b.k_p,
            k_i: b.k_i,
            tau: b.tau,
            torque_max: b.torque_max,
            sensored: false,
        }
    }
}

impl SpeedLoopConfig {
    pub fn gains(&self) -> SpeedLoopGains {
        SpeedLoopGains {
            k_p: self.k_p,
            k_i: self.k_i,
            tau: self.tau,
            torque_max: self.torque_max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialConfig {
    /// Electrical rotor angle [rad].
    pub rotor_angle: f64,
    /// Defaults to the profile's initial value [rpm].
    pub mech_speed_rpm: Option<f64>,
    /// Static-frame stator current [A].
    pub current: [f64; 2],
    /// Angle of the estimated χ-frame [rad].
    pub frame_angle: f64,
    pub xi_hat: f64,
    pub current_estimate: [f64; 2],
    pub theta: [f64; 3],
    /// Start on the fast manifold (`e = ĩ = z = 0`) using plant ground truth;
    /// overrides `current`, `current_estimate` and `theta`.
    pub ideal_fast: bool,
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self {
            rotor_angle: 1.0,
            mech_speed_rpm: None,
            current: [0.0; 2],
            frame_angle: 0.0,
            xi_hat: DEFAULT_XI_HAT0,
            current_estimate: [0.0; 2],
            theta: [0.0; 3],
            ideal_fast: false,
        }
    }
}

/// Uniform measurement noise on both current channels, held over each step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Half-width of the uniform distribution [A].
    pub amplitude: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundaryLayerConfig {
    /// Frozen `i_q*` [A].
    pub iq: f64,
    pub e0: [f64; 2],
    pub i_tilde0: [f64; 2],
    pub z0: [f64; 3],
    /// Horizon in multiples of `2π` fast-time units.
    pub windows: f64,
    pub step: f64,
    pub record_every: usize,
}

impl Default for BoundaryLayerConfig {
    fn default() -> Self {
        Self {
            iq: 1.0,
            e0: [0.0; 2],
            i_tilde0: [0.0; 2],
            z0: [1.0; 3],
            windows: 50.0,
            step: 2.0 * PI / 2000.0,
            record_every: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub rho: f64,
    pub delta: f64,
    pub windows: usize,
    pub a2f: Option<f64>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            rho: DEFAULT_RHO,
            delta: DEFAULT_WINDOW,
            windows: 8,
            a2f: None,
        }
    }
}

fn default_plant() -> PlantParams {
    PlantParams::uav_benchmark()
}
fn default_profile() -> SpeedProfile {
    SpeedProfile::benchmark_rpm()
}
fn default_torque_ref() -> f64 {
    0.1
}
fn default_injection() -> f64 {
    DEFAULT_INJECTION
}
fn default_dt() -> f64 {
    DEFAULT_DT
}
fn default_decimation() -> usize {
    100
}
fn default_settle_tolerance() -> f64 {
    0.05
}

/// Everything needed to run one scenario. Missing sections fall back to the
/// benchmark values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub mode: Mode,
    #[serde(default = "default_plant")]
    pub plant: PlantParams,
    /// Mechanical speed [rpm]: imposed in exogenous mode, the reference otherwise.
    #[serde(default = "default_profile")]
    pub profile: SpeedProfile,
    #[serde(default)]
    pub gains: GainsConfig,
    #[serde(default)]
    pub speed_loop: SpeedLoopConfig,
    /// Constant torque reference for exogenous-speed runs [N·m].
    #[serde(default = "default_torque_ref")]
    pub torque_ref: f64,
    #[serde(default)]
    pub initial: InitialConfig,
    /// Injection amplitude `|w(0)|` [A].
    #[serde(default = "default_injection")]
    pub injection: f64,
    #[serde(default)]
    pub noise: Option<NoiseConfig>,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Defaults to the profile duration [s].
    #[serde(default)]
    pub horizon: Option<f64>,
    /// Keep one trace row every `decimation` steps.
    #[serde(default = "default_decimation")]
    pub decimation: usize,
    /// Start of the steady-state window; defaults to 20% of the horizon [s].
    #[serde(default)]
    pub transient: Option<f64>,
    /// Threshold on `|e|` used for the tracking settling time [A].
    #[serde(default = "default_settle_tolerance")]
    pub tracking_tolerance: f64,
    #[serde(default)]
    pub boundary_layer: BoundaryLayerConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::benchmark()
    }
}

impl ScenarioConfig {
    /// Full-cascade benchmark over the 2 s ramp/hold/sinusoid profile.
    pub fn benchmark() -> Self {
        serde_json::from_str("{}").expect("empty config uses defaults")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn horizon(&self) -> f64 {
        self.horizon.unwrap_or_else(|| self.profile.duration())
    }

    pub fn transient(&self) -> f64 {
        self.transient.unwrap_or(0.2 * self.horizon())
    }

    /// Upper bound on `|i_q*|` implied by the torque clamp and `ξ̂(0)`:
    /// `(2/3p) T*_max max(|ξ̂(0)|, 1/φ)`.
    pub fn i_star(&self) -> f64 {
        let t_max = match self.mode {
            Mode::ExogenousSpeed => self.torque_ref.abs(),
            _ => self.speed_loop.torque_max.unwrap_or(self.torque_ref.abs()),
        };
        2.0 / (3.0 * self.plant.p()) * t_max * self.initial.xi_hat.abs().max(1.0 / self.plant.flux)
    }

    /// Validates everything and returns the runtime form.
    pub fn resolve(&self) -> Result<Scenario> {
        self.plant.validate().map_err(|e| Error::Config(e.to_string()))?;
        let gains = self.gains.resolve(&self.plant)?;
        let finite = |v: f64, what: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{what} must be finite")))
            }
        };
        finite(self.torque_ref, "torque_ref")?;
        finite(self.injection, "injection")?;
        let init = &self.initial;
        for v in [init.rotor_angle, init.frame_angle, init.xi_hat]
            .iter()
            .chain(init.current.iter())
            .chain(init.current_estimate.iter())
            .chain(init.theta.iter())
        {
            finite(*v, "initial conditions")?;
        }
        if init.xi_hat == 0.0 {
            return Err(Error::Config("initial xi_hat must be nonzero".into()));
        }
        if self.injection < 0.0 {
            return Err(Error::Config("injection amplitude must be non-negative".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if self.decimation == 0 {
            return Err(Error::Config("decimation must be >= 1".into()));
        }
        if let Some(n) = &self.noise {
            if !(n.amplitude >= 0.0 && n.amplitude.is_finite()) {
                return Err(Error::Config("noise amplitude must be non-negative".into()));
            }
        }
        let sl = self.speed_loop;
        if !(sl.tau > 0.0 && sl.k_p >= 0.0 && sl.k_i >= 0.0) || sl.torque_max.is_some_and(|m| !(m > 0.0)) {
            return Err(Error::Config("speed loop needs tau > 0, k_p, k_i >= 0 and a positive clamp".into()));
        }

        let fastest = (self.plant.inductance / self.plant.resistance)
            .min(1.0 / gains.lambda)
            .min(1.0 / gains.k_p)
            .min(1.0 / gains.k_e);
        if self.mode != Mode::BoundaryLayer && self.dt > fastest / STIFFNESS_MARGIN {
            return Err(Error::Config(format!(
                "dt = {:e} s violates the stiffness guard dt <= {:e} s",
                self.dt,
                fastest / STIFFNESS_MARGIN
            )));
        }

        let horizon = self.horizon();
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Config(format!("horizon must be positive, got {horizon}")));
        }
        if self.mode != Mode::BoundaryLayer && horizon > self.profile.duration() * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "horizon {horizon} s exceeds the profile duration {} s",
                self.profile.duration()
            )));
        }
        let transient = self.transient();
        if !(transient >= 0.0 && transient < horizon) {
            return Err(Error::Config(format!("transient {transient} s must lie in [0, horizon)")));
        }
        if !(self.tracking_tolerance > 0.0) {
            return Err(Error::Config("tracking_tolerance must be positive".into()));
        }
        let bl = &self.boundary_layer;
        if self.mode == Mode::BoundaryLayer && !(bl.windows > 0.0 && bl.step > 0.0 && bl.record_every > 0) {
            return Err(Error::Config("boundary_layer needs positive windows, step and record_every".into()));
        }

        let profile = self
            .profile
            .scaled(RPM_TO_RAD_S)
            .map_err(|e| Error::Config(e.to_string()))?;
        let mech_speed0 = match init.mech_speed_rpm {
            Some(rpm) => rpm * RPM_TO_RAD_S,
            None => profile.speed_at(0.0)?.0,
        };
        finite(mech_speed0, "initial mechanical speed")?;
        Ok(Scenario {
            mode: self.mode,
            plant: self.plant,
            profile,
            gains,
            speed_loop: sl.gains(),
            speed_sensored: sl.sensored,
            torque_ref: self.torque_ref,
            rotor0: init.rotor_angle,
            mech_speed0,
            current0: Vector2::from(init.current),
            frame0: init.frame_angle,
            xi_hat0: init.xi_hat,
            current_estimate0: Vector2::from(init.current_estimate),
            theta0: Vector3::from(init.theta),
            ideal_fast: init.ideal_fast,
            injection: self.injection,
            noise: self.noise,
            dt: self.dt,
            steps: (horizon / self.dt).round() as u64,
            decimation: self.decimation,
            transient,
            tracking_tolerance: self.tracking_tolerance,
        })
    }
}

/// Validated scenario; speeds in rad/s.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub mode: Mode,
    pub plant: PlantParams,
    /// Mechanical speed profile [rad/s].
    pub profile: SpeedProfile,
    pub gains: ControllerGains,
    pub speed_loop: SpeedLoopGains,
    pub speed_sensored: bool,
    pub torque_ref: f64,
    pub rotor0: f64,
    pub mech_speed0: f64,
    pub current0: Vector2<f64>,
    pub frame0: f64,
    pub xi_hat0: f64,
    pub current_estimate0: Vector2<f64>,
    pub theta0: Vector3<f64>,
    pub ideal_fast: bool,
    pub injection: f64,
    pub noise: Option<NoiseConfig>,
    pub dt: f64,
    pub steps: u64,
    pub decimation: usize,
    pub transient: f64,
    pub tracking_tolerance: f64,
}
