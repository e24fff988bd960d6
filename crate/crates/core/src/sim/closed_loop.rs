//! Plant + controller-observer (+ speed loop) integrated as one RK4 system.
//!
//! State layout: flat `[i_s (2), ω_m, ξ̂, î (2), θ̂ (3), i_shadow (2)]`,
//! circle `[ζ, ζ̂_χ, w/|w|]`. The shadow current is the stator current
//! integrated directly in the estimated frame; it is resynchronised every
//! 10 ms and its disagreement with the static-frame state is reported.

use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{Mode, Scenario};
use super::integrator::{rk4_step, Bundle, Rates};
use super::trace::{Summary, SummaryBuilder, TraceRow};
use crate::error::{Error, Result};
use crate::observer::{
    beta, compute_diagnostics, evaluate, extract_estimates, Diagnostics, GroundTruth, KnownParams, ObserverOutput,
    ObserverState, DEFAULT_XI_FLOOR,
};
use crate::plant::{plant_derivative, torque, PlantRates, PlantState, SpeedSource, RPM_TO_RAD_S};
use crate::so2::{j_times, UnitVec};
use crate::speed_loop::{filter_at, speed_pi, SpeedLoopState};

pub type State = Bundle<11, 3>;

/// Currents beyond this are treated as divergence [A].
pub const CURRENT_LIMIT: f64 = 1e4;
const RESYNC_PERIOD: f64 = 0.01;

/// Exogenous inputs held or evaluated in closed form across one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInputs {
    /// Raw speed-loop demand, constant over the step [N·m].
    pub demand: f64,
    /// Filter state at the start of the step [N·m].
    pub filter0: f64,
    pub t0: f64,
    /// Held measurement noise [A].
    pub noise: Vector2<f64>,
}

/// Full state snapshot, enough to re-evaluate the closed-loop right-hand side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub state: State,
    pub inputs: StepInputs,
}

/// Everything computed at one evaluation of the closed loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub plant: PlantState,
    /// Electrical speed [rad/s].
    pub omega: f64,
    /// Observer state actually used by the controller (ground truth in the
    /// sensored ablation).
    pub observer: ObserverState,
    pub output: ObserverOutput,
    pub plant_rates: PlantRates,
    pub torque_ref: f64,
    pub torque_ref_rate: f64,
    pub measured: Vector2<f64>,
}

pub fn plant_state(x: &State) -> PlantState {
    PlantState {
        current: Vector2::new(x.flat[0], x.flat[1]),
        rotor: x.rot[0],
        mech_speed: x.flat[2],
    }
}

fn stored_observer(sc: &Scenario, x: &State) -> ObserverState {
    let f = &x.flat;
    ObserverState {
        frame: x.rot[1],
        xi_hat: f[3],
        current: Vector2::new(f[4], f[5]),
        theta: Vector3::new(f[6], f[7], f[8]),
        w: x.rot[2].as_vector() * sc.injection,
    }
}

fn known(sc: &Scenario) -> KnownParams {
    KnownParams {
        inductance: sc.plant.inductance,
        pole_pairs: sc.plant.pole_pairs,
    }
}

/// Electrical speed and mechanical acceleration override for the mode.
fn speed_source(sc: &Scenario, t: f64, x: &State) -> Result<(f64, SpeedSource, f64)> {
    match sc.mode {
        Mode::ExogenousSpeed => {
            let (w, dw) = sc.profile.speed_at(t)?;
            let omega = sc.plant.p() * w;
            Ok((omega, SpeedSource::Exogenous { omega }, dw))
        }
        _ => Ok((sc.plant.p() * x.flat[2], SpeedSource::Mechanical, 0.0)),
    }
}

/// `θ = (R, h)` with `h = -χ J η` for the given estimated frame.
fn true_theta(sc: &Scenario, rotor: &UnitVec, frame: &UnitVec, omega: f64) -> Vector3<f64> {
    let sign = if omega < 0.0 { -1.0 } else { 1.0 };
    let chi = omega.abs() * sc.plant.flux;
    let eta = frame.inverse().mul(&rotor.signed(sign));
    let h = -j_times(&eta.as_vector()) * chi;
    Vector3::new(sc.plant.resistance, h.x, h.y)
}

/// Observer state equal to the ideal synchronised values.
fn ground_truth_observer(sc: &Scenario, x: &State, omega: f64) -> ObserverState {
    let sign = if omega < 0.0 { -1.0 } else { 1.0 };
    let frame = x.rot[0].signed(sign);
    let i = frame.rotate_back(&Vector2::new(x.flat[0], x.flat[1]));
    ObserverState {
        frame,
        xi_hat: sign / sc.plant.flux,
        current: i,
        theta: true_theta(sc, &x.rot[0], &frame, omega) - beta(&i, &sc.gains.k_z),
        w: x.rot[2].as_vector() * sc.injection,
    }
}

/// Evaluates the closed loop at `(t, x)`.
pub fn evaluate_point(sc: &Scenario, t: f64, x: &State, inputs: &StepInputs) -> Result<Point> {
    let plant = plant_state(x);
    let (omega, source, profile_accel) = speed_source(sc, t, x)?;
    let (torque_ref, torque_ref_rate) = match sc.mode {
        Mode::ExogenousSpeed => (sc.torque_ref, 0.0),
        _ => filter_at(inputs.demand, inputs.filter0, sc.speed_loop.tau, t - inputs.t0),
    };
    let (observer, measured) = match sc.mode {
        Mode::SensoredAblation => (ground_truth_observer(sc, x, omega), plant.current),
        _ => (stored_observer(sc, x), plant.current + inputs.noise),
    };
    let output = evaluate(&observer, &measured, torque_ref, torque_ref_rate, &known(sc), &sc.gains);
    let mut plant_rates = plant_derivative(&plant, &output.voltage_static, &sc.plant, source)?;
    if sc.mode == Mode::ExogenousSpeed {
        plant_rates.mech_accel = profile_accel;
    }
    Ok(Point {
        plant,
        omega,
        observer,
        output,
        plant_rates,
        torque_ref,
        torque_ref_rate,
        measured,
    })
}

fn rates(sc: &Scenario, t: f64, x: &State, inputs: &StepInputs) -> Result<Rates<11, 3>> {
    let p = evaluate_point(sc, t, x, inputs)?;
    let di = p.plant_rates.current;
    let o = &p.output;
    let shadow = Vector2::new(x.flat[9], x.flat[10]);
    let v_shadow = x.rot[1].rotate_back(&o.voltage_static);
    let d_shadow = crate::plant::rotating_frame_current_derivative(
        &shadow,
        &v_shadow,
        &x.rot[0],
        &x.rot[1],
        p.omega,
        o.omega_hat,
        &sc.plant,
    );
    Ok(Rates {
        flat: [
            di.x,
            di.y,
            p.plant_rates.mech_accel,
            o.xi_hat_rate,
            o.current_rate.x,
            o.current_rate.y,
            o.theta_rate.x,
            o.theta_rate.y,
            o.theta_rate.z,
            d_shadow.x,
            d_shadow.y,
        ],
        rot: [p.omega, o.omega_hat, -sc.gains.lambda],
    })
}

/// Builds `x(0)` from the scenario's initial conditions.
pub fn initial_state(sc: &Scenario) -> Result<State> {
    let rotor = UnitVec::from_angle(sc.rotor0);
    let mut x = State {
        flat: [0.0; 11],
        rot: [rotor, UnitVec::from_angle(sc.frame0), UnitVec::IDENTITY],
    };
    x.flat[2] = sc.mech_speed0;
    x.flat[3] = sc.xi_hat0;
    let (omega, _, _) = speed_source(sc, 0.0, &x)?;
    if sc.mode == Mode::SensoredAblation {
        x.rot[1] = rotor.signed(if omega < 0.0 { -1.0 } else { 1.0 });
    }
    let frame = x.rot[1];
    let (current, estimate, theta) = if sc.ideal_fast {
        let t0 = match sc.mode {
            Mode::ExogenousSpeed => sc.torque_ref,
            _ => 0.0,
        };
        let iq = 2.0 / (3.0 * sc.plant.p()) * sc.xi_hat0 * t0;
        let i_frame = Vector2::new(sc.injection, iq);
        let theta = true_theta(sc, &rotor, &frame, omega) - beta(&i_frame, &sc.gains.k_z);
        (frame.rotate(&i_frame), i_frame, theta)
    } else {
        (sc.current0, sc.current_estimate0, sc.theta0)
    };
    x.flat[0] = current.x;
    x.flat[1] = current.y;
    x.flat[4] = estimate.x;
    x.flat[5] = estimate.y;
    x.flat[6] = theta.x;
    x.flat[7] = theta.y;
    x.flat[8] = theta.z;
    let shadow = frame.rotate_back(&current);
    x.flat[9] = shadow.x;
    x.flat[10] = shadow.y;
    Ok(x)
}

/// Optional extras collected during a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Keep a [`Snapshot`] with every trace row.
    pub snapshots: bool,
}

#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub trace: Vec<TraceRow>,
    pub summary: Summary,
    pub snapshots: Vec<Snapshot>,
}

/// Ground-truth error coordinates at a point.
pub fn diagnostics(sc: &Scenario, p: &Point) -> Diagnostics {
    let truth = GroundTruth {
        rotor: p.plant.rotor,
        omega: p.omega,
        current_static: p.plant.current,
        resistance: sc.plant.resistance,
        flux: sc.plant.flux,
    };
    compute_diagnostics(&truth, &p.observer, p.output.omega_hat, p.output.iq_ref, &sc.gains.k_z)
}

/// Estimated mechanical speed `|ĥ| ξ̂ / p` [rad/s].
fn speed_estimate(sc: &Scenario, x: &State, measured: &Vector2<f64>) -> Result<f64> {
    let obs = stored_observer(sc, x);
    let i = obs.frame.rotate_back(measured);
    let est = extract_estimates(&obs, &i, &sc.gains.k_z, sc.plant.pole_pairs, DEFAULT_XI_FLOOR)?;
    Ok(est.speed / sc.plant.p())
}

fn trace_row(sc: &Scenario, t: f64, p: &Point, d: &Diagnostics) -> Result<TraceRow> {
    let o = &p.output;
    let est = extract_estimates(&p.observer, &o.current_frame, &sc.gains.k_z, sc.plant.pole_pairs, DEFAULT_XI_FLOOR)?;
    let to_rpm = 1.0 / (RPM_TO_RAD_S * sc.plant.p());
    Ok(TraceRow {
        t,
        omega_m_rpm: p.omega * to_rpm,
        omega_hat_m_rpm: est.speed * to_rpm,
        theta_err: d.theta_err,
        xi: d.xi,
        xi_hat: p.observer.xi_hat,
        r: sc.plant.resistance,
        r_hat: est.resistance,
        t_el: torque(&p.plant, &sc.plant),
        t_el_hat: est.torque,
        t_el_ref: p.torque_ref,
        i_d: d.current_frame.x,
        i_q: d.current_frame.y,
        i_ref_d: p.observer.w.x,
        i_ref_q: o.iq_ref,
        e_d: d.e.x,
        e_q: d.e.y,
        i_err_d: d.i_tilde.x,
        i_err_q: d.i_tilde.y,
        z_norm: d.z.norm(),
        sigma_hat: d.sigma_hat(),
        u_d: o.voltage_frame.x,
        u_q: o.voltage_frame.y,
        w_1: p.observer.w.x,
        w_2: p.observer.w.y,
    })
}

/// Integrates a closed-loop scenario over its horizon.
pub fn run_closed_loop(sc: &Scenario, options: RunOptions) -> Result<RunOutput> {
    if sc.mode == Mode::BoundaryLayer {
        return Err(Error::Config("boundary-layer scenarios are not closed-loop runs".into()));
    }
    let mut x = initial_state(sc)?;
    let mut loop_state = SpeedLoopState::default();
    let mut rng = sc.noise.map(|n| (ChaCha8Rng::seed_from_u64(n.seed), n.amplitude));
    let resync_every = ((RESYNC_PERIOD / sc.dt).round() as u64).max(1);
    let mut summary = SummaryBuilder::new(sc);
    let mut out = RunOutput::default();

    for k in 0..=sc.steps {
        let t0 = k as f64 * sc.dt;
        let noise = match rng.as_mut() {
            Some((r, a)) if *a > 0.0 => Vector2::new(r.gen_range(-*a..=*a), r.gen_range(-*a..=*a)),
            _ => Vector2::zeros(),
        };
        let demand = match sc.mode {
            Mode::ExogenousSpeed => 0.0,
            _ => {
                let measured = plant_state(&x).current + noise;
                let speed = if sc.speed_sensored || sc.mode == Mode::SensoredAblation {
                    x.flat[2]
                } else {
                    speed_estimate(sc, &x, &measured)?
                };
                let (reference, _) = sc.profile.speed_at(t0)?;
                // the final sample is only recorded, so do not advance the integrator there
                let mut probe = loop_state;
                let demand = speed_pi(speed, reference, &mut probe, &sc.speed_loop, sc.dt);
                if k < sc.steps {
                    loop_state = probe;
                }
                demand
            }
        };
        let inputs = StepInputs {
            demand,
            filter0: loop_state.filter,
            t0,
            noise,
        };

        let point = evaluate_point(sc, t0, &x, &inputs)?;
        let diag = diagnostics(sc, &point);
        let row = trace_row(sc, t0, &point, &diag)?;
        let speed_error = match sc.mode {
            Mode::ExogenousSpeed => None,
            _ => Some((x.flat[2] - sc.profile.speed_at(t0)?.0) / RPM_TO_RAD_S),
        };
        summary.observe(&row, &diag, speed_error, &x);
        if k % sc.decimation as u64 == 0 || k == sc.steps {
            out.trace.push(row);
            if options.snapshots {
                out.snapshots.push(Snapshot { t: t0, state: x, inputs });
            }
        }
        if k == sc.steps {
            break;
        }

        x = rk4_step(&x, t0, sc.dt, |t, s| rates(sc, t, s, &inputs))?;
        if sc.mode == Mode::ExogenousSpeed {
            x.flat[2] = sc.profile.speed_at(t0 + sc.dt)?.0;
        }
        if sc.mode != Mode::ExogenousSpeed {
            loop_state.filter = filter_at(demand, loop_state.filter, sc.speed_loop.tau, sc.dt).0;
        }
        let current = Vector2::new(x.flat[0], x.flat[1]);
        if !(current.norm() < CURRENT_LIMIT) || !x.flat[3].is_finite() {
            return Err(Error::Divergence {
                t: t0 + sc.dt,
                detail: format!("stator current {:.3e} A exceeds the divergence guard", current.norm()),
            });
        }
        let shadow = Vector2::new(x.flat[9], x.flat[10]);
        let projected = x.rot[1].rotate_back(&current);
        summary.frame_gap((projected - shadow).norm());
        if (k + 1) % resync_every == 0 {
            x.flat[9] = projected.x;
            x.flat[10] = projected.y;
        }
    }
    out.summary = summary.finish();
    Ok(out)
}

/// Re-evaluates the closed-loop right-hand side at a recorded snapshot.
pub fn evaluate_snapshot(sc: &Scenario, snap: &Snapshot) -> Result<Point> {
    evaluate_point(sc, snap.t, &snap.state, &snap.inputs)
}
