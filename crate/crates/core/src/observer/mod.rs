//! Mixed sensorless controller-observer.
//!
//! Slow part: an adaptive attitude observer on S¹ that drives the estimated
//! frame `ζ̂_χ` and the signed inverse flux `ξ̂` from a back-EMF estimate `ĥ`.
//! Fast part: an Immersion-and-Invariance current observer whose offset
//! `β(i) = K_z (-|i|²/2, i)` turns the resistance/back-EMF error into a
//! gradient flow, a sinusoidal exosystem injecting d-axis current, and a
//! proportional voltage law that makes the estimated current track
//! `(w₁, i_q*)`.
//!
//! Everything here sees only what the drive can measure: stator currents,
//! the applied voltage, `L`, `p` and the torque reference. Ground-truth
//! quantities enter only through [`diagnostics`].

mod diagnostics;
mod gains;

pub use diagnostics::{
    compute_diagnostics, parameter_drift, slow_error_rates, slow_jacobian, Diagnostics, GroundTruth,
};
pub use gains::{gains_from_poles, ControllerGains, FastScaling};

use nalgebra::{Matrix3, Matrix3x2, Vector2, Vector3};

use crate::error::{ensure_finite, Error, Result};
use crate::so2::{j_times, UnitVec};

/// Default initial inverse-flux estimate [Wb⁻¹].
pub const DEFAULT_XI_HAT0: f64 = 802.29;
/// Default injection amplitude [A].
pub const DEFAULT_INJECTION: f64 = 2.0;
/// Floor on `|ξ̂|` used only for displayed flux/torque estimates [Wb⁻¹].
pub const DEFAULT_XI_FLOOR: f64 = 1e-6;

/// Motor constants the controller is allowed to know.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnownParams {
    pub inductance: f64,
    pub pole_pairs: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverState {
    /// Estimated χ-frame `ζ̂_χ`.
    pub frame: UnitVec,
    /// Signed inverse flux estimate `ξ̂` [Wb⁻¹].
    pub xi_hat: f64,
    /// Current estimate `î` in the estimated frame [A].
    pub current: Vector2<f64>,
    /// Auxiliary parameter state `θ̂` (resistance channel, two back-EMF channels).
    pub theta: Vector3<f64>,
    /// Exosystem state [A].
    pub w: Vector2<f64>,
}

impl ObserverState {
    /// Zero estimates, identity frame, `w(0) = (injection, 0)`.
    pub fn initial(xi_hat: f64, injection: f64) -> Self {
        Self {
            frame: UnitVec::IDENTITY,
            xi_hat,
            current: Vector2::zeros(),
            theta: Vector3::zeros(),
            w: Vector2::new(injection, 0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite(
            &[
                self.frame.c,
                self.frame.s,
                self.xi_hat,
                self.current.x,
                self.current.y,
                self.theta.x,
                self.theta.y,
                self.theta.z,
                self.w.x,
                self.w.y,
            ],
            "observer state",
        )
    }
}

impl Default for ObserverState {
    fn default() -> Self {
        Self::initial(DEFAULT_XI_HAT0, DEFAULT_INJECTION)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimates {
    /// `R̂` [Ω].
    pub resistance: f64,
    /// `ĥ` [V].
    pub back_emf: Vector2<f64>,
    /// Signed electrical speed `|ĥ| ξ̂` [rad/s].
    pub speed: f64,
    /// `φ̂ = 1/|ξ̂|` [Wb].
    pub flux: f64,
    /// Rotor orientation `ζ̂ = ζ̂_χ sgn(ξ̂)`.
    pub rotor: UnitVec,
    /// `T̂_el = (3/2) p i_χ̂₂ / ξ̂` [N·m].
    pub torque: f64,
}

/// `Ω(i)`, the 3×2 regressor with `Ωᵀ = [-i  I₂]`.
pub fn regressor(i: &Vector2<f64>) -> Matrix3x2<f64> {
    Matrix3x2::new(-i.x, -i.y, 1.0, 0.0, 0.0, 1.0)
}

/// `β(i) = K_z (-|i|²/2, i₁, i₂)`.
pub fn beta(i: &Vector2<f64>, k_z: &Vector3<f64>) -> Vector3<f64> {
    Vector3::new(-0.5 * i.norm_squared(), i.x, i.y).component_mul(k_z)
}

/// `∂β/∂i = K_z Ω(i)`.
pub fn beta_jacobian(i: &Vector2<f64>, k_z: &Vector3<f64>) -> Matrix3x2<f64> {
    Matrix3::from_diagonal(k_z) * regressor(i)
}

/// `ĥ = θ̂₂:₃ + K_z i` (back-EMF channels of the gain).
pub fn back_emf_estimate(theta: &Vector3<f64>, i: &Vector2<f64>, k_z: &Vector3<f64>) -> Vector2<f64> {
    Vector2::new(theta.y + k_z.y * i.x, theta.z + k_z.z * i.y)
}

/// Returns `(ω̂_χ, dξ̂/dt)` with `ω̂_χ = |ĥ| ξ̂ + k_η ĥ₁` and `dξ̂/dt = γ ĥ₁`.
pub fn attitude_observer_derivative(h_hat: &Vector2<f64>, xi_hat: f64, gains: &ControllerGains) -> (f64, f64) {
    let omega = h_hat.norm() * xi_hat + gains.k_eta * h_hat.x;
    (omega, gains.gamma * h_hat.x)
}

/// Residual `Ωᵀ(θ̂+β) + u - L ω̂_χ J i` shared by the current observer and its adaptation law [V].
fn prediction_residual(
    s: &ObserverState,
    i: &Vector2<f64>,
    u: &Vector2<f64>,
    omega_hat: f64,
    known: &KnownParams,
    k_z: &Vector3<f64>,
) -> Vector2<f64> {
    let offset = s.theta + beta(i, k_z);
    regressor(i).transpose() * offset + u - j_times(i) * (known.inductance * omega_hat)
}

/// I&I current observer: returns `(dî/dt, dθ̂/dt)`.
pub fn current_observer_derivative(
    s: &ObserverState,
    i_meas: &Vector2<f64>,
    u: &Vector2<f64>,
    omega_hat: f64,
    known: &KnownParams,
    gains: &ControllerGains,
) -> (Vector2<f64>, Vector3<f64>) {
    let l = known.inductance;
    let r = prediction_residual(s, i_meas, u, omega_hat, known, &gains.k_z);
    let di = r / l + (i_meas - s.current) * gains.k_p;
    let dtheta = -(beta_jacobian(i_meas, &gains.k_z) * r) / l;
    (di, dtheta)
}

/// Parameter, speed, flux and torque estimates.
///
/// Fails with [`Error::UndefinedFlux`] when `ξ̂ = 0`. For `0 < |ξ̂| < xi_floor`
/// the displayed flux and torque use the floor.
pub fn extract_estimates(
    s: &ObserverState,
    i_meas: &Vector2<f64>,
    k_z: &Vector3<f64>,
    pole_pairs: u32,
    xi_floor: f64,
) -> Result<Estimates> {
    if s.xi_hat == 0.0 {
        return Err(Error::UndefinedFlux);
    }
    let back_emf = back_emf_estimate(&s.theta, i_meas, k_z);
    let sign = s.xi_hat.signum();
    let xi_display = sign * s.xi_hat.abs().max(xi_floor);
    Ok(Estimates {
        resistance: s.theta.x - 0.5 * k_z.x * i_meas.norm_squared(),
        back_emf,
        speed: back_emf.norm() * s.xi_hat,
        flux: 1.0 / xi_display.abs(),
        rotor: s.frame.signed(sign),
        torque: 1.5 * pole_pairs as f64 * i_meas.y / xi_display,
    })
}

/// `i_q* = (2/3p) ξ̂ T*` and its derivative `p_q* = (2/3p)(ξ̂̇ T* + ξ̂ Ṫ*)`.
pub fn reference_signals(xi_hat: f64, xi_hat_rate: f64, torque_ref: f64, torque_ref_rate: f64, pole_pairs: u32) -> (f64, f64) {
    let k = 2.0 / (3.0 * pole_pairs as f64);
    (k * xi_hat * torque_ref, k * (xi_hat_rate * torque_ref + xi_hat * torque_ref_rate))
}

/// `dw/dt = [[0, λ], [-λ, 0]] w`.
pub fn exosystem_derivative(w: &Vector2<f64>, lambda: f64) -> Vector2<f64> {
    Vector2::new(lambda * w.y, -lambda * w.x)
}

/// Exact exosystem flow over `dt` (a rotation by `-λ dt`). The amplitude is
/// restored after the rotation so `|w|` does not drift.
pub fn exosystem_step(w: &Vector2<f64>, lambda: f64, dt: f64) -> Vector2<f64> {
    let r = UnitVec::from_angle(-lambda * dt).rotate(w);
    let n = r.norm();
    if n > 0.0 {
        r * (w.norm() / n)
    } else {
        r
    }
}

/// `e = î - (w₁, i_q*)`.
pub fn tracking_error(s: &ObserverState, iq_ref: f64) -> Vector2<f64> {
    s.current - Vector2::new(s.w.x, iq_ref)
}

/// `u_χ̂ = -Ωᵀ(θ̂+β) + L ω̂_χ J i - L k_e e + L (λ w₂, p_q*)`.
pub fn control_voltage(
    s: &ObserverState,
    i_meas: &Vector2<f64>,
    omega_hat: f64,
    iq_ref: f64,
    pq_ref: f64,
    known: &KnownParams,
    gains: &ControllerGains,
) -> Vector2<f64> {
    let l = known.inductance;
    let offset = s.theta + beta(i_meas, &gains.k_z);
    let e = tracking_error(s, iq_ref);
    -(regressor(i_meas).transpose() * offset) + j_times(i_meas) * (l * omega_hat) - e * (l * gains.k_e)
        + Vector2::new(gains.lambda * s.w.y, pq_ref) * l
}

/// Everything the controller-observer produces at one evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverOutput {
    /// Measured current in the estimated frame [A].
    pub current_frame: Vector2<f64>,
    /// Commanded voltage in the estimated frame [V].
    pub voltage_frame: Vector2<f64>,
    /// Commanded voltage in the static frame [V].
    pub voltage_static: Vector2<f64>,
    pub h_hat: Vector2<f64>,
    pub omega_hat: f64,
    pub xi_hat_rate: f64,
    pub iq_ref: f64,
    pub pq_ref: f64,
    pub current_rate: Vector2<f64>,
    pub theta_rate: Vector3<f64>,
    pub w_rate: Vector2<f64>,
}

/// Full controller-observer right-hand side from a static-frame current
/// measurement and the torque reference with its derivative.
pub fn evaluate(
    s: &ObserverState,
    current_static: &Vector2<f64>,
    torque_ref: f64,
    torque_ref_rate: f64,
    known: &KnownParams,
    gains: &ControllerGains,
) -> ObserverOutput {
    let i = s.frame.rotate_back(current_static);
    let h_hat = back_emf_estimate(&s.theta, &i, &gains.k_z);
    let (omega_hat, xi_hat_rate) = attitude_observer_derivative(&h_hat, s.xi_hat, gains);
    let (iq_ref, pq_ref) = reference_signals(s.xi_hat, xi_hat_rate, torque_ref, torque_ref_rate, known.pole_pairs);
    let u = control_voltage(s, &i, omega_hat, iq_ref, pq_ref, known, gains);
    let (current_rate, theta_rate) = current_observer_derivative(s, &i, &u, omega_hat, known, gains);
    ObserverOutput {
        current_frame: i,
        voltage_frame: u,
        voltage_static: s.frame.rotate(&u),
        h_hat,
        omega_hat,
        xi_hat_rate,
        iq_ref,
        pq_ref,
        current_rate,
        theta_rate,
        w_rate: exosystem_derivative(&s.w, gains.lambda),
    }
}
