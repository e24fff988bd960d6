//! Error coordinates computed from simulation ground truth. Nothing here is
//! ever fed back to the controller.

use nalgebra::{Matrix2, Vector2, Vector3};

use super::{beta, tracking_error, ObserverState};
use crate::so2::{j_times, UnitVec};

/// Plant quantities only a simulator knows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruth {
    pub rotor: UnitVec,
    /// Electrical speed [rad/s].
    pub omega: f64,
    pub current_static: Vector2<f64>,
    pub resistance: f64,
    pub flux: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    /// Synchronization error `η = Cᵀ[ζ̂_χ] ζ_χ`.
    pub eta: UnitVec,
    /// `ξ = sgn(ω)/φ`.
    pub xi: f64,
    pub xi_tilde: f64,
    /// `z = θ̂ + β(i_χ̂) - θ`.
    pub z: Vector3<f64>,
    /// `ĩ = i_χ̂ - î`.
    pub i_tilde: Vector2<f64>,
    /// `e = î - (w₁, i_q*)`.
    pub e: Vector2<f64>,
    /// `χ = |ω| φ` [V].
    pub chi: f64,
    /// `h = -χ J η` [V].
    pub h: Vector2<f64>,
    /// `ω_η = χ ξ - ω̂_χ`.
    pub omega_eta: f64,
    /// `atan2(η₂, η₁)`.
    pub theta_err: f64,
    /// True current in the estimated frame.
    pub current_frame: Vector2<f64>,
}

impl Diagnostics {
    /// `|(e, ĩ, z)|`.
    pub fn fast_norm(&self) -> f64 {
        (self.e.norm_squared() + self.i_tilde.norm_squared() + self.z.norm_squared()).sqrt()
    }

    /// Trend surrogate `|angle(η)| + |ξ̃|`; not a proper indicator.
    pub fn sigma_hat(&self) -> f64 {
        self.theta_err.abs() + self.xi_tilde.abs()
    }
}

pub fn compute_diagnostics(
    truth: &GroundTruth,
    s: &ObserverState,
    omega_hat: f64,
    iq_ref: f64,
    k_z: &Vector3<f64>,
) -> Diagnostics {
    let sign = if truth.omega < 0.0 { -1.0 } else { 1.0 };
    let chi = truth.omega.abs() * truth.flux;
    let xi = sign / truth.flux;
    let zeta_chi = truth.rotor.signed(sign);
    let eta = s.frame.inverse().mul(&zeta_chi);
    let h = -j_times(&eta.as_vector()) * chi;
    let i = s.frame.rotate_back(&truth.current_static);
    let theta = Vector3::new(truth.resistance, h.x, h.y);
    Diagnostics {
        eta,
        xi,
        xi_tilde: xi - s.xi_hat,
        z: s.theta + beta(&i, k_z) - theta,
        i_tilde: i - s.current,
        e: tracking_error(s, iq_ref),
        chi,
        h,
        omega_eta: chi * xi - omega_hat,
        theta_err: eta.angle(),
        current_frame: i,
    }
}

/// Drift `f_θ = dθ/dt` of the true parameter vector, from `χ̇` and `ω_η`:
/// `dh/dt = -χ̇ J η + χ ω_η η`.
pub fn parameter_drift(eta: &UnitVec, chi: f64, chi_rate: f64, omega_eta: f64) -> Vector3<f64> {
    let e = eta.as_vector();
    let dh = -j_times(&e) * chi_rate + e * (chi * omega_eta);
    Vector3::new(0.0, dh.x, dh.y)
}

/// Certainty-equivalence slow dynamics: returns `(ω_η, dξ̃/dt)` with
/// `η̇ = (χ ξ̃ - k_η χ η₂) J η` and `dξ̃/dt = -γ χ η₂`.
pub fn slow_error_rates(eta: &UnitVec, xi_tilde: f64, chi: f64, k_eta: f64, gamma: f64) -> (f64, f64) {
    (chi * xi_tilde - k_eta * chi * eta.s, -gamma * chi * eta.s)
}

/// Linearization of the slow dynamics at `(η, ξ̃) = ((1, 0), 0)` in
/// `(angle(η), ξ̃)` coordinates.
pub fn slow_jacobian(chi: f64, k_eta: f64, gamma: f64) -> Matrix2<f64> {
    Matrix2::new(-k_eta * chi, chi, -gamma * chi, 0.0)
}
