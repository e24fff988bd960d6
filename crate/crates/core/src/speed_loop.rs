//! Outer speed loop: a discrete PI on mechanical speed followed by a
//! first-order filter that yields a C¹ torque reference and its derivative.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedLoopGains {
    /// Proportional gain [N·m·s/rad].
    pub k_p: f64,
    /// Integral gain [N·m/rad].
    pub k_i: f64,
    /// Filter time constant [s].
    pub tau: f64,
    /// Optional clamp on the demand [N·m].
    pub torque_max: Option<f64>,
}

impl SpeedLoopGains {
    pub fn benchmark() -> Self {
        Self {
            k_p: 0.018,
            k_i: 0.072,
            tau: 1e-4,
            torque_max: Some(0.5),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SpeedLoopState {
    /// PI integrator [N·m].
    pub integrator: f64,
    /// Filtered torque reference `T*` [N·m].
    pub filter: f64,
}

/// Returns the raw torque demand `k_p (ω* - ω̂) + integrator` and advances the
/// integrator by `k_i (ω* - ω̂) dt`.
///
/// With a clamp, the output saturates at `±torque_max` and the integrator is
/// frozen whenever integrating would push further into saturation.
pub fn speed_pi(
    speed_est: f64,
    speed_ref: f64,
    state: &mut SpeedLoopState,
    gains: &SpeedLoopGains,
    dt: f64,
) -> f64 {
    debug_assert!(dt > 0.0);
    let err = speed_ref - speed_est;
    let raw = gains.k_p * err + state.integrator;
    let (out, saturated) = match gains.torque_max {
        Some(m) if raw > m => (m, 1.0),
        Some(m) if raw < -m => (-m, -1.0),
        _ => (raw, 0.0),
    };
    let increment = gains.k_i * err * dt;
    if saturated == 0.0 || increment * saturated < 0.0 {
        state.integrator += increment;
    }
    out
}

/// `T*(s)` and `Ṫ*(s)` at offset `s` into a step with constant demand `raw`,
/// starting from `start`. Exact solution of `dT*/dt = (raw - T*)/τ`.
pub fn filter_at(raw: f64, start: f64, tau: f64, s: f64) -> (f64, f64) {
    let value = raw + (start - raw) * (-s / tau).exp();
    (value, (raw - value) / tau)
}

/// Advances the filter by `dt` under a constant demand and returns
/// `(T*, Ṫ*)` at the end of the step.
pub fn reference_filter(raw: f64, state: &mut SpeedLoopState, tau: f64, dt: f64) -> (f64, f64) {
    debug_assert!(tau > 0.0);
    let (value, rate) = filter_at(raw, state.filter, tau, dt);
    state.filter = value;
    (value, rate)
}
