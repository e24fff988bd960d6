use std::f64::consts::PI;

use nalgebra::Vector3;
use num_complex::Complex64;

use crate::error::{ensure_finite, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerGains {
    /// Attitude observer correction gain `k_η`.
    pub k_eta: f64,
    /// Inverse-flux adaptation gain `γ`.
    pub gamma: f64,
    /// Current observer gain `k_p` [1/s].
    pub k_p: f64,
    /// Tracking gain `k_e` [1/s].
    pub k_e: f64,
    /// Diagonal of the I&I gain `K_z` (resistance channel first).
    pub k_z: Vector3<f64>,
    /// Injection frequency `λ` [rad/s].
    pub lambda: f64,
}

/// Time-scale-free constants `κ̄_e, κ̄_p, κ̄_z` with
/// `λ = k_e/κ̄_e = k_p/κ̄_p = K_z/(L κ̄_z) = 1/ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FastScaling {
    pub kappa_e: f64,
    pub kappa_p: f64,
    pub kappa_z: Vector3<f64>,
}

impl ControllerGains {
    /// UAV benchmark tuning: 2 kHz injection, `K_z = diag{0.005, 0.75, 0.75}`,
    /// slow poles at `(-1 ± i/3)·10²` for χ at 3500 rpm.
    pub fn benchmark() -> Self {
        Self {
            k_eta: 34.75,
            gamma: 335.34,
            k_p: 3.93e3,
            k_e: 1.964e3,
            k_z: Vector3::new(0.005, 0.75, 0.75),
            lambda: 2.0 * PI * 2000.0,
        }
    }

    pub fn from_epsilon(epsilon: f64, scaling: &FastScaling, inductance: f64, k_eta: f64, gamma: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
        }
        let g = Self {
            k_eta,
            gamma,
            k_p: scaling.kappa_p / epsilon,
            k_e: scaling.kappa_e / epsilon,
            k_z: scaling.kappa_z * (inductance / epsilon),
            lambda: 1.0 / epsilon,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn epsilon(&self) -> f64 {
        1.0 / self.lambda
    }

    pub fn fast_scaling(&self, inductance: f64) -> FastScaling {
        FastScaling {
            kappa_e: self.k_e / self.lambda,
            kappa_p: self.k_p / self.lambda,
            kappa_z: self.k_z / (inductance * self.lambda),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.k_eta,
            self.gamma,
            self.k_p,
            self.k_e,
            self.k_z.x,
            self.k_z.y,
            self.k_z.z,
            self.lambda,
        ];
        ensure_finite(&all, "controller gains")?;
        if all.iter().any(|g| *g <= 0.0) {
            return Err(Error::Config(format!("all controller gains must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// Places the poles of the slow-loop linearization `s² + k_η χ s + γ χ²`.
///
/// Accepts a complex-conjugate pair or two real poles, all in the open left
/// half-plane. Returns `(k_η, γ)`.
pub fn gains_from_poles(p1: Complex64, p2: Complex64, chi: f64) -> Result<(f64, f64)> {
    if !(chi > 0.0 && chi.is_finite()) {
        return Err(Error::InvalidArgument(format!("chi must be positive, got {chi}")));
    }
    if ![p1.re, p1.im, p2.re, p2.im].iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite pole".into()));
    }
    let scale = p1.norm().max(p2.norm()).max(1.0);
    let tol = 1e-9 * scale;
    let conjugate = (p1.re - p2.re).abs() <= tol && (p1.im + p2.im).abs() <= tol;
    let both_real = p1.im.abs() <= tol && p2.im.abs() <= tol;
    if !(conjugate || both_real) {
        return Err(Error::InvalidArgument(format!(
            "poles {p1} and {p2} are not a conjugate pair"
        )));
    }
    if p1.re >= 0.0 || p2.re >= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "poles {p1} and {p2} are not in the open left half-plane"
        )));
    }
    let sum = (p1 + p2).re;
    let product = (p1 * p2).re;
    Ok((-sum / chi, product / (chi * chi)))
}
