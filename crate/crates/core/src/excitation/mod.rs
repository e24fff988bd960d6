//! Excitation analysis for the parameter-error dynamics `z' = -κ̄_z Ω Ωᵀ z`.
//!
//! The pair `(Ωᵀ, 0)` has identity transition matrix, so its observability
//! Gramian over `[τ, τ+δ]` is just `∫ Ω Ωᵀ`. This module computes it by
//! composite trapezoidal quadrature, sweeps windows for the two-sided UCO
//! bounds, and turns those bounds into the threshold, radius, recovery-time
//! and decay certificates used for the boundary-layer stability argument.

mod boundary_layer;
mod report;

pub use boundary_layer::{
    boundary_layer_sim, fast_block_norm, fast_envelope, fast_error_at, nominal_regressor, BoundaryLayerSetup,
    BoundaryLayerTrajectory, FastEnvelope,
};
pub use report::{certify, CertificateInputs, GramianReport};

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Matrix3, Matrix3x2, SymmetricEigen, Vector3};

use crate::error::{Error, Result};

/// Default fast-time window.
pub const DEFAULT_WINDOW: f64 = 2.0 * PI;
/// Default split parameter for the injection threshold.
pub const DEFAULT_RHO: f64 = 0.5;
/// Below this the lower Gramian bound is treated as zero.
pub const UCO_TOLERANCE: f64 = 1e-12;

type RegressorFn = Arc<dyn Fn(f64) -> Matrix3x2<f64> + Send + Sync>;

/// A 3×2 regressor `τ ↦ Ω(τ)` on `[0, horizon]`.
#[derive(Clone)]
pub enum RegressorSignal {
    /// Uniform samples starting at `τ = 0`.
    Sampled { step: f64, samples: Vec<Matrix3x2<f64>> },
    /// Closed-form signal integrated with node spacing at most `step`.
    Analytic { f: RegressorFn, step: f64, horizon: f64 },
}

impl std::fmt::Debug for RegressorSignal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RegressorSignal::Sampled { step, samples } => f
                .debug_struct("Sampled")
                .field("step", step)
                .field("len", &samples.len())
                .finish(),
            RegressorSignal::Analytic { step, horizon, .. } => f
                .debug_struct("Analytic")
                .field("step", step)
                .field("horizon", horizon)
                .finish(),
        }
    }
}

impl RegressorSignal {
    pub fn from_samples(step: f64, samples: Vec<Matrix3x2<f64>>) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidArgument(format!("sample step must be positive, got {step}")));
        }
        if samples.len() < 2 {
            return Err(Error::InvalidArgument("regressor needs at least two samples".into()));
        }
        if samples.iter().any(|m| m.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite("regressor samples"));
        }
        Ok(RegressorSignal::Sampled { step, samples })
    }

    pub fn analytic<F>(f: F, step: f64, horizon: f64) -> Result<Self>
    where
        F: Fn(f64) -> Matrix3x2<f64> + Send + Sync + 'static,
    {
        if !(step > 0.0 && horizon > 0.0 && step.is_finite() && horizon.is_finite()) {
            return Err(Error::InvalidArgument("step and horizon must be positive".into()));
        }
        Ok(RegressorSignal::Analytic {
            f: Arc::new(f),
            step,
            horizon,
        })
    }

    pub fn horizon(&self) -> f64 {
        match self {
            RegressorSignal::Sampled { step, samples } => step * (samples.len() - 1) as f64,
            RegressorSignal::Analytic { horizon, .. } => *horizon,
        }
    }

    pub fn step(&self) -> f64 {
        match self {
            RegressorSignal::Sampled { step, .. } | RegressorSignal::Analytic { step, .. } => *step,
        }
    }

    /// Left-multiplies every sample by `diag(scale)`.
    pub fn row_scaled(&self, scale: Vector3<f64>) -> RegressorSignal {
        let d = Matrix3::from_diagonal(&scale);
        match self {
            RegressorSignal::Sampled { step, samples } => RegressorSignal::Sampled {
                step: *step,
                samples: samples.iter().map(|m| d * m).collect(),
            },
            RegressorSignal::Analytic { f, step, horizon } => {
                let f = f.clone();
                RegressorSignal::Analytic {
                    f: Arc::new(move |t| d * f(t)),
                    step: *step,
                    horizon: *horizon,
                }
            }
        }
    }

    /// Multiplies the whole signal by `c`.
    pub fn scaled(&self, c: f64) -> RegressorSignal {
        self.row_scaled(Vector3::repeat(c))
    }
}

fn outer(m: &Matrix3x2<f64>) -> Matrix3<f64> {
    m * m.transpose()
}

/// Observability Gramian `∫_{start}^{start+δ} Ω Ωᵀ dτ` (composite trapezoid).
pub fn gramian(sig: &RegressorSignal, start: f64, delta: f64) -> Result<Matrix3<f64>> {
    if !(delta > 0.0 && delta.is_finite() && start >= 0.0 && start.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "window [{start}, {start}+{delta}] is not valid"
        )));
    }
    let horizon = sig.horizon();
    if start + delta > horizon * (1.0 + 1e-12) + 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "window [{start}, {}] exceeds signal horizon {horizon}",
            start + delta
        )));
    }
    let mut g = Matrix3::zeros();
    match sig {
        RegressorSignal::Sampled { step, samples } => {
            let i0 = (start / step).round();
            let n = (delta / step).round();
            if (i0 * step - start).abs() > 1e-6 * step || (n * step - delta).abs() > 1e-6 * step {
                return Err(Error::InvalidArgument(format!(
                    "window [{start}, {}] is not aligned with the sample step {step}",
                    start + delta
                )));
            }
            let (i0, n) = (i0 as usize, n as usize);
            if n == 0 || i0 + n >= samples.len() + usize::from(i0 + n == samples.len()) {
                return Err(Error::InvalidArgument("window exceeds samples".into()));
            }
            for k in 0..=n {
                let w = if k == 0 || k == n { 0.5 } else { 1.0 };
                g += outer(&samples[i0 + k]) * w;
            }
            g *= *step;
        }
        RegressorSignal::Analytic { f, step, .. } => {
            let n = (delta / step).ceil().max(1.0) as usize;
            let h = delta / n as f64;
            for k in 0..=n {
                let m = f(start + k as f64 * h);
                if m.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("regressor samples"));
                }
                let w = if k == 0 || k == n { 0.5 } else { 1.0 };
                g += outer(&m) * w;
            }
            g *= h;
        }
    }
    // enforce exact symmetry
    Ok((g + g.transpose()) * 0.5)
}

/// Ascending eigenvalues of a symmetric 3×3 matrix.
pub fn sorted_eigenvalues(m: &Matrix3<f64>) -> [f64; 3] {
    let ev = SymmetricEigen::new(*m).eigenvalues;
    let mut v = [ev[0], ev[1], ev[2]];
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSpectrum {
    pub start: f64,
    pub eigenvalues: [f64; 3],
    pub trace: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UcoBounds {
    pub delta: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    /// Largest Gramian trace over the sweep.
    pub max_trace: f64,
    pub windows: Vec<WindowSpectrum>,
}

impl UcoBounds {
    pub fn is_uco(&self) -> bool {
        self.alpha1 > UCO_TOLERANCE
    }
}

/// Sweeps windows `[k·stride, k·stride + δ]` inside the horizon and returns the
/// smallest and largest Gramian eigenvalues seen.
pub fn uco_bounds(sig: &RegressorSignal, delta: f64, stride: f64) -> Result<UcoBounds> {
    uco_bounds_from(sig, 0.0, delta, stride)
}

/// As [`uco_bounds`], with the first window starting at `first`.
pub fn uco_bounds_from(sig: &RegressorSignal, first: f64, delta: f64, stride: f64) -> Result<UcoBounds> {
    if !(stride > 0.0 && delta > 0.0) {
        return Err(Error::InvalidArgument("stride and window must be positive".into()));
    }
    let horizon = sig.horizon();
    if first + delta > horizon * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "signal horizon {horizon} is shorter than one window of {delta} starting at {first}"
        )));
    }
    let mut windows = Vec::new();
    let mut k = 0usize;
    loop {
        let start = first + k as f64 * stride;
        if start + delta > horizon * (1.0 + 1e-12) {
            break;
        }
        let g = gramian(sig, start, delta)?;
        windows.push(WindowSpectrum {
            start,
            eigenvalues: sorted_eigenvalues(&g),
            trace: g.trace(),
        });
        k += 1;
    }
    let alpha1 = windows.iter().map(|w| w.eigenvalues[0]).fold(f64::INFINITY, f64::min);
    let alpha2 = windows.iter().map(|w| w.eigenvalues[2]).fold(f64::NEG_INFINITY, f64::max);
    let max_trace = windows.iter().map(|w| w.trace).fold(f64::NEG_INFINITY, f64::max);
    Ok(UcoBounds {
        delta,
        alpha1,
        alpha2,
        max_trace,
        windows,
    })
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("rho must lie in (0, 1), got {rho}")))
    }
}

/// Injection amplitude above which the nominal regressor is certified PE:
/// `W* = I* √(2/ρ)`.
///
/// Over a `2π` window the quadratic form is bounded below by
/// `(π W² - 2π I*²/ρ) x₁² + 2π x₂² + 2π(1-ρ) x₃²`, so the `x₁` coefficient is
/// the only one that depends on `W`.
pub fn w_star(i_star: f64, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    if !(i_star >= 0.0 && i_star.is_finite()) {
        return Err(Error::InvalidArgument(format!("I* must be non-negative, got {i_star}")));
    }
    Ok(i_star * (2.0 / rho).sqrt())
}

/// Lower bound on the nominal Gramian (window `2π`) implied by the split above.
pub fn certified_lower_bound(injection: f64, i_star: f64, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    let x1 = PI * injection * injection - 2.0 * PI * i_star * i_star / rho;
    Ok(x1.min(2.0 * PI).min(2.0 * PI * (1.0 - rho)))
}

/// `(ρ, W*(ρ))` over a grid of split parameters, least threshold first.
pub fn rho_scan(i_star: f64, rhos: &[f64]) -> Result<Vec<(f64, f64)>> {
    let mut out = rhos
        .iter()
        .map(|&r| w_star(i_star, r).map(|w| (r, w)))
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| a.1.total_cmp(&b.1));
    Ok(out)
}

/// Largest `|(e(0), ĩ(0))|` that keeps the perturbed regressor PE with the
/// nominal lower bound: `(1/(2 a₁f)) √(β₁/2π)`.
pub fn local_pe_radius(beta1: f64, a1f: f64) -> Result<f64> {
    if !(beta1 > 0.0) {
        return Err(Error::InvalidArgument(format!("beta1 must be positive, got {beta1}")));
    }
    if !(a1f >= 1.0) {
        return Err(Error::InvalidArgument(format!("a1f must be >= 1, got {a1f}")));
    }
    Ok((beta1 / (2.0 * PI)).sqrt() / (2.0 * a1f))
}

/// Time after which an initial fast error of size `initial` has entered the
/// local-PE ball: `(1/a₂f) log(initial · 2 a₁f √(2π/β₁))`, or zero when
/// already inside.
pub fn recovery_time(beta1: f64, a1f: f64, a2f: f64, initial: f64) -> Result<f64> {
    let radius = local_pe_radius(beta1, a1f)?;
    if !(a2f > 0.0) {
        return Err(Error::InvalidArgument(format!("a2f must be positive, got {a2f}")));
    }
    if initial < radius {
        return Ok(0.0);
    }
    Ok((initial * 2.0 * a1f * (2.0 * PI / beta1).sqrt()).ln().max(0.0) / a2f)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayCertificate {
    /// Guaranteed contraction of `|z|` per window, `√(1 - 2κ̄_z α)`.
    pub factor: f64,
    /// Exponential rate `(1/2δ) log(1/(1 - 2κ̄_z α))`.
    pub rate: f64,
    /// Overshoot constant `√(1/(1 - 2κ̄_z α))`.
    pub overshoot: f64,
}

impl DecayCertificate {
    /// `overshoot · exp(-rate τ) · |z(0)|`.
    pub fn envelope(&self, tau: f64, z0: f64) -> f64 {
        self.overshoot * (-self.rate * tau).exp() * z0
    }
}

/// Exponential bound for `z' = -κ̄_z Ω Ωᵀ z` from a per-window dissipation
/// `∫ |Ωᵀ z|² ≥ α |z(τ)|²`. Requires `0 < 2 κ̄_z α < 1`.
pub fn decay_certificate(alpha: f64, delta: f64, kappa_z: f64) -> Result<DecayCertificate> {
    let q = 2.0 * kappa_z * alpha;
    if !(q > 0.0 && q < 1.0) || !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "decay certificate needs 0 < 2κ̄_z α < 1 and δ > 0 (2κ̄_z α = {q}, δ = {delta})"
        )));
    }
    let rest = 1.0 - q;
    Ok(DecayCertificate {
        factor: rest.sqrt(),
        rate: (1.0 / rest).ln() / (2.0 * delta),
        overshoot: (1.0 / rest).sqrt(),
    })
}

/// Per-window dissipation constant for `z' = -κ Ω Ωᵀ z` given the Gramian
/// lower bound `α₁` of `Ω` and the largest window trace:
/// `α = α₁ / (1 + κ · trace)²`.
///
/// With `y = Ωᵀ z`, `z(s) = z(τ) - κ ∫ Ω y`, so
/// `‖Ωᵀ z(τ)‖ ≤ (1 + κ trace) ‖y‖` on the window. The resulting `2κα` never
/// exceeds 1/2.
pub fn dissipation_bound(alpha1: f64, max_trace: f64, kappa: f64) -> f64 {
    alpha1.max(0.0) / (1.0 + kappa * max_trace).powi(2)
}
