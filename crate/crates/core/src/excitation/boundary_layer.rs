//! Fast-time boundary-layer system and its linear `(e, ĩ)` block.
//!
//! With `λ = 1/ε` and gains scaled as `k_e = κ_e/ε`, `k_p = κ_p/ε`,
//! `K_z = L κ̄_z/ε`, fast time `τ = t/ε` gives
//!
//! ```text
//! e'  = -κ_e e + κ_p ĩ
//! ĩ'  = -κ_p ĩ
//! z'  = -κ̄_z Ω(i* + e + ĩ) Ω(i* + e + ĩ)ᵀ z
//! w'  = (w₂, -w₁)
//! ```
//!
//! with `i* = (w₁, i_q*)` and the slow variables frozen.

use nalgebra::{Matrix3x2, Vector2, Vector3};

use super::RegressorSignal;
use crate::error::{Error, Result};
use crate::observer::regressor;
use crate::sim::integrator::{rk4_step, Bundle, Rates};
use crate::so2::UnitVec;

/// `(e(τ), ĩ(τ))` from the closed-form solution of the linear fast block.
pub fn fast_error_at(
    e0: &Vector2<f64>,
    i_tilde0: &Vector2<f64>,
    kappa_e: f64,
    kappa_p: f64,
    tau: f64,
) -> (Vector2<f64>, Vector2<f64>) {
    let (p, q, r) = block_entries(kappa_e, kappa_p, tau);
    (e0 * p + i_tilde0 * q, i_tilde0 * r)
}

/// Entries `(p, q, r)` of `exp(A τ) = [[p, q], [0, r]]` for
/// `A = [[-κ_e, κ_p], [0, -κ_p]]`.
fn block_entries(a: f64, c: f64, tau: f64) -> (f64, f64, f64) {
    let ea = (-a * tau).exp();
    let ec = (-c * tau).exp();
    let gap = a - c;
    let q = if gap.abs() <= 1e-9 * a.abs().max(c.abs()) {
        c * tau * ea
    } else {
        c * (ec - ea) / gap
    };
    (ea, q, ec)
}

/// Spectral norm of `exp(A_f τ)`. The 4×4 block is the 2×2 matrix above
/// tensored with `I₂`, so the norms coincide.
pub fn fast_block_norm(kappa_e: f64, kappa_p: f64, tau: f64) -> f64 {
    let (p, q, r) = block_entries(kappa_e, kappa_p, tau);
    let s = p * p + q * q + r * r;
    let det = p * r;
    ((s + (s * s - 4.0 * det * det).max(0.0).sqrt()) / 2.0).sqrt()
}

/// Exponential envelope `‖exp(A_f τ)‖ ≤ a₁f e^{-a₂f τ}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FastEnvelope {
    pub a1f: f64,
    pub a2f: f64,
}

/// Fits the envelope for a given decay rate, or `0.9 · min(κ_e, κ_p)` when
/// `a2f` is `None`. `a₁f` is the supremum of `‖exp(A_f τ)‖ e^{a₂f τ}`.
pub fn fast_envelope(kappa_e: f64, kappa_p: f64, a2f: Option<f64>) -> Result<FastEnvelope> {
    if !(kappa_e > 0.0 && kappa_p > 0.0 && kappa_e.is_finite() && kappa_p.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "fast-block gains must be positive, got κ_e = {kappa_e}, κ_p = {kappa_p}"
        )));
    }
    let slowest = kappa_e.min(kappa_p);
    let a2f = a2f.unwrap_or(0.9 * slowest);
    if !(a2f > 0.0 && a2f < slowest) {
        return Err(Error::InvalidArgument(format!(
            "a2f must lie in (0, {slowest}), got {a2f}"
        )));
    }
    let a1f = weighted_sup(|t| fast_block_norm(kappa_e, kappa_p, t), a2f, slowest);
    Ok(FastEnvelope { a1f, a2f })
}

/// `sup_{τ ≥ 0} n(τ) e^{a₂ τ}` by a dense grid followed by golden-section
/// refinement around the best grid point.
pub(crate) fn weighted_sup<F: Fn(f64) -> f64>(n: F, a2: f64, slowest: f64) -> f64 {
    let g = |t: f64| n(t) * (a2 * t).exp();
    let horizon = 60.0 / (slowest - a2);
    let cells = 20_000usize;
    let h = horizon / cells as f64;
    let (mut best_k, mut best) = (0usize, g(0.0));
    for k in 1..=cells {
        let v = g(k as f64 * h);
        if v > best {
            best = v;
            best_k = k;
        }
    }
    let mut lo = (best_k as f64 - 1.0).max(0.0) * h;
    let mut hi = (best_k as f64 + 1.0) * h;
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        let m1 = hi - ratio * (hi - lo);
        let m2 = lo + ratio * (hi - lo);
        if g(m1) < g(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    best.max(g(0.5 * (lo + hi)))
}

/// Perturbed regressor `Ω(i* + e + ĩ)` along the closed-form fast solution,
/// with `w(τ) = (W cos τ, -W sin τ)`.
#[allow(clippy::too_many_arguments)]
pub fn nominal_regressor(
    injection: f64,
    iq: f64,
    e0: Vector2<f64>,
    i_tilde0: Vector2<f64>,
    kappa_e: f64,
    kappa_p: f64,
    step: f64,
    horizon: f64,
) -> Result<RegressorSignal> {
    RegressorSignal::analytic(
        move |tau| {
            let (e, it) = fast_error_at(&e0, &i_tilde0, kappa_e, kappa_p, tau);
            let i_ref = Vector2::new(injection * tau.cos(), iq);
            regressor(&(i_ref + e + it))
        },
        step,
        horizon,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryLayerSetup {
    pub w0: Vector2<f64>,
    pub iq: f64,
    pub kappa_e: f64,
    pub kappa_p: f64,
    pub kappa_z: Vector3<f64>,
    pub e0: Vector2<f64>,
    pub i_tilde0: Vector2<f64>,
    pub z0: Vector3<f64>,
    pub horizon: f64,
    pub step: f64,
    /// Keep every n-th integration step.
    pub record_every: usize,
}

impl BoundaryLayerSetup {
    /// Benchmark-like defaults: `W = 2`, `i_q* = 3`, unit `κ`s.
    pub fn new(injection: f64, iq: f64) -> Self {
        BoundaryLayerSetup {
            w0: Vector2::new(injection, 0.0),
            iq,
            kappa_e: 1.0,
            kappa_p: 1.0,
            kappa_z: Vector3::new(1.0, 1.0, 1.0),
            e0: Vector2::zeros(),
            i_tilde0: Vector2::zeros(),
            z0: Vector3::new(1.0, 1.0, 1.0),
            horizon: 40.0 * std::f64::consts::PI,
            step: 1e-3,
            record_every: 10,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct BoundaryLayerTrajectory {
    pub tau: Vec<f64>,
    pub e: Vec<Vector2<f64>>,
    pub i_tilde: Vec<Vector2<f64>>,
    pub z: Vec<Vector3<f64>>,
    pub w: Vec<Vector2<f64>>,
    pub iq: f64,
}

impl BoundaryLayerTrajectory {
    pub fn regressor_at(&self, k: usize) -> Matrix3x2<f64> {
        let i = Vector2::new(self.w[k].x, self.iq) + self.e[k] + self.i_tilde[k];
        regressor(&i)
    }

    /// The recorded regressor as a sampled signal.
    pub fn regressor_signal(&self) -> Result<RegressorSignal> {
        if self.tau.len() < 2 {
            return Err(Error::InvalidArgument("trajectory too short".into()));
        }
        let step = self.tau[1] - self.tau[0];
        RegressorSignal::from_samples(step, (0..self.tau.len()).map(|k| self.regressor_at(k)).collect())
    }

    pub fn fast_norm(&self, k: usize) -> f64 {
        (self.e[k].norm_squared() + self.i_tilde[k].norm_squared()).sqrt()
    }
}

/// Integrates the boundary-layer system with RK4; `w` is carried as an exact
/// rotation of `w0`.
pub fn boundary_layer_sim(setup: &BoundaryLayerSetup) -> Result<BoundaryLayerTrajectory> {
    let BoundaryLayerSetup {
        w0,
        iq,
        kappa_e,
        kappa_p,
        kappa_z,
        e0,
        i_tilde0,
        z0,
        horizon,
        step,
        record_every,
    } = setup.clone();
    if !(step > 0.0 && horizon > step && record_every > 0) {
        return Err(Error::InvalidArgument("boundary-layer step, horizon and decimation must be positive".into()));
    }
    if !(kappa_e > 0.0 && kappa_p > 0.0 && kappa_z.iter().all(|&k| k > 0.0)) {
        return Err(Error::InvalidArgument("boundary-layer gains must be positive".into()));
    }
    let amplitude = w0.norm();
    let w_of = |phase: &UnitVec| {
        if amplitude > 0.0 {
            phase.as_vector() * amplitude
        } else {
            Vector2::zeros()
        }
    };
    let phase0 = UnitVec::new(w0.x, w0.y).unwrap_or(UnitVec::IDENTITY);

    let mut x = Bundle::<7, 1> {
        flat: [e0.x, e0.y, i_tilde0.x, i_tilde0.y, z0.x, z0.y, z0.z],
        rot: [phase0],
    };
    let steps = (horizon / step).round() as usize;
    let mut out = BoundaryLayerTrajectory {
        iq,
        ..Default::default()
    };
    let mut record = |k: usize, x: &Bundle<7, 1>| {
        let f = &x.flat;
        out.tau.push(k as f64 * step);
        out.e.push(Vector2::new(f[0], f[1]));
        out.i_tilde.push(Vector2::new(f[2], f[3]));
        out.z.push(Vector3::new(f[4], f[5], f[6]));
        out.w.push(w_of(&x.rot[0]));
    };
    record(0, &x);
    for k in 0..steps {
        x = rk4_step(&x, k as f64 * step, step, |_, b| {
            let f = &b.flat;
            let e = Vector2::new(f[0], f[1]);
            let it = Vector2::new(f[2], f[3]);
            let z = Vector3::new(f[4], f[5], f[6]);
            let w = w_of(&b.rot[0]);
            let om = regressor(&(Vector2::new(w.x, iq) + e + it));
            let de = -e * kappa_e + it * kappa_p;
            let di = -it * kappa_p;
            let dz = -(om * (om.transpose() * z)).component_mul(&kappa_z);
            Ok(Rates {
                flat: [de.x, de.y, di.x, di.y, dz.x, dz.y, dz.z],
                rot: [-1.0],
            })
        })?;
        if (k + 1) % record_every == 0 {
            record(k + 1, &x);
        }
    }
    Ok(out)
}
