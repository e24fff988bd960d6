use std::fmt;
use std::path::Path;

use nalgebra::{Matrix3x2, Vector2, Vector3};

use super::{
    decay_certificate, dissipation_bound, fast_envelope, local_pe_radius, nominal_regressor, recovery_time,
    uco_bounds, uco_bounds_from, w_star, DecayCertificate, RegressorSignal, UcoBounds, WindowSpectrum,
    DEFAULT_RHO, DEFAULT_WINDOW,
};
use crate::error::{Error, Result};

const REGRESSOR_HEADER: [&str; 7] = ["tau", "o11", "o21", "o31", "o12", "o22", "o32"];

/// Inputs for certifying the benchmark's fast excitation.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateInputs {
    pub injection: f64,
    /// Largest `|i_q*|` the reference can request.
    pub i_star: f64,
    pub rho: f64,
    pub kappa_e: f64,
    pub kappa_p: f64,
    pub kappa_z: Vector3<f64>,
    pub e0: Vector2<f64>,
    pub i_tilde0: Vector2<f64>,
    /// Envelope decay rate; `None` picks `0.9 · min(κ_e, κ_p)`.
    pub a2f: Option<f64>,
    pub delta: f64,
    /// Number of windows swept after the recovery time.
    pub windows: usize,
    /// Quadrature node spacing.
    pub step: f64,
}

impl CertificateInputs {
    pub fn new(injection: f64, i_star: f64) -> Self {
        CertificateInputs {
            injection,
            i_star,
            rho: DEFAULT_RHO,
            kappa_e: 1.0,
            kappa_p: 1.0,
            kappa_z: Vector3::new(1.0, 1.0, 1.0),
            e0: Vector2::zeros(),
            i_tilde0: Vector2::zeros(),
            a2f: None,
            delta: DEFAULT_WINDOW,
            windows: 8,
            step: DEFAULT_WINDOW / 2048.0,
        }
    }
}

/// Threshold and fast-envelope figures; only available when the report was
/// built from controller settings rather than a bare regressor.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdFigures {
    pub injection: f64,
    pub i_star: f64,
    pub rho: f64,
    pub w_star: f64,
    pub beta1: f64,
    pub a1f: f64,
    pub a2f: f64,
    pub local_pe_radius: Option<f64>,
    pub recovery_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramianReport {
    pub delta: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub uco: bool,
    pub dissipation: f64,
    pub decay: Option<DecayCertificate>,
    pub threshold: Option<ThresholdFigures>,
    pub windows: Vec<WindowSpectrum>,
}

impl GramianReport {
    /// Report for a recorded regressor, already scaled by `κ̄_z^{1/2}` if needed.
    pub fn from_signal(sig: &RegressorSignal, delta: f64, stride: f64) -> Result<Self> {
        let bounds = uco_bounds(sig, delta, stride)?;
        Ok(Self::from_bounds(bounds, None))
    }

    fn from_bounds(bounds: UcoBounds, threshold: Option<ThresholdFigures>) -> Self {
        let dissipation = dissipation_bound(bounds.alpha1, bounds.max_trace, 1.0);
        let decay = if bounds.is_uco() {
            decay_certificate(dissipation, bounds.delta, 1.0).ok()
        } else {
            None
        };
        GramianReport {
            delta: bounds.delta,
            alpha1: bounds.alpha1,
            alpha2: bounds.alpha2,
            uco: bounds.is_uco(),
            dissipation,
            decay,
            threshold,
            windows: bounds.windows,
        }
    }

    /// Writes `window_start,lambda_min,lambda_mid,lambda_max`.
    pub fn write_eigen_csv(&self, path: &Path) -> Result<()> {
        let csv_err = |source| Error::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record(["window_start", "lambda_min", "lambda_mid", "lambda_max"])
            .map_err(csv_err)?;
        for win in &self.windows {
            let [a, b, c] = win.eigenvalues;
            w.write_record(&[fmt_num(win.start), fmt_num(a), fmt_num(b), fmt_num(c)])
                .map_err(csv_err)?;
        }
        w.flush().map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), fmt_num)
}

impl fmt::Display for GramianReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "delta: {}", fmt_num(self.delta))?;
        writeln!(f, "alpha1: {}", fmt_num(self.alpha1))?;
        writeln!(f, "alpha2: {}", fmt_num(self.alpha2))?;
        writeln!(f, "uco: {}", self.uco)?;
        if let Some(t) = &self.threshold {
            writeln!(f, "injection: {}", fmt_num(t.injection))?;
            writeln!(f, "i_star: {}", fmt_num(t.i_star))?;
            writeln!(f, "rho: {}", fmt_num(t.rho))?;
            writeln!(f, "w_star: {}", fmt_num(t.w_star))?;
            writeln!(f, "beta1: {}", fmt_num(t.beta1))?;
            writeln!(f, "a1f: {}", fmt_num(t.a1f))?;
            writeln!(f, "a2f: {}", fmt_num(t.a2f))?;
            writeln!(f, "local_pe_radius: {}", opt(t.local_pe_radius))?;
            writeln!(f, "recovery_time: {}", opt(t.recovery_time))?;
        }
        writeln!(f, "dissipation: {}", fmt_num(self.dissipation))?;
        writeln!(f, "contraction_factor: {}", opt(self.decay.map(|d| d.factor)))?;
        writeln!(f, "decay_rate: {}", opt(self.decay.map(|d| d.rate)))?;
        writeln!(f, "overshoot: {}", opt(self.decay.map(|d| d.overshoot)))
    }
}

/// Full excitation certificate for the benchmark's fast subsystem.
///
/// The nominal (`e = ĩ = 0`) Gramian gives `β₁`; the perturbed regressor,
/// swept from the recovery time on, gives `α₁`, `α₂` and the decay figures.
/// Both are taken on `κ̄_z^{1/2} Ω` so the decay is in the weighted norm.
pub fn certify(inputs: &CertificateInputs) -> Result<GramianReport> {
    let CertificateInputs {
        injection,
        i_star,
        rho,
        kappa_e,
        kappa_p,
        kappa_z,
        e0,
        i_tilde0,
        a2f,
        delta,
        windows,
        step,
    } = inputs.clone();
    if kappa_z.iter().any(|&k| !(k > 0.0)) {
        return Err(Error::InvalidArgument("κ̄_z entries must be positive".into()));
    }
    if windows == 0 {
        return Err(Error::InvalidArgument("at least one window is required".into()));
    }
    let w_star = w_star(i_star, rho)?;
    let scale = kappa_z.map(f64::sqrt);
    let stride = delta / 8.0;

    let nominal = nominal_regressor(injection, i_star, Vector2::zeros(), Vector2::zeros(), kappa_e, kappa_p, step, 2.0 * delta)?
        .row_scaled(scale);
    let beta1 = uco_bounds(&nominal, delta, stride)?.alpha1;

    let env = fast_envelope(kappa_e, kappa_p, a2f)?;
    let fast0 = (e0.norm_squared() + i_tilde0.norm_squared()).sqrt();
    let (radius, recovery) = if beta1 > super::UCO_TOLERANCE {
        (
            Some(local_pe_radius(beta1, env.a1f)?),
            Some(recovery_time(beta1, env.a1f, env.a2f, fast0)?),
        )
    } else {
        (None, None)
    };

    let first = recovery.unwrap_or(0.0);
    let horizon = first + windows as f64 * delta;
    let perturbed = nominal_regressor(injection, i_star, e0, i_tilde0, kappa_e, kappa_p, step, horizon)?.row_scaled(scale);
    let bounds = uco_bounds_from(&perturbed, first, delta, stride)?;

    Ok(GramianReport::from_bounds(
        bounds,
        Some(ThresholdFigures {
            injection,
            i_star,
            rho,
            w_star,
            beta1,
            a1f: env.a1f,
            a2f: env.a2f,
            local_pe_radius: radius,
            recovery_time: recovery,
        }),
    ))
}

impl RegressorSignal {
    /// Reads a uniformly sampled regressor with header
    /// `tau,o11,o21,o31,o12,o22,o32` (`o_rc` is row `r`, column `c`).
    pub fn read_csv(path: &Path) -> Result<Self> {
        let csv_err = |source| Error::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
        let header = r.headers().map_err(csv_err)?.clone();
        let names: Vec<&str> = header.iter().map(str::trim).collect();
        if names != REGRESSOR_HEADER {
            return Err(Error::Config(format!(
                "{}: expected header {}, found {}",
                path.display(),
                REGRESSOR_HEADER.join(","),
                names.join(",")
            )));
        }
        let mut taus = Vec::new();
        let mut samples = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let vals = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Config(format!("{}: row {}: {e}", path.display(), line + 2)))?;
            if vals.len() != 7 {
                return Err(Error::Config(format!("{}: row {} has {} fields", path.display(), line + 2, vals.len())));
            }
            taus.push(vals[0]);
            samples.push(Matrix3x2::from_column_slice(&vals[1..]));
        }
        if taus.len() < 2 {
            return Err(Error::Config(format!("{}: need at least two rows", path.display())));
        }
        let step = taus[1] - taus[0];
        let uniform = taus
            .windows(2)
            .all(|p| ((p[1] - p[0]) - step).abs() <= 1e-6 * step.abs().max(f64::MIN_POSITIVE));
        if !(step > 0.0) || !uniform || taus[0].abs() > 1e-9 * step {
            return Err(Error::Config(format!(
                "{}: tau must start at 0 and be uniformly increasing",
                path.display()
            )));
        }
        RegressorSignal::from_samples(step, samples)
    }

    /// Writes the signal in the format accepted by [`RegressorSignal::read_csv`].
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let csv_err = |source| Error::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record(REGRESSOR_HEADER).map_err(csv_err)?;
        let step = self.step();
        let n = (self.horizon() / step).round() as usize;
        for k in 0..=n {
            let tau = k as f64 * step;
            let m = match self {
                RegressorSignal::Sampled { samples, .. } => samples[k],
                RegressorSignal::Analytic { f, .. } => f(tau),
            };
            let mut row = vec![fmt_num(tau)];
            row.extend(m.iter().map(|&v| fmt_num(v)));
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}
