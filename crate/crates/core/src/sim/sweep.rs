//! Runs the same scenario over several `ε`, with `λ = 1/ε` and the fast
//! gains rescaled at fixed `κ`s.

use std::fmt;
use std::thread;

use super::config::ScenarioConfig;
use super::run_scenario;
use super::trace::Summary;
use crate::error::{Error, Result};

/// Relative slack allowed when checking that residuals shrink with `ε`.
pub const MONOTONE_BAND: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub enum SweepOutcome {
    Completed(Summary),
    /// The derived configuration was rejected (e.g. the stiffness guard).
    Rejected(String),
    Diverged { t: f64, detail: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub epsilon: f64,
    pub outcome: SweepOutcome,
}

impl SweepEntry {
    /// Post-transient `max |(e, ĩ, z)|`.
    pub fn fast_residual(&self) -> Option<f64> {
        match &self.outcome {
            SweepOutcome::Completed(s) => Some(s.max_fast_residual),
            _ => None,
        }
    }

    /// Post-transient `max σ̂`.
    pub fn slow_residual(&self) -> Option<f64> {
        match &self.outcome {
            SweepOutcome::Completed(s) => Some(s.max_sigma_hat),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    /// Sorted by decreasing `ε`.
    pub entries: Vec<SweepEntry>,
}

impl SweepReport {
    /// Whether each completed run's fast residual is at most
    /// `(1 + band)` times that of the next larger `ε`.
    pub fn fast_monotone(&self, band: f64) -> bool {
        let done: Vec<f64> = self.entries.iter().filter_map(SweepEntry::fast_residual).collect();
        done.windows(2).all(|p| p[1] <= p[0] * (1.0 + band))
    }

    pub fn slow_monotone(&self, band: f64) -> bool {
        let done: Vec<f64> = self.entries.iter().filter_map(SweepEntry::slow_residual).collect();
        done.windows(2).all(|p| p[1] <= p[0] * (1.0 + band))
    }
}

impl fmt::Display for SweepReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>14} {:>10} {:>16} {:>16}", "epsilon", "status", "fast_residual", "slow_residual")?;
        for e in &self.entries {
            let (status, fast, slow) = match &e.outcome {
                SweepOutcome::Completed(s) => ("ok", format!("{:.6e}", s.max_fast_residual), format!("{:.6e}", s.max_sigma_hat)),
                SweepOutcome::Rejected(_) => ("rejected", "-".into(), "-".into()),
                SweepOutcome::Diverged { .. } => ("diverged", "-".into(), "-".into()),
            };
            writeln!(f, "{:>14.6e} {:>10} {:>16} {:>16}", e.epsilon, status, fast, slow)?;
        }
        for e in &self.entries {
            match &e.outcome {
                SweepOutcome::Rejected(why) => writeln!(f, "epsilon {:.6e} rejected: {why}", e.epsilon)?,
                SweepOutcome::Diverged { t, detail } => {
                    writeln!(f, "epsilon {:.6e} diverged at t = {t:.6e} s: {detail}", e.epsilon)?
                }
                SweepOutcome::Completed(_) => {}
            }
        }
        writeln!(f, "fast_monotone: {}", self.fast_monotone(MONOTONE_BAND))?;
        write!(f, "slow_monotone: {}", self.slow_monotone(MONOTONE_BAND))
    }
}

/// The base configuration with gains re-derived for `epsilon`, keeping the
/// base `κ`s and slow gains.
pub fn config_for_epsilon(base: &ScenarioConfig, epsilon: f64) -> Result<ScenarioConfig> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
    }
    let gains = base.gains.resolve(&base.plant)?;
    let scaling = gains.fast_scaling(base.plant.inductance);
    let mut cfg = base.clone();
    cfg.gains = super::config::GainsConfig {
        k_eta: Some(gains.k_eta),
        gamma: Some(gains.gamma),
        epsilon: Some(epsilon),
        kappa_e: Some(scaling.kappa_e),
        kappa_p: Some(scaling.kappa_p),
        kappa_z: Some(scaling.kappa_z.into()),
        ..Default::default()
    };
    Ok(cfg)
}

/// Runs one scenario per `ε` concurrently. Rejected or divergent runs are
/// recorded and do not stop the sweep.
pub fn epsilon_sweep(base: &ScenarioConfig, epsilons: &[f64]) -> Result<SweepReport> {
    if epsilons.is_empty() {
        return Err(Error::Config("no epsilon values given".into()));
    }
    let configs = epsilons
        .iter()
        .map(|&eps| config_for_epsilon(base, eps).map(|c| (eps, c)))
        .collect::<Result<Vec<_>>>()?;
    let mut entries: Vec<SweepEntry> = thread::scope(|scope| {
        let handles: Vec<_> = configs
            .iter()
            .map(|(eps, cfg)| {
                scope.spawn(move || SweepEntry {
                    epsilon: *eps,
                    outcome: match run_scenario(cfg) {
                        Ok(out) => SweepOutcome::Completed(out.summary),
                        Err(Error::Divergence { t, detail }) => SweepOutcome::Diverged { t, detail },
                        Err(other) => SweepOutcome::Rejected(other.to_string()),
                    },
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });
    entries.sort_by(|a, b| b.epsilon.total_cmp(&a.epsilon));
    Ok(SweepReport { entries })
}
