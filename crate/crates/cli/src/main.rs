use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use pmsm_core::excitation::{GramianReport, RegressorSignal, DEFAULT_WINDOW};
use pmsm_core::observer::gains_from_poles;
use pmsm_core::sim::config::parse_poles;
use pmsm_core::sim::plot::write_boundary_layer_svg;
use pmsm_core::sim::sweep::SweepOutcome;
use pmsm_core::sim::{
    analyze_config, emit_trace, epsilon_sweep, simulate, write_boundary_layer_csv, Outcome, ScenarioConfig, TraceFormat,
};
use pmsm_core::Error;

const EXIT_CONFIG: u8 = 1;
const EXIT_DIVERGENCE: u8 = 2;

#[derive(Parser)]
#[command(name = "pmsm-lab", version, about = "Sensorless PMSM controller-observer simulation lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its trace.
    Simulate {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value = "csv")]
        format: TraceFormat,
    },
    /// Excitation report for a scenario config or a sampled regressor CSV.
    Analyze {
        input: PathBuf,
        /// Also write per-window Gramian eigenvalues here.
        #[arg(long)]
        eigen_csv: Option<PathBuf>,
        /// Window length for regressor CSV input (fast time).
        #[arg(long, default_value_t = DEFAULT_WINDOW)]
        delta: f64,
        /// Window stride for regressor CSV input; defaults to delta/8.
        #[arg(long)]
        stride: Option<f64>,
    },
    /// Run the scenario for several epsilon values.
    SweepEpsilon {
        config: PathBuf,
        /// Comma-separated values; a trailing `x` scales the config's own epsilon.
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        eps: Vec<String>,
    },
    /// Slow-loop gains k_eta and gamma from two poles at a given chi.
    TunePoles {
        /// `a±bi`, or one or two complex poles separated by a comma.
        #[arg(long, allow_hyphen_values = true)]
        poles: String,
        /// Back-EMF amplitude chi = |omega| phi [V].
        #[arg(long)]
        chi: f64,
    },
}

fn load(path: &Path) -> Result<ScenarioConfig> {
    Ok(ScenarioConfig::load(path)?)
}

fn parse_eps(values: &[String], cfg: &ScenarioConfig) -> Result<Vec<f64>> {
    let base = cfg.gains.resolve(&cfg.plant)?.epsilon();
    values
        .iter()
        .map(|v| {
            let v = v.trim();
            let parsed = match v.strip_suffix('x') {
                Some(scale) => scale.parse::<f64>().map(|s| s * base),
                None => v.parse::<f64>(),
            };
            parsed.map_err(|_| Error::Config(format!("cannot parse epsilon '{v}'")).into())
        })
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, out, format } => {
            let cfg = load(&config)?;
            match simulate(&cfg)? {
                Outcome::ClosedLoop(run) => {
                    let files = emit_trace(&run.trace, &out, format)?;
                    println!("{}", run.summary);
                    for f in files {
                        println!("wrote {}", f.display());
                    }
                }
                Outcome::BoundaryLayer(traj) => {
                    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
                    let path = match format {
                        TraceFormat::Csv => {
                            let p = out.join("boundary_layer.csv");
                            write_boundary_layer_csv(&traj, &p)?;
                            p
                        }
                        TraceFormat::Svg => {
                            let p = out.join("boundary_layer.svg");
                            write_boundary_layer_svg(&traj, &p)?;
                            p
                        }
                    };
                    if let (Some(z0), Some(z1)) = (traj.z.first(), traj.z.last()) {
                        println!("z_initial_norm: {:.6e}", z0.norm());
                        println!("z_final_norm: {:.6e}", z1.norm());
                    }
                    println!("wrote {}", path.display());
                }
            }
        }
        Command::Analyze {
            input,
            eigen_csv,
            delta,
            stride,
        } => {
            let is_csv = input.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
            let report = if is_csv {
                let sig = RegressorSignal::read_csv(&input)?;
                GramianReport::from_signal(&sig, delta, stride.unwrap_or(delta / 8.0))?
            } else {
                analyze_config(&load(&input)?)?
            };
            print!("{report}");
            if let Some(path) = eigen_csv {
                report.write_eigen_csv(&path)?;
            }
        }
        Command::SweepEpsilon { config, eps } => {
            let cfg = load(&config)?;
            let values = parse_eps(&eps, &cfg)?;
            let report = epsilon_sweep(&cfg, &values)?;
            println!("{report}");
            if let Some((t, detail)) = report.entries.iter().find_map(|e| match &e.outcome {
                SweepOutcome::Diverged { t, detail } => Some((*t, detail.clone())),
                _ => None,
            }) {
                return Err(Error::Divergence { t, detail }.into());
            }
        }
        Command::TunePoles { poles, chi } => {
            let (p1, p2) = parse_poles(&poles)?;
            let (k_eta, gamma) = gains_from_poles(p1, p2, chi).map_err(|e| Error::Config(e.to_string()))?;
            println!("k_eta: {k_eta}");
            println!("gamma: {gamma}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let divergent = matches!(err.downcast_ref::<Error>(), Some(Error::Divergence { .. }));
            ExitCode::from(if divergent { EXIT_DIVERGENCE } else { EXIT_CONFIG })
        }
    }
}
