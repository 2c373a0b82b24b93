use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sgp_core::experiment::{run_experiment, ExperimentConfig};
use sgp_core::plot::{plot_csv, PlotOptions};
use sgp_core::schedules::{MuFamily, TimeDilation};
use sgp_core::SgpError;

/// Continuous-time stochastic gradient process experiments.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config; writes CSVs to its output directory
    /// (overridden by SGP_OUTPUT_DIR).
    Run { config: PathBuf },
    /// Print `t,beta` for a time dilation at the given times.
    BetaEval {
        /// Constant learning rate: beta(t) = t / eps.
        #[arg(long, group = "clock")]
        eps: Option<f64>,
        /// Piecewise clock from comma-separated step sizes.
        #[arg(long, group = "clock", value_delimiter = ',')]
        etas: Option<Vec<f64>>,
        /// Smooth clock with mu(t) = SCALE * log(t + 2)^POWER.
        #[arg(long, group = "clock", num_args = 2, value_names = ["SCALE", "POWER"])]
        power_log: Option<Vec<f64>>,
        /// Smooth clock with mu(t) = SLOPE * t + INTERCEPT.
        #[arg(long, group = "clock", num_args = 2, value_names = ["SLOPE", "INTERCEPT"])]
        affine: Option<Vec<f64>>,
        /// Trapezoid step of smooth clocks.
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
        #[arg(required = true, allow_negative_numbers = true)]
        times: Vec<f64>,
    },
    /// Render CSV columns to an SVG line plot.
    Plot {
        csv: PathBuf,
        /// Output file; defaults to the CSV path with an .svg extension.
        #[arg(long, short)]
        out: Option<PathBuf>,
        #[arg(long)]
        x: Option<String>,
        #[arg(long, value_delimiter = ',')]
        y: Vec<String>,
        /// One series per distinct value of this column (e.g. config_id).
        #[arg(long)]
        group: Option<String>,
        #[arg(long)]
        log_y: bool,
        #[arg(long)]
        title: Option<String>,
    },
}

fn beta_eval(
    eps: Option<f64>,
    etas: Option<Vec<f64>>,
    power_log: Option<Vec<f64>>,
    affine: Option<Vec<f64>>,
    step: f64,
    times: &[f64],
) -> Result<(), SgpError> {
    let horizon = times.iter().cloned().fold(0.0, f64::max);
    let dilation = match (eps, etas, power_log, affine) {
        (Some(eps), ..) => TimeDilation::constant(eps)?,
        (_, Some(etas), ..) => TimeDilation::piecewise(etas)?,
        (_, _, Some(p), _) => TimeDilation::smooth(
            MuFamily::PowerLog {
                scale: p[0],
                power: p[1],
            },
            step,
            horizon,
        )?,
        (_, _, _, Some(a)) => TimeDilation::smooth(
            MuFamily::Affine {
                slope: a[0],
                intercept: a[1],
            },
            step,
            horizon,
        )?,
        _ => return Err(SgpError::Config("choose one of --eps, --etas, --power-log, --affine".into())),
    };
    println!("t,beta");
    for &t in times {
        println!("{t:.16e},{:.16e}", dilation.beta(t)?);
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match cli.command {
        Command::Run { config } => {
            let mut cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            };
            cfg.apply_env_override();
            match run_experiment(&cfg) {
                Ok(report) if report.failed_runs() == 0 => {
                    log::info!("wrote {}", cfg.output_dir.display());
                    ExitCode::SUCCESS
                }
                Ok(report) => {
                    eprintln!(
                        "{} run(s) failed; see {}",
                        report.failed_runs(),
                        cfg.output_dir.join("runs.csv").display()
                    );
                    ExitCode::from(2)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
        Command::BetaEval {
            eps,
            etas,
            power_log,
            affine,
            step,
            times,
        } => match beta_eval(eps, etas, power_log, affine, step, &times) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
        Command::Plot {
            csv,
            out,
            x,
            y,
            group,
            log_y,
            title,
        } => {
            let out = out.unwrap_or_else(|| csv.with_extension("svg"));
            let opts = PlotOptions {
                x,
                y,
                group,
                log_y,
                title,
            };
            match plot_csv(&csv, &out, &opts) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
    }
}
