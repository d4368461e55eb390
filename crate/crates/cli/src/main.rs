use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use hypertrees::bench::ScalingConfig;
use hypertrees_cli::bundle::Bundle;
use hypertrees_cli::commands::{self, EvaluateArgs, ExportKind, ForecastArgs};
use hypertrees_cli::io::write_atomic;
use hypertrees_cli::{CliResult, RunConfig};

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

#[derive(Parser)]
#[command(name = "hypertrees", version, about = "Boosted trees that estimate time-series model parameters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override a config field, e.g. `--set boosting.rounds=50`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> CliResult<RunConfig> {
        RunConfig::load(&self.config, &self.overrides)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum What {
    Parameters,
    Embeddings,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write its bundle directory.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        /// Bundle directory.
        #[arg(long)]
        out: PathBuf,
        /// Also write `round,loss,seconds` here.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Forecast every series with a trained bundle.
    Forecast {
        #[arg(long)]
        bundle: PathBuf,
        /// History to forecast from; defaults to the bundle's training data.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Future values of the categorical and numeric feature columns.
        #[arg(long)]
        known: Option<PathBuf>,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a forecast file against actuals.
    Evaluate {
        #[arg(long)]
        forecast: PathBuf,
        #[arg(long)]
        actuals: PathBuf,
        /// Reference forecasts for MASE.
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long, default_value = "dataset")]
        dataset: String,
        #[arg(long, default_value = "model")]
        model: String,
        #[arg(long)]
        runtime_seconds: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Trend and seasonal components of the trend + Fourier target.
    Decompose {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory for components.csv, parameters.csv and importance.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-iteration runtime as the number of target parameters grows.
    BenchScaling {
        /// Take tree and network settings from this run configuration.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "1,6,12,24")]
        orders: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        iterations: usize,
        #[arg(long, default_value_t = 50)]
        series: usize,
        /// Active rows per series.
        #[arg(long, default_value_t = 100)]
        rows: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-row parameters or tree embeddings in long format.
    Export {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long, value_enum)]
        what: What,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn write(path: &Path, bytes: &[u8]) -> CliResult<()> {
    write_atomic(path, |buf| {
        buf.extend_from_slice(bytes);
        Ok(())
    })
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Train { config, out, log } => {
            let trained = commands::train(&config.load()?)?;
            trained.bundle.save(&out)?;
            if let Some(path) = log {
                commands::write_timing_log(&path, &trained.log)?;
            }
            match trained.bundle.log.last() {
                Some((r, l)) => println!("trained {r} rounds, final loss {l}; bundle at {}", out.display()),
                None => println!("fitted baseline; bundle at {}", out.display()),
            }
        }
        Command::Forecast {
            bundle,
            data,
            known,
            horizon,
            out,
        } => {
            let b = Bundle::load(&bundle)?;
            let args = ForecastArgs {
                data: data.as_deref(),
                known: known.as_deref(),
                horizon,
            };
            let rows = commands::forecast_rows(&b, &args)?;
            commands::write_rows(&out, &rows)?;
            println!("wrote {} forecast rows to {}", rows.len(), out.display());
        }
        Command::Evaluate {
            forecast,
            actuals,
            reference,
            dataset,
            model,
            runtime_seconds,
            out,
        } => {
            let args = EvaluateArgs {
                forecast: &forecast,
                actuals: &actuals,
                reference: reference.as_deref(),
                dataset: &dataset,
                model: &model,
                runtime_seconds,
            };
            let (report, bytes) = commands::evaluate(&args)?;
            write(&out, &bytes)?;
            println!("scored {} series; report at {}", report.series.len(), out.display());
        }
        Command::Decompose { config, out } => {
            let d = commands::decompose(&config.load()?)?;
            write(&out.join("components.csv"), &d.components)?;
            write(&out.join("parameters.csv"), &d.parameters)?;
            write(&out.join("importance.csv"), &d.importance)?;
            println!("decomposition written to {}", out.display());
        }
        Command::BenchScaling {
            config,
            overrides,
            orders,
            iterations,
            series,
            rows,
            seed,
            out,
        } => {
            let mut sc = ScalingConfig {
                orders,
                n_series: series,
                rows_per_series: rows,
                iterations,
                seed,
                ..ScalingConfig::default()
            };
            if let Some(path) = config {
                let rc = RunConfig::load(&path, &overrides)?;
                sc.hypertree = rc.hypertree_config();
                sc.treenet = rc.treenet_config();
            }
            let result = commands::bench_scaling(&sc)?;
            write(&out, &commands::bench_rows_csv(&result)?)?;
            for r in &result {
                println!("{:<10} P={:<3} {:.6} s/iter  x{:.2}", r.family.name(), r.p, r.median_seconds, r.relative);
            }
        }
        Command::Export {
            bundle,
            what,
            data,
            horizon,
            out,
        } => {
            let b = Bundle::load(&bundle)?;
            let kind = match what {
                What::Parameters => ExportKind::Parameters,
                What::Embeddings => ExportKind::Embeddings,
            };
            write(&out, &commands::export(&b, kind, data.as_deref(), horizon)?)?;
            println!("export written to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
