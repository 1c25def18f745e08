use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use miso_harness::sweep::degenerate_fraction;
use miso_harness::{
    before_after_report, emit_plot_data, high_snr_slope, power_allocation_report, read_results, run_sweep, runtime_benchmark, write_results,
    ExperimentSpec, HarnessError,
};

#[derive(Parser)]
#[command(name = "miso-sim", version, about = "Monte-Carlo experiments for training-aware MISO precoding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full sweep and write one CSV row per (setup, trial, algorithm, T_dl, power).
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write per-series mean/stderr blocks for plotting.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Sum rates before and after optimization, on the estimate and on the true channel.
    Bars {
        #[arg(long)]
        config: PathBuf,
    },
    /// Per-user share of the transmit power.
    PowerAlloc {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        power_db: f64,
    },
    /// High-SNR slopes (bits per channel use per doubling of power) from a sweep CSV.
    Slopes {
        #[arg(long = "in")]
        input: PathBuf,
        /// Two dB values, e.g. `30,40`.
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        window: Vec<f64>,
    },
    /// Mean solve time per algorithm on identical instances.
    Bench {
        #[arg(long)]
        config: PathBuf,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config(_) => Failure::Config(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn load(path: &Path) -> Result<ExperimentSpec, Failure> {
    ExperimentSpec::from_path(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Sweep { config, out, plot } => {
            let spec = load(&config)?;
            let records = run_sweep(&spec)?;
            write_results(&records, &out)?;
            if let Some(plot) = plot {
                emit_plot_data(&records, &plot)?;
            }
            let degenerate = degenerate_fraction(&records);
            eprintln!("{} rows written to {}", records.len(), out.display());
            if degenerate > spec.max_degenerate_fraction {
                return Err(Failure::Runtime(format!(
                    "{:.1}% of rows are degenerate (limit {:.1}%)",
                    100.0 * degenerate,
                    100.0 * spec.max_degenerate_fraction
                )));
            }
        }
        Command::Bars { config } => {
            let spec = load(&config)?;
            println!("algorithm,T_dl,P_dl_db,instances,mode,sr_est_before,sr_est_after,sr_true_before,sr_true_after");
            for &algorithm in &spec.algorithms {
                let r = before_after_report(&spec, algorithm)?;
                for (mode, v) in [("mean", r.mean), ("single", r.single)] {
                    println!(
                        "{algorithm},{},{},{},{mode},{:.2},{:.2},{:.2},{:.2}",
                        r.pilots, r.power_db, r.instances, v[0], v[1], v[2], v[3]
                    );
                }
            }
        }
        Command::PowerAlloc { config, power_db } => {
            let spec = load(&config)?;
            for &algorithm in &spec.algorithms {
                let r = power_allocation_report(&spec, algorithm, power_db)?;
                let shares: Vec<String> = r.mean.iter().map(|f| format!("{f:.3}")).collect();
                println!(
                    "{algorithm} T_dl={} P_dl={} dB: mean shares [{}]; at most T_dl active users in {:.1}% of {} instances",
                    r.pilots,
                    r.power_db,
                    shares.join(", "),
                    100.0 * r.within_pilot_limit,
                    r.per_instance.len()
                );
            }
        }
        Command::Slopes { input, window } => {
            if window.len() != 2 {
                return Err(Failure::Config(format!("--window needs two dB values, got {}", window.len())));
            }
            let records = read_results(&input)?;
            let mut series: Vec<_> = records.iter().map(|r| (r.algorithm, r.pilots)).collect();
            series.sort();
            series.dedup();
            println!("algorithm,T_dl,slope");
            for (algorithm, pilots) in series {
                let slope = high_snr_slope(&records, algorithm, pilots, (window[0], window[1]))?;
                println!("{algorithm},{pilots},{slope:.4}");
            }
        }
        Command::Bench { config } => {
            let spec = load(&config)?;
            println!("algorithm,T_dl,P_dl_db,solves,mean_microseconds");
            for r in runtime_benchmark(&spec)? {
                println!("{},{},{},{},{:.1}", r.algorithm, r.pilots, r.power_db, r.solves, r.mean_microseconds());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
