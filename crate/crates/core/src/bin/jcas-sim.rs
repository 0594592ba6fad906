//! Command-line front end: batch runs, bounds and the FLOP table.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use jcas_sim::exec::ExecMode;
use jcas_sim::experiment::{emit_results, format_sig6, run_experiment, ExperimentConfig, InitMode};
use jcas_sim::scenario::{complexity_table, quantization_bounds, Estimator};
use jcas_sim::Result;

#[derive(Parser)]
#[command(name = "jcas-sim", version, about = "OFDM sensing and tracking Monte-Carlo simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo batch and write summary.txt, curves.csv and config.toml.
    Run(RunArgs),
    /// Print the quantisation and angle bounds for a configuration.
    Bounds {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Print the per-frame FLOP model.
    Complexity {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Print the default configuration file.
    DefaultConfig {
        /// Use the 1000-trajectory preset.
        #[arg(long)]
        paper_scale: bool,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    /// Flat key/value configuration file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from the 1000 x 92 preset instead of the 100-trajectory default.
    #[arg(long)]
    paper_scale: bool,
    #[arg(long)]
    n_trajectories: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// known_truth or rdm_estimate
    #[arg(long)]
    init_mode: Option<InitMode>,
    /// Comma-separated subset of RDM,Kalman,EBM,ZP,CZT,KalmanCZT.
    #[arg(long, value_delimiter = ',')]
    estimators: Option<Vec<Estimator>>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Disable all receiver noise.
    #[arg(long)]
    noise_off: bool,
    /// Worker threads; 0 uses one per core, 1 runs sequentially.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

fn load(config: Option<&PathBuf>, paper_scale: bool) -> Result<ExperimentConfig> {
    match config {
        Some(path) => ExperimentConfig::from_file(path),
        None if paper_scale => Ok(ExperimentConfig::paper_scale()),
        None => Ok(ExperimentConfig::default()),
    }
}

fn run(args: RunArgs) -> Result<()> {
    let mut cfg = load(args.config.as_ref(), args.paper_scale)?;
    if args.paper_scale {
        cfg.n_trajectories = ExperimentConfig::paper_scale().n_trajectories;
    }
    if let Some(n) = args.n_trajectories {
        cfg.n_trajectories = n;
    }
    if let Some(s) = args.seed {
        cfg.master_seed = s;
    }
    if let Some(m) = args.init_mode {
        cfg.init_mode = m;
    }
    if let Some(e) = args.estimators {
        cfg.estimators = e;
    }
    if let Some(d) = args.out_dir {
        cfg.out_dir = d;
    }
    if args.noise_off {
        cfg.ofdm.noise = false;
    }
    cfg.validate()?;
    let mode = match args.threads {
        0 => ExecMode::Parallel,
        1 => ExecMode::Sequential,
        n => ExecMode::Threads(n),
    };
    let bundle = run_experiment(&cfg, mode)?;
    let files = emit_results(&bundle, &cfg.out_dir)?;
    println!(
        "{:<10} {:>12} {:>14} {:>12} {:>12} {:>14}",
        "estimator", "range [m]", "velocity [m/s]", "AoA [deg]", "position [m]", "FLOPs"
    );
    for row in &bundle.summary {
        let e = &row.errors;
        println!(
            "{:<10} {:>12} {:>14} {:>12} {:>12} {:>14}",
            row.estimator.name(),
            format_sig6(e.range_rmse),
            format_sig6(e.velocity_rmse),
            format_sig6(e.aoa_rmse.to_degrees()),
            format_sig6(e.position_error),
            row.flops
        );
    }
    println!("wrote {}, {}, {}", files.summary.display(), files.curves.display(), files.config.display());
    Ok(())
}

fn bounds(config: Option<PathBuf>) -> Result<()> {
    let cfg = load(config.as_ref(), false)?;
    let o = &cfg.ofdm;
    let report = jcas_sim::scenario::bounds_report(o)?;
    let (zp, _) = quantization_bounds(o, o.n_subcarriers * cfg.pad_factor, o.n_symbols)?;
    println!("range quantisation std     {} m", format_sig6(report.range_bound.sqrt()));
    println!("zero-padded range std      {} m (pad {})", format_sig6(zp.sqrt()), cfg.pad_factor);
    println!("velocity quantisation std  {} m/s", format_sig6(report.velocity_bound.sqrt()));
    println!(
        "angle CRB std (K={}, N_win={}) {} rad",
        o.n_antennas,
        o.n_snapshots,
        format_sig6(report.crb_aoa_avg.sqrt())
    );
    Ok(())
}

fn complexity(config: Option<PathBuf>) -> Result<()> {
    let cfg = load(config.as_ref(), false)?;
    let t = complexity_table(&cfg.ofdm, cfg.pad_factor);
    for e in Estimator::ALL {
        println!("{:<10} {:>14}", e.name(), t.flops(e));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Bounds { config } => bounds(config),
        Command::Complexity { config } => complexity(config),
        Command::DefaultConfig { paper_scale } => {
            let cfg = if paper_scale {
                ExperimentConfig::paper_scale()
            } else {
                ExperimentConfig::default()
            };
            cfg.to_toml_string().map(|s| print!("{s}"))
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
