//! Command-line front end for the cell-free uplink simulator.

use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use cfmimo::harness::{
    emit_estimation_csv, emit_results, run_estimation_sweep, run_ldpc_awgn, run_sweep,
    ExperimentConfig,
};
use cfmimo::ldpc::build_code;

#[derive(Parser)]
#[command(name = "cfsim", version, about = "Cell-free massive MIMO uplink link-level simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config JSON file; omit to use built-in defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override config fields, e.g. --override trials=2000
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads (default: CFSIM_WORKERS or all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run the BER/FER Monte Carlo sweep and write CSV + JSON sidecar.
    Simulate(ConfigArgs),
    /// Run the estimation-quality sweep (channel and interference NMSE).
    EstimateNmse(ConfigArgs),
    /// Decoder-only BPSK/AWGN waterfall benchmark.
    LdpcBench {
        #[arg(long, default_value_t = 512)]
        code_len: usize,
        #[arg(long, default_value_t = 256)]
        message_len: usize,
        #[arg(long, default_value_t = 0.0)]
        min_ebn0: f64,
        #[arg(long, default_value_t = 4.0)]
        max_ebn0: f64,
        #[arg(long, default_value_t = 1.0)]
        step_ebn0: f64,
        #[arg(long, default_value_t = 1000)]
        frames: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Print the default experiment config as JSON.
    DefaultConfig,
}

fn load_config(args: &ConfigArgs) -> anyhow::Result<ExperimentConfig> {
    let base = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            ExperimentConfig::from_json(&text).context("parsing config JSON")?
        }
        None => ExperimentConfig::default(),
    };
    let cfg = base.with_overrides(&args.overrides)?;
    Ok(cfg)
}

fn init_workers(cli_workers: Option<usize>, cfg_workers: Option<usize>) {
    let from_env = std::env::var("CFSIM_WORKERS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    if let Some(n) = cli_workers.or(cfg_workers).or(from_env) {
        // Ignore failure: the pool can only be set once per process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn main() {
    if let Err(err) = run() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Simulate(args) => {
            let cfg = load_config(&args)?;
            init_workers(args.workers, cfg.workers);
            let result = run_sweep(&cfg)?;
            for w in &result.warnings {
                eprintln!("warning: {w}");
            }
            let out_dir = cfg
                .output_path
                .as_ref()
                .map(PathBuf::from)
                .unwrap_or_else(|| args.out.clone());
            let (csv_path, json_path) = emit_results(&result, &out_dir)?;
            for row in &result.rows {
                println!(
                    "snr {:>6.1} dB  {:<22} idd {}  ber {:.6e}  fer {:.6e}",
                    row.snr_db,
                    row.mode.as_str(),
                    row.idd_iter,
                    row.ber,
                    row.fer
                );
            }
            eprintln!(
                "wrote {} and {} in {:.1}s",
                csv_path.display(),
                json_path.display(),
                result.wall_time_s
            );
        }
        Command::EstimateNmse(args) => {
            let cfg = load_config(&args)?;
            init_workers(args.workers, cfg.workers);
            for w in cfg.validate()? {
                eprintln!("warning: {w}");
            }
            let rows = run_estimation_sweep(&cfg)?;
            std::fs::create_dir_all(&args.out)?;
            let path = args.out.join("estimation.csv");
            emit_estimation_csv(&rows, &path)?;
            for r in &rows {
                println!(
                    "snr {:>6.1} dB  nmse_ch {:>8.2} dB  nmse_int pre {:>8.2} / post {:>8.2} dB",
                    r.snr_db, r.nmse_ch_db, r.nmse_int_pre_db, r.nmse_int_post_db
                );
            }
            eprintln!("wrote {}", path.display());
        }
        Command::LdpcBench {
            code_len,
            message_len,
            min_ebn0,
            max_ebn0,
            step_ebn0,
            frames,
            seed,
            workers,
        } => {
            init_workers(workers, None);
            anyhow::ensure!(step_ebn0 > 0.0, "step_ebn0 must be positive");
            let code = build_code(code_len, message_len, seed)?;
            println!("ebn0_db,ber,fer,frames");
            let mut ebn0 = min_ebn0;
            while ebn0 <= max_ebn0 + 1e-9 {
                let row = run_ldpc_awgn(&code, ebn0, frames, seed);
                println!("{},{},{},{}", row.ebn0_db, row.ber, row.fer, row.frames);
                ebn0 += step_ebn0;
            }
        }
        Command::DefaultConfig => {
            println!("{}", ExperimentConfig::default().to_json()?);
        }
    }
    Ok(())
}
