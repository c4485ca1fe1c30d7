use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pktbound::bounds::detection_tradeoff;
use pktbound::channel::db_to_linear;
use pktbound::sweep::{
    codebook_csv_path, resolve_output, run_sweep, run_validation, write_output, SweepConfig,
    ValidationConfig,
};
use pktbound::{exec, Error};

#[derive(Parser, Debug)]
#[command(
    name = "pktbound",
    version,
    about = "Rate bounds for joint packet detection and decoding"
)]
struct Cli {
    /// Override the master seed of the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the output path of the config file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate the configured bounds and write a rate-curve CSV.
    Sweep { config: PathBuf },
    /// Simulate the threshold decoder on random codebooks against the achievability bound.
    Validate { config: PathBuf },
    /// Print the false-alarm/misdetection pair of a preamble detector.
    Tradeoff {
        #[arg(long = "np")]
        n_p: usize,
        #[arg(long = "snr-db", allow_hyphen_values = true)]
        snr_db: f64,
        #[arg(long)]
        efa: f64,
    },
}

fn run(cli: Cli) -> Result<(), Error> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        exec::init_threads(t).map_err(Error::Config)?;
    }
    match cli.command {
        Command::Sweep { config } => {
            let mut cfg = SweepConfig::load(&config)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let out = resolve_output(cli.out.as_ref().unwrap_or(&cfg.output));
            let curve = run_sweep(&cfg)?;
            write_output(&out, &curve.to_csv())?;
            println!("wrote {} rows to {}", curve.rows.len(), out.display());
        }
        Command::Validate { config } => {
            let mut cfg = ValidationConfig::load(&config)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let out = resolve_output(cli.out.as_ref().unwrap_or(&cfg.output));
            let report = run_validation(&cfg)?;
            let text = report.to_text();
            write_output(&out, &text)?;
            write_output(&codebook_csv_path(&out), &report.per_codebook_csv())?;
            print!("{text}");
        }
        Command::Tradeoff { n_p, snr_db, efa } => {
            let d = detection_tradeoff(n_p, db_to_linear(snr_db), efa)?;
            println!("n_p: {n_p}");
            println!("snr_db: {snr_db}");
            println!("efa: {:.6e}", d.efa);
            println!("emd: {:.6e}", d.emd);
            match d.gamma {
                Some(g) => println!("gamma: {g}"),
                None => println!("gamma: none"),
            }
            println!("degenerate: {}", d.degenerate);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pktbound: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
