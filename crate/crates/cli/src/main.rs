use std::path::PathBuf;
use std::process::ExitCode;

use chi2atom_cli::{preset, run, CliError, Format, Preset, RunOptions};
use clap::{Parser, Subcommand};

/// χ(2) microcavity artificial-atom simulator.
#[derive(Parser)]
#[command(name = "chi2atom", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        /// Experiment config, TOML or JSON (by `.json` extension).
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config and CHI2ATOM_OUT).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Output format (overrides the config).
        #[arg(long, value_enum)]
        format: Option<Format>,
        /// Worker threads for parallel scans and sweeps.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Print a ready-to-run config: fig1b, fig1c, fig2, fig3, ln-today, ln-ultimate.
    Preset {
        /// Preset name.
        name: String,
        /// Print JSON instead of TOML.
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Run { config, out, format, jobs } => run(&RunOptions {
            config,
            out,
            format,
            jobs,
            env_out: std::env::var_os("CHI2ATOM_OUT").map(PathBuf::from),
        })
        .map(|o| {
            eprintln!("wrote {} files to {}", o.manifest.files.len() + 1, o.dir.display());
        }),
        Command::Preset { name, json } => name.parse::<Preset>().map(|p| {
            let cfg = preset(p);
            if json {
                println!("{}", serde_json::to_string_pretty(&cfg.to_json()).expect("config serializes"));
            } else {
                print!("{}", cfg.to_toml());
            }
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(e),
    }
}

fn report(e: CliError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code())
}
