use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nsshift_cli::{describe, load, output_dir, run, CliError};

#[derive(Debug, Parser)]
#[command(name = "nsshift", version, about = "Run nonsingular shift experiments from a config file")]
struct Cli {
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every experiment and write CSV tables and a JSON report.
    Run {
        config: PathBuf,
        /// Output directory (default: $NSSHIFT_OUT, else ./nsshift-out).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replace every seed in the config.
        #[arg(long)]
        seed_override: Option<u64>,
    },
    /// Print the plan without computing.
    Describe {
        config: PathBuf,
        #[arg(long)]
        seed_override: Option<u64>,
    },
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail(CliError::invalid("threads", e.to_string()));
        }
    }
    match cli.command {
        Command::Run {
            config,
            out,
            seed_override,
        } => {
            let out = output_dir(out);
            let report = match load(&config, seed_override).and_then(|c| run(&c, &out)) {
                Ok(r) => r,
                Err(e) => return fail(e),
            };
            for (id, c) in report.all_checks() {
                let stat = c.statistic.map(nsshift_cli::table::fmt_f64).unwrap_or_default();
                println!("{id:<28} {:<36} {:<12} {stat}", c.check, c.verdict);
            }
            println!("wrote {}", out.display());
            ExitCode::SUCCESS
        }
        Command::Describe {
            config,
            seed_override,
        } => match load(&config, seed_override).and_then(|c| describe(&c)) {
            Ok(plan) => {
                print!("{plan}");
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
    }
}
