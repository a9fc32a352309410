use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use rotorq_cli::{run, CliError, Command};
use rotorq_core::Execution;

#[derive(Parser)]
#[command(name = "rotorq", version, about = "Electrically driven rotor qubit simulator")]
struct Args {
    command: Command,
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads for scans; 1 runs everything sequentially.
    #[arg(long)]
    threads: Option<usize>,
}

fn execution(threads: Option<usize>) -> Execution {
    match threads {
        Some(0 | 1) => Execution::Sequential,
        #[cfg(feature = "parallel")]
        Some(k) => {
            // Only fails if a pool already exists, which cannot happen here.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
            Execution::Parallel
        }
        #[cfg(not(feature = "parallel"))]
        Some(_) => Execution::Sequential,
        None => Execution::Parallel,
    }
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.render().to_string();
            let first = msg.lines().next().unwrap_or("usage error").trim_start_matches("error: ");
            eprintln!("{}", serde_json::json!({"error": "usage", "exit_code": 2, "message": first}));
            return ExitCode::from(2);
        }
    };
    match run(args.command, &args.config, &args.out, execution(args.threads)) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => report(&e),
    }
}

fn report(e: &CliError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(e.exit_code() as u8)
}
