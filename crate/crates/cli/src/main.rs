use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use frbd_cli::{run_file, Command, Failure};

/// FrBD friction model experiments.
#[derive(Debug, Parser)]
#[command(name = "frbd", version)]
struct Args {
    command: Command,
    /// Flat `section.key = value` config file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for random inputs; overrides `seed`.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run_file(args.command, &args.config, args.out.as_deref(), args.seed) {
        Ok(written) => {
            for path in written {
                println!("{}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(failure) => {
            if let Failure::Audit { written, .. } = &failure {
                for path in written {
                    println!("{}", path.display());
                }
            }
            let err = anyhow::Error::new(failure);
            eprintln!("error: {err:#}");
            let code = err.downcast_ref::<Failure>().map_or(2, Failure::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
