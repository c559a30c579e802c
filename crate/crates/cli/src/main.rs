use std::process::ExitCode;

use clap::Parser;
use harmonic_extract_cli::args::{Cli, Command};
use harmonic_extract_cli::{evaluate, extract, fetch, serve, synth, CliError, CliResult};

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Extract(args) => {
            let summary = extract::run(&args)?;
            for f in &summary.failures {
                eprintln!("{}", f.to_json_line());
            }
            eprintln!("wrote {} prediction file(s)", summary.written.len());
            summary.exit_error().map_or(Ok(()), Err)
        }
        Command::Evaluate(args) => {
            let out = evaluate::run(&args)?;
            if args.out.is_none() {
                let json = harmonic_extract::json::to_canonical_string(&out)
                    .map_err(|e| CliError::data(e.to_string()))?;
                print!("{json}");
                eprint!("{}", evaluate::render_table(&out));
            } else {
                print!("{}", evaluate::render_table(&out));
            }
            Ok(())
        }
        Command::Fetch(args) => {
            let path = fetch::run(&args)?;
            println!("{}", path.display());
            Ok(())
        }
        Command::TagServe(args) => serve::run(&args),
        Command::Synth(args) => synth::run(&args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
