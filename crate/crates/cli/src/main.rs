mod args;
mod commands;
mod output;

use std::io::Write;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command, Format};
use commands::Failure;

fn emit(text: &str, out: Option<&std::path::Path>) -> std::io::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text),
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes())?;
            so.flush()
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 64,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (result, output) = match &cli.command {
        Command::Steady(a) => (commands::steady(a), &a.output),
        Command::Scan(a) => (commands::scan(a), &a.output),
        Command::Dark(a) => (commands::dark(a), &a.output),
        Command::Verify(a) => (commands::verify(a), &a.output),
        Command::Broadband(a) => (commands::broadband(a), &a.output),
    };
    let out = output.out.as_deref();
    match result {
        Ok(text) => match emit(&text, out) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(74)
            }
        },
        Err(f) => {
            if let Failure::Verify(report) = &f {
                let _ = emit(report, out);
            } else if output.format != Some(Format::Csv) && output.format != Some(Format::Text) {
                let _ = emit(&f.to_json(), out);
            }
            eprintln!("error: {}", f.message());
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
