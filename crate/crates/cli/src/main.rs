mod args;
mod run;

use std::fs::File;
use std::io::BufReader;
use std::process::ExitCode;

use anyhow::Context;
use clap::{CommandFactory, Parser};
use qenc_core::error::Category;

use args::{Cli, Command};

/// 0 ok, 1 runtime failure, 2 configuration error, 3 data error.
fn exit_code(err: &anyhow::Error) -> u8 {
    let category = err
        .chain()
        .find_map(|e| e.downcast_ref::<qenc_core::Error>())
        .map(qenc_core::Error::category);
    match category {
        Some(Category::Config) => 2,
        Some(Category::Data) => 3,
        _ => 1,
    }
}

fn load_replay(cli: &Cli) -> anyhow::Result<Option<Command>> {
    let Some(path) = &cli.config else {
        return Ok(cli.command.clone());
    };
    let f = File::open(path)
        .map_err(|e| qenc_core::Error::Config(format!("cannot open {}: {e}", path.display())))?;
    let mut cmd: Command = serde_json::from_reader(BufReader::new(f))
        .map_err(|e| qenc_core::Error::Config(format!("invalid config {}: {e}", path.display())))
        .context("loading replay config")?;
    if let Some(out) = &cli.out {
        cmd.set_out_dir(out.clone());
    }
    Ok(Some(cmd))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = load_replay(&cli).and_then(|cmd| match cmd {
        Some(cmd) => run::run(cmd),
        None => {
            Cli::command().print_help()?;
            Ok(())
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
