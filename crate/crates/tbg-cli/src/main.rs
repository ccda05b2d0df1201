use std::process::ExitCode;

use clap::Parser;
use tbg_cli::cli::{Action, Cli};
use tbg_cli::error::CliError;
use tbg_cli::{pretty, run, schema};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => return fail(CliError::Config(e.to_string().trim_end().to_string())),
    };
    let quiet = cli.quiet;
    match dispatch(cli, quiet) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}

fn fail(e: CliError) -> ExitCode {
    print!("{}", pretty(&e.report()).unwrap_or_else(|_| e.to_string()));
    ExitCode::from(e.exit_code() as u8)
}

fn dispatch(cli: Cli, quiet: bool) -> Result<(), CliError> {
    match cli.action()? {
        Action::Schema { name, write } => {
            let all = schema::all();
            if let Some(dir) = write {
                std::fs::create_dir_all(&dir)?;
                for (n, s) in &all {
                    std::fs::write(dir.join(schema::file_name(n)), pretty(s)?)?;
                }
                return Ok(());
            }
            let names: Vec<&str> = all.iter().map(|(n, _)| *n).collect();
            let wanted = name.ok_or_else(|| CliError::Config(format!("schema name required: {}", names.join(", "))))?;
            let (_, s) = all.into_iter().find(|(n, _)| *n == wanted).ok_or_else(|| CliError::Config(format!("unknown schema {wanted:?}: {}", names.join(", "))))?;
            print!("{}", pretty(&s)?);
        }
        Action::Run(cfg) => {
            let out = run(&cfg)?;
            if !quiet {
                print!("{}", pretty(&out.report)?);
            }
        }
    }
    Ok(())
}
