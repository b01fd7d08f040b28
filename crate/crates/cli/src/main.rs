mod args;
mod cache;
mod commands;
mod config;
mod error;
mod output;

use args::{Cli, Command};
use cache::Cache;
use clap::{CommandFactory, FromArgMatches};
use commands::{run, write_image, Context};
use config::Config;
use error::CliError;
use output::{sha256_hex, to_json, write_atomic};
use serde::Serialize;
use std::ffi::OsString;
use std::process::ExitCode;

#[derive(Serialize)]
struct ResultRecord<'a> {
    experiment: &'a str,
    version: &'static str,
    inputs_sha256: String,
    inputs: &'a serde_json::Value,
    report: &'a serde_json::Value,
    tables: Vec<String>,
    images: Vec<String>,
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Validate(_) => "validate",
        Command::Orbit(_) => "orbit",
        Command::Period(_) => "period",
        Command::Special(_) => "special",
        Command::Entropy(_) => "entropy",
        Command::Calculus(_) => "calculus",
        Command::Egorov(_) => "egorov",
        Command::Spectrum(_) => "spectrum",
        Command::Qe(_) => "qe",
        Command::Scar(_) => "scar",
        Command::Husimi(_) => "husimi",
        Command::Fup(_) => "fup",
        Command::Omega(_) => "omega",
    }
}

/// Parses the command line, folding in config-file defaults.
fn parse(argv: Vec<OsString>) -> Result<(Cli, Config), clap::Error> {
    let root = Cli::command();
    let matches = root.clone().try_get_matches_from(&argv)?;
    let cli = Cli::from_arg_matches(&matches)?;
    let Some(path) = cli.config.clone() else {
        return Ok((cli, Config::default()));
    };
    let config = match Config::load(&path) {
        Ok(c) => c,
        Err(e) => fail(&e),
    };
    let sub = matches.subcommand_name().expect("subcommand is required");
    let extra = match config.arguments(&root, sub, &matches) {
        Ok(x) => x,
        Err(e) => fail(&e),
    };
    let mut full = argv;
    full.extend(extra);
    let matches = root.try_get_matches_from(&full)?;
    Ok((Cli::from_arg_matches(&matches)?, config))
}

fn fail(e: &CliError) -> ! {
    eprintln!("{}", e.to_json());
    std::process::exit(e.exit_code())
}

fn execute(cli: &Cli, config: Config) -> Result<String, CliError> {
    let ctx = Context { cache: cli.cache_dir.as_ref().map(Cache::new), symbols: config.symbols };
    let name = command_name(&cli.command);
    let outcome = run(&cli.command, &ctx)?;
    let inputs_sha256 = sha256_hex(to_json(&serde_json::json!({ "experiment": name, "inputs": outcome.inputs })).as_bytes());
    let mut tables = Vec::new();
    if let Some(dir) = &cli.out {
        for t in &outcome.tables {
            let file = format!("{}.csv", t.name);
            write_atomic(&dir.join(&file), &t.to_csv())?;
            tables.push(file);
        }
    }
    let mut images = Vec::new();
    for (path, image) in &outcome.images {
        write_image(path, image)?;
        images.push(path.display().to_string());
    }
    let record = ResultRecord {
        experiment: name,
        version: env!("CARGO_PKG_VERSION"),
        inputs_sha256,
        inputs: &outcome.inputs,
        report: &outcome.report,
        tables,
        images,
    };
    let json = to_json(&record);
    if let Some(dir) = &cli.out {
        write_atomic(&dir.join(format!("{name}.json")), json.as_bytes())?;
    }
    Ok(json)
}

fn main() -> ExitCode {
    let (cli, config) = match parse(std::env::args_os().collect()) {
        Ok(v) => v,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                let code = if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand { 1 } else { 0 };
                let _ = e.print();
                return ExitCode::from(code);
            }
            let usage = CliError::usage("USAGE", e.render().to_string().trim_end().to_string());
            eprintln!("{}", usage.to_json());
            return ExitCode::from(1);
        }
    };
    match execute(&cli, config) {
        Ok(json) => {
            print!("{json}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
