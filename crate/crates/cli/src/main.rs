use std::process::ExitCode;

use clap::Parser;
use qretro_cli::args::{Cli, Command};
use qretro_cli::{fidelity, hd, negativity, tomo, version_json, CliError, EXIT_CONFIG};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if cli.version {
        println!("{}", version_json());
        return ExitCode::SUCCESS;
    }
    let Some(command) = &cli.command else {
        eprintln!("error: a subcommand is required (see --help)");
        return ExitCode::from(EXIT_CONFIG as u8);
    };
    match dispatch(command, &cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: &Command, cli: &Cli) -> Result<(), CliError> {
    let globals = cli.globals();
    match command {
        Command::NegativityMap(a) => negativity::run(&a.resolve()?, &globals),
        Command::FidelityCurves(a) => fidelity::run(&a.resolve()?, &globals),
        Command::HdWigner(a) => hd::run(&a.resolve()?, &globals),
        Command::Tomo(a) if a.print_example => {
            print!("{}", tomo::EXAMPLE_CONFIG);
            Ok(())
        }
        Command::Tomo(a) => {
            let summary = tomo::run(a.resolve()?, &globals)?;
            log::info!("tomo finished after {} iterations", summary.iterations);
            Ok(())
        }
    }
}
