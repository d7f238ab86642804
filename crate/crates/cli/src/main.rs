mod args;
mod commands;
mod config;

use std::ffi::OsString;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches};

use args::{Cli, Command};

fn error_kind(e: &anyhow::Error) -> &'static str {
    e.chain()
        .find_map(|c| c.downcast_ref::<meshsplat::Error>())
        .map(meshsplat::Error::kind)
        .unwrap_or_else(|| if e.chain().any(|c| c.is::<std::io::Error>()) { "io" } else { "cli" })
}

fn report(kind: &str, msg: &str) {
    eprintln!("error[{kind}]: {msg}");
}

fn parse(argv: Vec<OsString>) -> Result<Cli, ExitCode> {
    let cmd = Cli::command();
    let usage = |e: clap::Error| {
        use clap::error::ErrorKind;
        if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
            let _ = e.print();
            return ExitCode::from(if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand { 2 } else { 0 });
        }
        let text = e.render().to_string();
        report("usage", text.trim_start_matches("error: ").trim_end());
        ExitCode::from(2)
    };
    // lenient first pass: required flags may still come from the config file
    let loose = cmd.clone().ignore_errors(true).try_get_matches_from(&argv).map_err(usage)?;
    let Some(config) = loose.get_one::<std::path::PathBuf>("config").filter(|_| loose.subcommand().is_some()) else {
        let matches = cmd.try_get_matches_from(&argv).map_err(usage)?;
        return Cli::from_arg_matches(&matches).map_err(usage);
    };
    let extra = config::config_args(config, &cmd, &loose).map_err(|e| {
        report("config", &format!("{e:#}"));
        ExitCode::from(2)
    })?;
    let mut full = argv;
    full.extend(extra);
    let matches = cmd.try_get_matches_from(full).map_err(usage)?;
    Cli::from_arg_matches(&matches).map_err(usage)
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n as usize).build_global()?;
    }
    match &cli.command {
        Command::Bind(a) => commands::bind(a),
        Command::Fit(a) => commands::fit(a, cli.seed),
        Command::Render(a) => commands::render(a),
        Command::ExtractMesh(a) => commands::extract_mesh(a),
        Command::Eval(a) => commands::eval(a),
    }
}

fn main() -> ExitCode {
    let cli = match parse(std::env::args_os().collect()) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(error_kind(&e), &format!("{e:#}"));
            log::debug!("while running '{}'", cli.command.name());
            ExitCode::FAILURE
        }
    }
}
