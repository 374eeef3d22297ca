//! Command-line driver for the `cqed-teleport` simulator.
//!
//! Exit codes: 0 success, 1 check failure, 2 truncation, 3 protocol or
//! post-selection failure, 64 usage error.

use std::ffi::OsString;
use std::io::Write;

use clap::error::ErrorKind;
use clap::{Arg, ArgAction, ArgMatches, Command};
use cqed_teleport::SimError;
use thiserror::Error;

pub mod commands;
pub mod report;
pub mod settings;

use commands::CommandOutput;
use report::Format;
use settings::{Key, Settings};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK: i32 = 1;
pub const EXIT_TRUNCATION: i32 = 2;
pub const EXIT_PROTOCOL: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("check failed: {0}")]
    Check(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Check(_) | CliError::Io(_) => EXIT_CHECK,
            CliError::Sim(e) => match e {
                SimError::Truncation { .. } => EXIT_TRUNCATION,
                SimError::PostSelectionImpossible { .. }
                | SimError::Domain(_)
                | SimError::Capacity { .. } => EXIT_PROTOCOL,
                SimError::CheckFailed(_) | SimError::Shape(_) | SimError::Unsupported(_) => {
                    EXIT_CHECK
                }
            },
        }
    }
}

type Runner = fn(&Settings) -> Result<CommandOutput, CliError>;

struct Subcommand {
    name: &'static str,
    about: &'static str,
    keys: &'static [Key],
    run: Runner,
}

const SUBCOMMANDS: &[Subcommand] = &[
    Subcommand {
        name: "epr",
        about: "Prepare an atomic Bell pair through the cavity and report its fidelity",
        keys: settings::EPR_KEYS,
        run: commands::epr,
    },
    Subcommand {
        name: "teleport",
        about: "Teleport an atomic qubit and report all four detection outcomes",
        keys: settings::TELEPORT_KEYS,
        run: commands::teleport_cmd,
    },
    Subcommand {
        name: "sweep",
        about: "Scan Bell-pair preparation over alpha or the probe time",
        keys: settings::SWEEP_KEYS,
        run: commands::sweep,
    },
    Subcommand {
        name: "bell-check",
        about: "Check Bell-basis orthonormality and the rotation table",
        keys: settings::BELL_CHECK_KEYS,
        run: commands::bell_check,
    },
    Subcommand {
        name: "compare-models",
        about: "Compare the cavity simulation with the XOR-gate qubit model",
        keys: settings::COMPARE_KEYS,
        run: commands::compare,
    },
];

pub fn build_cli() -> Command {
    let mut cli = Command::new("cqed-teleport")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Cavity-QED Bell-pair preparation and atomic teleportation simulator")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for sub in SUBCOMMANDS {
        let mut cmd = Command::new(sub.name).about(sub.about).arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .help("key=value settings file; flags override it"),
        );
        for k in sub.keys {
            let arg = Arg::new(k.name).long(k.name);
            cmd = cmd.arg(if k.switch {
                arg.help(k.help).action(ArgAction::SetTrue)
            } else if k.default.is_empty() {
                arg.help(k.help)
                    .value_name("VALUE")
                    .allow_negative_numbers(true)
            } else {
                arg.help(format!("{} [default: {}]", k.help, k.default))
                    .value_name("VALUE")
                    .allow_negative_numbers(true)
            });
        }
        cli = cli.subcommand(cmd);
    }
    cli
}

fn flag_values(keys: &[Key], m: &ArgMatches) -> Vec<(&'static str, String)> {
    keys.iter()
        .filter_map(|k| {
            if k.switch {
                m.get_flag(k.name).then(|| (k.name, "true".to_string()))
            } else {
                m.get_one::<String>(k.name).map(|v| (k.name, v.clone()))
            }
        })
        .collect()
}

fn execute(
    sub: &Subcommand,
    m: &ArgMatches,
    stdout: &mut dyn Write,
) -> Result<CommandOutput, CliError> {
    let file = match m.get_one::<String>("config") {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read config file '{path}': {e}")))?;
            settings::parse_config_text(&text)?
        }
        None => Vec::new(),
    };
    let s = Settings::resolve(sub.name, sub.keys, &file, &flag_values(sub.keys, m))?;
    let format = match s.choice("format", &["csv", "json"])? {
        "json" => Format::Json,
        _ => Format::Csv,
    };
    let out = (sub.run)(&s)?;
    let text = out.report.render(format)?;
    match s.raw("output") {
        "-" => stdout.write_all(text.as_bytes())?,
        path => std::fs::write(path, text)?,
    }
    Ok(out)
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match build_cli().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = stdout.write_all(text.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = stderr.write_all(text.as_bytes());
                    EXIT_USAGE
                }
            };
        }
    };
    let (name, sub_matches) = matches.subcommand().expect("subcommand is required");
    let sub = SUBCOMMANDS
        .iter()
        .find(|s| s.name == name)
        .expect("registered subcommand");
    match execute(sub, sub_matches, stdout) {
        Ok(out) => {
            for w in &out.warnings {
                let _ = writeln!(stderr, "warning: {w}");
            }
            match out.failure {
                Some(e) => {
                    let _ = writeln!(stderr, "error: {e}");
                    e.exit_code()
                }
                None => EXIT_OK,
            }
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
