//! Command-line front end for `nhtopo`.

pub mod commands;
pub mod error;
pub mod matrix_file;
pub mod output;
pub mod settings;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::parser::ValueSource;
use clap::{Arg, ArgMatches, Command as ClapCommand};
use nhtopo::sweep::Execution;

pub use commands::Command;
pub use error::{CliError, Result};
use settings::{RunConfig, Settings, KEYS, PRESETS, THREADS_ENV};

fn cli() -> ClapCommand {
    let mut app = ClapCommand::new("nhtopo")
        .about("Topology and steady states of a dissipative two-band chain")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true)
        .arg(
            Arg::new("config")
                .long("config")
                .value_name("PATH")
                .global(true)
                .help("file of 'key = value' lines, overridden by flags"),
        )
        .arg(
            Arg::new("preset")
                .long("preset")
                .value_name("NAME")
                .global(true)
                .help(format!("parameter preset: {}", PRESETS.join(", "))),
        );
    for key in KEYS {
        app = app.arg(
            Arg::new(key.name)
                .long(key.name)
                .value_name(key.value_name)
                .allow_negative_numbers(true)
                .global(true)
                .help(key.help),
        );
    }
    for (_, name, about) in Command::ALL {
        app = app.subcommand(ClapCommand::new(name).about(about));
    }
    app
}

/// Values given explicitly on the command line, wherever they appear.
fn flag_settings(matches: &ArgMatches) -> Result<Settings> {
    let mut settings = Settings::default();
    let names = KEYS.iter().map(|k| k.name).chain(["preset"]);
    for name in names {
        if matches.value_source(name) == Some(ValueSource::CommandLine) {
            if let Some(value) = matches.get_one::<String>(name) {
                settings.insert(name, value.clone())?;
            }
        }
    }
    Ok(settings)
}

/// A parsed invocation, ready to run.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub command: Command,
    pub config: RunConfig,
}

pub enum Parsed {
    Run(Box<Invocation>),
    /// Help or version text, to be printed with exit code 0.
    Info(String),
}

pub fn parse<I, T>(args: I, env_threads: Option<String>) -> Result<Parsed>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match cli().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    Ok(Parsed::Info(e.render().to_string()))
                }
                _ => {
                    let text = e.render().to_string();
                    let text = text.strip_prefix("error: ").unwrap_or(&text);
                    Err(CliError::Usage(text.trim_end().to_string()))
                }
            };
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let command = Command::from_name(name).expect("subcommands come from Command::ALL");
    let file = match sub.get_one::<String>("config") {
        Some(path) => Settings::read_file(&PathBuf::from(path))?,
        None => Settings::default(),
    };
    let settings = Settings::merge(file, env_threads, flag_settings(sub)?)?;
    Ok(Parsed::Run(Box::new(Invocation {
        command,
        config: RunConfig::from_settings(&settings)?,
    })))
}

pub fn env_threads() -> Option<String> {
    std::env::var(THREADS_ENV).ok().filter(|v| !v.trim().is_empty())
}

impl Invocation {
    pub fn execute(&self) -> Result<output::Output> {
        let threads = self.config.threads;
        let execution = if threads == Some(1) {
            Execution::Sequential
        } else {
            Execution::Parallel
        };
        #[cfg(feature = "parallel")]
        if let Some(n) = threads.filter(|&n| n > 1) {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Usage(format!("cannot start {n} threads: {e}")))?;
            return pool.install(|| self.command.run(&self.config, execution));
        }
        self.command.run(&self.config, execution)
    }

    /// Runs the command and writes its output to `--out` or `stdout`.
    pub fn run_to(&self, stdout: &mut dyn Write) -> Result<()> {
        let output = self.execute()?;
        match &self.config.out {
            Some(path) => {
                let io = |source| CliError::Io {
                    path: path.clone(),
                    source,
                };
                let mut file = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
                output.write(self.config.format, &mut file)?;
                file.flush().map_err(io)
            }
            None => output.write(self.config.format, stdout),
        }
    }
}
