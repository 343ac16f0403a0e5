//! The `qk` command line: `eval`, `gridsearch`, `table`, `plot` and
//! `combinations`.
//!
//! Settings come from flags, then a `--config` TOML file, then `QK_*`
//! environment variables, then built-in defaults. Usage errors exit with
//! status 2, runtime failures with 1.

mod args;
mod commands;
mod config;
mod registry;
mod settings;
mod spec;

use std::ffi::OsString;
use std::io::Write;

use clap::error::ErrorKind;
use clap::Parser;

pub use args::{Cli, Command, PlotKind};
pub use commands::{build_table, Stratum, TableCell};
pub use config::{env_layer, parse_config, Layer, Layers, KEYS};
pub use registry::{build_method, unknown_method_message, BuildError, METHODS};
pub use settings::RunSettings;
pub use spec::{
    parse_data_spec, parse_method_list, parse_method_spec, parse_param_flag, split_top_level, DataSpec, MethodSpec,
};

use crate::error::Error;

#[derive(Debug)]
pub enum CliError {
    Usage(Error),
    Runtime(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

fn settings(a: &args::RunArgs, env: &dyn Fn(&str) -> Option<String>) -> Result<RunSettings, CliError> {
    let file = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::file(p, e))?;
            parse_config(&text).map_err(CliError::Usage)?
        }
        None => Layer::new(),
    };
    RunSettings::resolve(&Layers(vec![a.layer(), file, env_layer(env)])).map_err(CliError::Usage)
}

fn dispatch(cli: Cli, env: &dyn Fn(&str) -> Option<String>, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> Result<(), CliError> {
    match cli.command {
        Command::Eval(a) => {
            let s = settings(&a, env)?;
            in_pool(s.jobs, || commands::run_campaign(&s, false, out, err))
        }
        Command::Gridsearch(a) => {
            let s = settings(&a, env)?;
            in_pool(s.jobs, || commands::run_campaign(&s, true, out, err))
        }
        Command::Table(a) => Ok(commands::run_table(&a, out)?),
        Command::Plot(a) => Ok(commands::run_plot(&a, out)?),
        Command::Combinations(a) => commands::run_combinations(&a, out).map_err(|e| match e {
            Error::InvalidArgument(_) | Error::BudgetTooSmall(_) => CliError::Usage(e),
            e => CliError::Runtime(e),
        }),
    }
}

fn in_pool<T: Send>(jobs: usize, f: impl FnOnce() -> Result<T, CliError> + Send) -> Result<T, CliError> {
    if jobs == 0 {
        return f();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Runtime(Error::invalid(format!("thread pool: {e}"))))?;
    pool.install(f)
}

/// Runs one invocation and returns the process exit status.
pub fn run<I, T>(args: I, env: &dyn Fn(&str) -> Option<String>, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = write!(out, "{}", e.render());
                    if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand { 2 } else { 0 }
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    2
                }
            };
            return code;
        }
    };
    match dispatch(cli, env, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let (CliError::Usage(inner) | CliError::Runtime(inner)) = &e;
            let _ = writeln!(err, "error: {inner}");
            e.exit_code()
        }
    }
}

/// Entry point used by the `qk` binary.
pub fn main() -> i32 {
    run(
        std::env::args_os(),
        &|k| std::env::var(k).ok(),
        &mut std::io::stdout(),
        &mut std::io::stderr(),
    )
}
