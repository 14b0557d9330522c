// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.

//! Batch driver: parses a command line, runs one analysis and writes its
//! report. Exit codes: 0 ok, 1 input or module error, 2 mathematical finding.

pub mod commands;
pub mod config;
pub mod examples;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Parser;

pub use commands::{run_command, CliError, Outcome};
pub use config::{Cli, Command, CommandName, Options};

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_FINDING: u8 = 2;

/// `report.json` → `report.<suffix>.tsv`.
pub fn table_path(report: &Path, suffix: &str) -> PathBuf {
    let stem = report
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    report.with_file_name(format!("{stem}.{suffix}.tsv"))
}

fn emit(o: &Options, command: CommandName, out: &Outcome) -> Result<(), CliError> {
    match &o.out {
        // examples with --out has already written its files; the manifest goes to stdout
        Some(path) if command != CommandName::Examples => {
            weightlab::corpus::write_atomic(path, out.report.as_bytes())?;
            for (suffix, text) in &out.tables {
                weightlab::corpus::write_atomic(&table_path(path, suffix), text.as_bytes())?;
            }
        }
        _ => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(out.report.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|source| weightlab::corpus::CorpusError::Io {
                    path: "<stdout>".into(),
                    source,
                })?;
        }
    }
    Ok(())
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> u8 {
    let (command, options) = cli.command.parts();
    let result = run_command(command, options)
        .and_then(|out| emit(options, command, &out).map(|_| out.finding));
    match result {
        Ok(false) => EXIT_OK,
        Ok(true) => EXIT_FINDING,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

/// Parses `args` (program name first) and runs. Usage errors exit with 1;
/// `--help` and `--version` exit with 0.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                EXIT_ERROR
            } else {
                EXIT_OK
            }
        }
    }
}
