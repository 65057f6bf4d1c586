//! `normbound` command-line front end.
//!
//! Exit codes: 0 pass, 1 inequality violation, 2 usage, 3 schema or model
//! validation, 4 resource limits.

mod args;
mod commands;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Format};
use commands::Output;

pub struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<normbound::Error> for CliError {
    fn from(e: normbound::Error) -> Self {
        let code = match e {
            normbound::Error::Domain(_) => 2,
            normbound::Error::Schema { .. } | normbound::Error::Validation { .. } => 3,
            normbound::Error::Range(_) => 4,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn render(out: &Output, format: Format) -> String {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&out.record).expect("serializable");
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut s = out.csv_header.join(",");
            s.push('\n');
            for row in &out.csv_rows {
                s.push_str(&row.iter().map(|f| csv_field(f)).collect::<Vec<_>>().join(","));
                s.push('\n');
            }
            s
        }
    }
}

fn execute(cli: &Cli) -> Result<bool, CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError {
                code: 4,
                message: format!("cannot start worker pool: {e}"),
            })?;
    }
    let out = commands::run(&cli.command)?;
    let text = render(&out, cli.format);
    match &cli.out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError {
            code: 4,
            message: format!("cannot write {}: {e}", path.display()),
        })?,
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| CliError {
            code: 4,
            message: format!("cannot write to stdout: {e}"),
        })?,
    }
    Ok(out.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("normbound: at least one inequality failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("normbound: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
