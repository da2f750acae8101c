//! `xorlab`: runs the workbench experiments and prints machine-readable
//! reports (JSON lines, or CSV for plot tables).
//!
//! Exit codes: 0 all checks passed, 1 a check failed or another error,
//! 2 usage error, 3 size guard or time budget exceeded, 4 randomized
//! procedure failed.

mod commands;
mod config;
mod report;

use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;
use xorlab::XorError;

use report::Report;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Lib(#[from] XorError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Lib(e) => match e {
                XorError::Parse(_) | XorError::Domain(_) => 2,
                XorError::SizeLimit { .. } | XorError::Timeout { .. } => 3,
                XorError::RandomizedFailure { .. } => 4,
                _ => 1,
            },
            CliError::Io(_) => 1,
        }
    }

    fn kind(&self) -> &'static str {
        match self.exit_code() {
            2 => "usage",
            3 => "size-guard",
            4 => "randomized-failure",
            _ => "error",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "xorlab", version, about = "RankOne workbench experiments")]
struct Cli {
    /// Flat key=value file supplying flags for the command.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Report format (default: csv for `holder`, json otherwise).
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte Carlo run of the constant-query rank tester.
    RpdtSim(commands::RpdtSim),
    /// Correctness and cost of an Equality-oracle protocol.
    EqProtocol(commands::EqProtocolArgs),
    /// Exact and approximate spectral norms of an XOR problem.
    Spectral(commands::Spectral),
    /// Hölder lower bound table for n = 1..max-n.
    Holder(commands::Holder),
    /// Rank-≤1 triple census.
    Triples(commands::Triples),
    /// Fractional blocky cover number of a target.
    Fbc(commands::Fbc),
    /// Randomized rounding of a fractional cover.
    Round(commands::Round),
    /// Protocol → fractional cover → cover → protocol.
    NdPipeline(commands::NdPipelineArgs),
    /// Largest 1-chromatic rectangle and maxrect.
    Maxrect(commands::Maxrect),
    /// The full self-check suite.
    VerifyAll(commands::VerifyAll),
}

/// The effective configuration, as recorded in the report.
fn config_value<A: Args + Serialize>(cli: &Cli, args: &A) -> Value {
    let mut v = serde_json::to_value(args).expect("arguments serialize");
    if let Value::Object(m) = &mut v {
        if let Some(p) = &cli.config {
            m.insert("config".into(), p.display().to_string().into());
        }
        if let Some(f) = cli.format {
            m.insert(
                "format".into(),
                serde_json::to_value(f).expect("format serializes"),
            );
        }
    }
    v
}

fn run(cli: &Cli) -> Result<(String, bool), CliError> {
    if cli.format == Some(Format::Csv) && !matches!(cli.command, Command::Holder(_)) {
        return Err(CliError::Usage(
            "csv output is only available for `holder`".into(),
        ));
    }
    let json = |r: Report| {
        let ok = r.passed();
        (r.to_json(), ok)
    };
    let out = match &cli.command {
        Command::RpdtSim(a) => json(commands::rpdt_sim(a, config_value(cli, a))?),
        Command::EqProtocol(a) => json(commands::eq_protocol(a, config_value(cli, a))?),
        Command::Spectral(a) => json(commands::spectral(a, config_value(cli, a))?),
        Command::Holder(a) => {
            let (r, (header, rows)) = commands::holder(a, config_value(cli, a))?;
            let ok = r.passed();
            match cli.format.unwrap_or(Format::Csv) {
                Format::Csv => (r.to_csv(&header, &rows), ok),
                Format::Json => (r.to_json(), ok),
            }
        }
        Command::Triples(a) => json(commands::triples(a, config_value(cli, a))?),
        Command::Fbc(a) => json(commands::fbc(a, config_value(cli, a))?),
        Command::Round(a) => json(commands::round(a, config_value(cli, a))?),
        Command::NdPipeline(a) => json(commands::nd_pipeline(a, config_value(cli, a))?),
        Command::Maxrect(a) => json(commands::maxrect(a, config_value(cli, a))?),
        Command::VerifyAll(a) => json(commands::verify_all(a, config_value(cli, a))?),
    };
    Ok(out)
}

fn init_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("XORLAB_THREADS") {
        let n: usize = v.trim().parse().ok().filter(|&n| n >= 1).ok_or_else(|| {
            CliError::Usage(format!(
                "XORLAB_THREADS must be a positive integer, got {v:?}"
            ))
        })?;
        xorlab::par::init_threads(n);
    }
    Ok(())
}

fn fail(err: &CliError) -> i32 {
    let record = serde_json::json!({
        "version": report::VERSION,
        "error": err.to_string(),
        "kind": err.kind(),
        "pass": false,
    });
    println!("{record}");
    eprintln!("xorlab: {err}");
    err.exit_code()
}

fn main() {
    let code = (|| {
        let args = match config::expand(std::env::args().collect()) {
            Ok(a) => a,
            Err(e) => return fail(&e),
        };
        let cli = match Cli::try_parse_from(args) {
            Ok(c) => c,
            Err(e) => {
                let code = if e.use_stderr() { 2 } else { 0 };
                let _ = e.print();
                return code;
            }
        };
        if let Err(e) = init_threads() {
            return fail(&e);
        }
        match run(&cli) {
            Ok((text, ok)) => {
                let written = match &cli.output {
                    Some(path) => fs::write(path, &text),
                    None => {
                        print!("{text}");
                        Ok(())
                    }
                };
                if let Err(e) = written {
                    return fail(&CliError::Io(e));
                }
                if ok {
                    0
                } else {
                    1
                }
            }
            Err(e) => fail(&e),
        }
    })();
    std::process::exit(code);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_code_mapping() {
        let code = |e: XorError| CliError::Lib(e).exit_code();
        assert_eq!(
            code(XorError::SizeLimit {
                what: "n",
                value: 9,
                max: 6
            }),
            3
        );
        assert_eq!(code(XorError::Timeout { millis: 5 }), 3);
        assert_eq!(code(XorError::RandomizedFailure { attempts: 100 }), 4);
        assert_eq!(code(XorError::Parse("x".into())), 2);
        assert_eq!(code(XorError::Lp("x".into())), 1);
        assert_eq!(CliError::Usage("x".into()).exit_code(), 2);
    }
}
