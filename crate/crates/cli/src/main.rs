use std::io::Write;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

mod commands;
mod settings;

use settings::Settings;

/// NENU constellation design and BICM-OFDM experiments.
#[derive(Debug, Parser)]
#[command(name = "nenu", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write an (M,N)-PAM constellation table.
    Design(Settings),
    /// BMI against SNR for one constellation.
    Bmi(Settings),
    /// Grid search of (N, rho) at one SNR.
    Optimize(Settings),
    /// PAPR CCDF of the transmit waveform.
    Papr(Settings),
    /// Coded bit error rate against SNR.
    Ber(Settings),
}

fn error_line(kind: &str, message: &str) {
    let line = serde_json::json!({ "error": { "kind": kind, "message": message } });
    eprintln!("{line}");
}

type Runner = fn(&Settings) -> Result<String>;

fn run(cli: Cli) -> Result<()> {
    let (name, settings, f): (&str, Settings, Runner) = match cli.command {
        Command::Design(s) => ("design", s, commands::cmd_design),
        Command::Bmi(s) => ("bmi", s, commands::cmd_bmi),
        Command::Optimize(s) => ("optimize", s, commands::cmd_optimize),
        Command::Papr(s) => ("papr", s, commands::cmd_papr),
        Command::Ber(s) => ("ber", s, commands::cmd_ber),
    };
    let settings = settings.resolve()?;
    let start = Instant::now();
    let text = f(&settings)?;
    match &settings.out {
        Some(path) => std::fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    eprintln!("{name}: done in {:.2} s", start.elapsed().as_secs_f64());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                e.exit()
            }
            _ => {
                error_line("usage", e.to_string().trim());
                return ExitCode::from(2);
            }
        },
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = if e.chain().any(|c| c.is::<std::io::Error>()) {
                "io"
            } else {
                "validation"
            };
            error_line(kind, &format!("{e:#}"));
            ExitCode::from(1)
        }
    }
}
