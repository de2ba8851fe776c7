//! `fishy`: run coupled-chain experiments from flags or a TOML config and
//! write per-replicate tables and JSON summaries.

mod commands;
mod config;
mod output;

use std::io::Write;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use commands::Outcome;
use config::{Flags, Settings};

#[derive(Parser)]
#[command(
    name = "fishy",
    version,
    about = "Unbiased Poisson-equation and asymptotic variance estimation with coupled chains"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Meeting times of coupled lagged chains
    Meetings(Flags),
    /// Upper bounds on the total variation distance to stationarity
    Tvbound(Flags),
    /// Log-log regression of the meeting-time survival tail
    Tailfit(Flags),
    /// Choose k, L and ell from a pilot meeting run
    Pilot(Flags),
    /// Fishy function estimates on a grid of states
    Fishy(Flags),
    /// Unbiased estimates of stationary expectations
    Umcmc(Flags),
    /// Long-run asymptotic variance estimates
    Epave(Flags),
    /// Subsampled unbiased asymptotic variance estimates
    Suave(Flags),
    /// Compare AR(1) meeting-time survival with its analytical bound
    TheoryCheck(Flags),
    /// Exact answers for finite chains and AR(1)
    Oracle(Flags),
}

const EXIT_RUNTIME: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

fn dispatch(cmd: &Command, s: &Settings) -> Result<Outcome> {
    match cmd {
        Command::Meetings(_) => commands::meetings(s),
        Command::Tvbound(_) => commands::tvbound(s),
        Command::Tailfit(_) => commands::tailfit(s),
        Command::Pilot(_) => commands::pilot(s),
        Command::Fishy(_) => commands::fishy(s),
        Command::Umcmc(_) => commands::umcmc(s),
        Command::Epave(_) => commands::epave_cmd(s),
        Command::Suave(_) => commands::suave_cmd(s),
        Command::TheoryCheck(_) => commands::theory_check(s),
        Command::Oracle(_) => commands::oracle(s),
    }
}

fn flags(cmd: &Command) -> &Flags {
    match cmd {
        Command::Meetings(f)
        | Command::Tvbound(f)
        | Command::Tailfit(f)
        | Command::Pilot(f)
        | Command::Fishy(f)
        | Command::Umcmc(f)
        | Command::Epave(f)
        | Command::Suave(f)
        | Command::TheoryCheck(f)
        | Command::Oracle(f) => f,
    }
}

/// Table to `--output` (or stdout); summary to `--summary`, else stdout
/// when the table went to a file, else stderr.
fn emit(s: &Settings, out: &Outcome) -> Result<()> {
    output::write_to(s.output.as_deref(), |w| out.table.write(s.format, w))?;
    if let Some(summary) = &out.summary {
        match (&s.summary, &s.output) {
            (Some(p), _) => output::write_to(Some(p), |w| output::write_json(w, summary))?,
            (None, Some(_)) => output::write_to(None, |w| output::write_json(w, summary))?,
            (None, None) => {
                let stderr = std::io::stderr();
                let mut w = stderr.lock();
                output::write_json(&mut w, summary)?;
                w.flush()?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let settings = match config::load(flags(&cli.command)) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let outcome = match dispatch(&cli.command, &settings) {
        Ok(o) => o.finish(),
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    };
    if let Err(e) = emit(&settings, &outcome) {
        eprintln!("error: {e:#}");
        return ExitCode::from(EXIT_RUNTIME);
    }
    if outcome.failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        for (rep, msg) in &outcome.failures {
            eprintln!("replicate {rep} failed: {msg}");
        }
        eprintln!(
            "error: {} of the replicates failed; outputs are partial",
            outcome.failures.len()
        );
        ExitCode::from(EXIT_PARTIAL)
    }
}
