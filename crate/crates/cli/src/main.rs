//! `paytv`: honest demos, attack campaigns, hash-count tables and the
//! security matrix for the Chen and improved pay-TV schemes.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use paytv_core::config::SEED_ENV;
use paytv_core::{Config, Phase, Scheme, TokenChain};

#[derive(Debug, Parser)]
#[command(name = "paytv", version, about = "Pay-TV authentication lab")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// TOML config file; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true, env = SEED_ENV)]
    seed: Option<u64>,
    /// Word width L in bytes (2..=32).
    #[arg(long, global = true)]
    width: Option<usize>,
    /// Freshness window in ticks.
    #[arg(long, global = true)]
    delta_t: Option<u64>,
    /// Token a hand-off proves: theta or gamma.
    #[arg(long, global = true, value_parser = parse_chain)]
    token_chain: Option<TokenChain>,
    /// Directory for the text and JSON report files.
    #[arg(long, global = true, default_value = "paytv-reports")]
    out_dir: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// One honest run up to `phase`; prints that phase's two messages.
    Demo {
        #[arg(value_parser = parse_scheme)]
        scheme: Scheme,
        #[arg(value_parser = parse_phase)]
        phase: Phase,
    },
    /// Runs one attack game.
    Attack(commands::AttackArgs),
    /// Hash counts and derived times per scheme.
    Bench {
        #[arg(long, value_parser = parse_scheme)]
        scheme: Option<Scheme>,
        /// Also measure wall-clock time per issue round (informational).
        #[arg(long)]
        wall_clock: bool,
        #[arg(long, default_value_t = 1000)]
        rounds: u64,
    },
    /// Security-feature verdicts, each backed by executed checks.
    Matrix(commands::MatrixArgs),
    /// Re-delivers recorded logins `offset` ticks after they were sent.
    Replay {
        #[arg(long)]
        offset: Option<u64>,
        #[arg(long, default_value_t = 100)]
        runs: u64,
        #[arg(long, value_parser = parse_scheme)]
        scheme: Option<Scheme>,
    },
    /// Attacks beyond the six games, reported without expectations.
    Probes {
        #[arg(long, default_value_t = 16)]
        users: u64,
    },
}

const OUT_OF_SCOPE: [&str; 3] = ["kim", "li", "yeh"];

pub(crate) fn parse_scheme(s: &str) -> Result<Scheme, String> {
    let lower = s.to_ascii_lowercase();
    if OUT_OF_SCOPE.contains(&lower.as_str()) {
        return Err(format!(
            "the {lower} scheme is outside this tool's scope; only chen and improved are implemented"
        ));
    }
    lower.parse().map_err(|e| format!("{e}; expected chen or improved"))
}

fn parse_phase(s: &str) -> Result<Phase, String> {
    match s.parse() {
        Ok(Phase::Registration) => Err("registration has no channel messages; use issue, subscription or handoff".into()),
        Ok(p) => Ok(p),
        Err(e) => Err(format!("{e}")),
    }
}

fn parse_chain(s: &str) -> Result<TokenChain, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn load_config(g: &GlobalArgs) -> Result<(Config, &'static str)> {
    let mut cfg = match &g.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => Config::default(),
    };
    let mut source = if g.config.is_some() { "config" } else { "default" };
    if let Some(seed) = g.seed {
        cfg.seed = seed;
        source = "flag/env";
    }
    if let Some(w) = g.width {
        cfg.width = w;
    }
    if let Some(d) = g.delta_t {
        cfg.delta_t = d;
    }
    if let Some(c) = g.token_chain {
        cfg.token_chain = c;
    }
    cfg.validate()?;
    Ok((cfg, source))
}

fn run(cli: Cli) -> Result<bool> {
    let (cfg, source) = load_config(&cli.global)?;
    println!("seed={} ({source})", cfg.seed);
    let report = match cli.command {
        Command::Demo { scheme, phase } => commands::demo(&cfg, scheme, phase)?,
        Command::Attack(args) => commands::attack(&cfg, &args)?,
        Command::Bench {
            scheme,
            wall_clock,
            rounds,
        } => commands::bench(&cfg, scheme, wall_clock.then_some(rounds))?,
        Command::Matrix(args) => commands::matrix(&cfg, &args)?,
        Command::Replay { offset, runs, scheme } => commands::replay(&cfg, offset, runs, scheme)?,
        Command::Probes { users } => commands::probes(&cfg, users)?,
    };
    for line in &report.lines {
        println!("{line}");
    }
    let (txt, json) = report.write(&cli.global.out_dir)?;
    println!("report: {} {}", txt.display(), json.display());
    println!("{}", if report.met { "all expectations met" } else { "expectations NOT met" });
    Ok(report.met)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_is_well_formed() {
        Cli::command().debug_assert();
    }

    #[test]
    fn out_of_scope_schemes() {
        for s in ["kim", "Li", "YEH"] {
            assert!(parse_scheme(s).unwrap_err().contains("outside"));
        }
        assert_eq!(parse_scheme("Chen").unwrap(), Scheme::Chen);
        assert!(parse_scheme("foo").is_err());
    }

    #[test]
    fn registration_is_not_a_demo_phase() {
        assert!(parse_phase("registration").is_err());
        assert_eq!(parse_phase("handoff").unwrap(), Phase::Handoff);
    }
}
