use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};

use sdi_qrng_cli::commands;
use sdi_qrng_cli::config::{self, Config};
use sdi_qrng_cli::output::{emit, Format, Report};

#[derive(Parser)]
#[command(name = "sdi-qrng", version, about = "Source-device-independent QRNG simulator and security calculator")]
struct Cli {
    /// TOML configuration; the reference setup is used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output when omitted. For `run` this is the bitstream.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Certified min-entropy over a power and splitter grid (CSV by default).
    Analyze,
    /// Device-dependent versus SDI entropy with a simulated histogram (JSON by default).
    Compare,
    /// Simulate a full run: packed bitstream to --out, report to stdout or --report.
    Run {
        #[arg(long)]
        report: Option<PathBuf>,
        /// Also write the bits as ASCII, one 1 Mb sequence per line, for the NIST STS.
        #[arg(long)]
        sts: Option<PathBuf>,
    },
    /// Light-injection sweep with the analytic pass curve and fit (CSV by default).
    Attack,
    /// Statistical battery on a packed bitstream (JSON by default).
    Stats {
        #[arg(long)]
        input: PathBuf,
        /// Number of valid bits; defaults to eight per byte.
        #[arg(long)]
        bits: Option<usize>,
    },
    /// Print the reference configuration.
    Config,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let cfg = match &cli.config {
        Some(p) => config::load(p)?,
        None => Config::default(),
    };
    let out = cli.out.as_deref();
    match cli.command {
        Command::Analyze => emit(&commands::analyze(&cfg)?.render(cli.format.unwrap_or(Format::Csv))?, out),
        Command::Compare => emit(&commands::compare(&cfg, cli.seed)?.render(cli.format.unwrap_or(Format::Json))?, out),
        Command::Run { report, sts } => {
            let (summary, bits) = commands::run(&cfg, cli.seed)?;
            match out {
                Some(p) => emit_bytes(&bits.to_bytes(), p)?,
                None if sts.is_none() => bail!("run needs --out for the bitstream"),
                None => {}
            }
            if let Some(p) = &sts {
                commands::write_sts_ascii(&bits, p)?;
            }
            emit(&summary.render(cli.format.unwrap_or(Format::Json))?, report.as_deref())?;
            if let Some(s) = summary.shortfall {
                eprintln!(
                    "warning: only {} of {} blocks produced within run.max_rounds",
                    s.blocks_produced, s.blocks_requested
                );
            }
            Ok(())
        }
        Command::Attack => emit(&commands::attack(&cfg, cli.seed)?.render(cli.format.unwrap_or(Format::Csv))?, out),
        Command::Stats { input, bits } => {
            let bits = commands::read_bitstream(&input, bits)?;
            emit(&commands::stats(&bits)?.render(cli.format.unwrap_or(Format::Json))?, out)
        }
        Command::Config => emit(&config::default_toml(), out),
    }
}

fn emit_bytes(bytes: &[u8], path: &std::path::Path) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| anyhow::anyhow!("writing {}: {e}", path.display()))
}
