//! `hrpe`: synthesize, estimate, and inspect ring-array channel snapshots.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use hrpe_cli::commands::{cmd_cpdp, cmd_estimate, cmd_eval, cmd_spectrum, cmd_synth};
use hrpe_cli::error::Result;

#[derive(Parser)]
#[command(
    name = "hrpe",
    version,
    about = "High-resolution multipath parameter estimation for circular arrays"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a binary array snapshot from a scenario file.
    Synth {
        scenario: PathBuf,
        /// Output snapshot (.ucah).
        #[arg(long)]
        out: PathBuf,
        /// Replace the scenario's noise seed.
        #[arg(long)]
        seed_override: Option<u64>,
    },
    /// Extract multipath parameters into a result bundle directory.
    Estimate {
        /// Input snapshot (.ucah).
        input: PathBuf,
        /// Estimation settings (TOML); defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Bundle directory, created if missing.
        #[arg(long)]
        out: PathBuf,
    },
    /// Export the joint delay-azimuth power spectrum.
    Spectrum {
        /// Input snapshot (.ucah).
        input: PathBuf,
        /// Output file; `.ucas` selects the binary container, else CSV.
        #[arg(long)]
        out: PathBuf,
        /// Zero-padding factors `delay,azimuth`.
        #[arg(long, default_value = "4,2", value_parser = parse_pads)]
        pads: (usize, usize),
    },
    /// Export the concatenated power delay profile as CSV.
    Cpdp {
        /// Input snapshot (.ucah).
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Frequency-domain taper.
        #[arg(long, value_enum, default_value_t = WindowArg::Hann)]
        window: WindowArg,
        /// Delay-axis zero-padding factor.
        #[arg(long, default_value_t = 1)]
        pad: usize,
    },
    /// Compare a result bundle against scenario ground truth.
    Eval {
        result_dir: PathBuf,
        scenario: PathBuf,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum WindowArg {
    None,
    Hann,
}

impl From<WindowArg> for hrpe_core::channel::Window {
    fn from(w: WindowArg) -> Self {
        match w {
            WindowArg::None => Self::None,
            WindowArg::Hann => Self::Hann,
        }
    }
}

fn parse_pads(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected `delay,azimuth`, found `{s}`"))?;
    let parse = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|_| format!("bad padding factor `{}`", t.trim()))
    };
    Ok((parse(a)?, parse(b)?))
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { scenario, out, seed_override } => {
            let s = cmd_synth(&scenario, &out, seed_override)?;
            println!(
                "wrote {}: {} x {} snapshot",
                s.out.display(),
                s.elements,
                s.points
            );
        }
        Command::Estimate { input, config, out } => {
            let s = cmd_estimate(&input, config.as_deref(), &out)?;
            println!(
                "{} paths ({}); front-end power {:.6e} = claimed {:.6e} + residual {:.6e}",
                s.paths,
                s.stop_reason,
                s.energy.estimate_power,
                s.energy.claimed_power,
                s.energy.residual_power
            );
            println!("bundle in {}", s.out_dir.display());
        }
        Command::Spectrum { input, out, pads } => {
            let s = cmd_spectrum(&input, &out, pads)?;
            println!(
                "wrote {}: {} azimuth x {} delay bins",
                s.out.display(),
                s.rows,
                s.cols
            );
        }
        Command::Cpdp { input, out, window, pad } => {
            let s = cmd_cpdp(&input, &out, window.into(), pad)?;
            println!(
                "wrote {}: {} elements x {} delay bins",
                s.out.display(),
                s.rows,
                s.cols
            );
        }
        Command::Eval { result_dir, scenario, out } => {
            let (_, report) = cmd_eval(&result_dir, &scenario)?;
            if let Some(out) = out {
                std::fs::write(&out, &report)?;
            }
            print!("{report}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
