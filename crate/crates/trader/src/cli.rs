//! Command-line surface. Flags override values from `--config`.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::commands;
use crate::config::{Mode, RunnerConfig};
use crate::error::{Result, EXIT_OK, EXIT_USAGE};
use crate::synthetic::SynthSpec;

#[derive(Debug, Parser)]
#[command(name = "ctrnn-trader", version, about = "Online CTRNN price forecasting, adaptive indicators and basket backtests")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

/// Settings shared by every subcommand.
#[derive(Debug, Args, Default)]
pub struct Common {
    /// JSON configuration file; flags given here win over it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub timeframe: Option<String>,
    #[arg(long, global = true)]
    pub universe: Option<PathBuf>,
    #[arg(long, global = true)]
    pub horizon: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true)]
    pub days: Option<usize>,
    #[arg(long, global = true)]
    pub basket: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Read a bar CSV, convert it to the timeframe and optionally clean it.
    Ingest {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        clean: bool,
    },
    /// Train one network per symbol and write checkpoints.
    Train,
    /// Replay a symbol through a checkpoint and print its forecast.
    Predict {
        #[arg(long)]
        symbol: String,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Daily-reselected basket backtest over the universe.
    Backtest,
    /// Run the online loop over the universe and export every output.
    Stream,
    /// Chart bundle, indicator and scalogram files for one symbol.
    Chart {
        #[arg(long)]
        symbol: String,
    },
    /// Write a seeded synthetic universe of session-hours bars.
    Synth {
        #[arg(long, default_value_t = 8)]
        symbols: usize,
        #[arg(long, default_value_t = 0.0005)]
        noise: f64,
    },
}

impl Common {
    pub fn apply(&self, mut cfg: RunnerConfig) -> RunnerConfig {
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        if let Some(v) = &self.timeframe {
            cfg.timeframe = v.clone();
        }
        if let Some(v) = &self.universe {
            cfg.universe = Some(v.clone());
        }
        if let Some(v) = self.horizon {
            cfg.horizon = v;
            // A shorter horizon cannot plot more points than it predicts.
            cfg.plotted = cfg.plotted.min(v.max(1));
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.workers {
            cfg.workers = v;
        }
        if let Some(v) = self.days {
            cfg.days = v;
        }
        if let Some(v) = self.basket {
            cfg.basket = v;
            cfg.split = cfg.split.min(v);
        }
        cfg
    }
}

pub fn config_for(cli: &Cli) -> Result<RunnerConfig> {
    let cfg = cli.common.apply(RunnerConfig::load_or_default(cli.common.config.as_deref())?);
    Ok(match cli.command {
        Command::Stream => RunnerConfig {
            mode: Mode::Stream,
            ..cfg
        },
        _ => cfg,
    })
}

pub fn execute(cli: &Cli) -> Result<String> {
    let cfg = config_for(cli)?;
    match &cli.command {
        Command::Ingest { input, clean } => commands::ingest(&cfg, input, *clean),
        Command::Train => commands::train(&cfg),
        Command::Predict { symbol, checkpoint } => commands::predict(&cfg, symbol, checkpoint),
        Command::Backtest => commands::backtest(&cfg),
        Command::Stream => commands::stream(&cfg),
        Command::Chart { symbol } => commands::chart(&cfg, symbol, &cfg.out),
        Command::Synth { symbols, noise } => {
            let spec = SynthSpec {
                symbols: *symbols,
                days: cli.common.days.unwrap_or(SynthSpec::default().days),
                seed: cfg.seed,
                timeframe: cfg.timeframe()?,
                noise: *noise,
                ..SynthSpec::default()
            };
            commands::synth(&cfg, &spec, &cfg.out)
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match execute(&cli) {
        Ok(summary) => {
            print!("{summary}");
            if !summary.ends_with('\n') {
                println!();
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
