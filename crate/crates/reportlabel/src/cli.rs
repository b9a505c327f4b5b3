//! Argument parsing and dispatch.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::{cmd_augment, cmd_compare, cmd_evaluate, cmd_label, cmd_prevalence, cmd_train, AugmentOutcome, CliError};
use crate::config::RawConfig;

#[derive(Debug, Parser)]
#[command(name = "reportlabel", version, about = "Train, apply and evaluate radiology report labelers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML configuration file.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Override a setting, e.g. `hyper.learning_rate=1e-4`. Repeatable;
    /// applied in order after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Seed of the command's random choices.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output path: run directory, CSV file or report directory.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Suppress progress output.
    #[arg(long, short)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a labeler and write a run directory.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Label a reports CSV with a checkpoint.
    Label {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        reports: Option<PathBuf>,
    },
    /// Weighted F1 with bootstrap intervals.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        gold: Option<PathBuf>,
        #[arg(long)]
        pred: Option<PathBuf>,
    },
    /// Paired bootstrap comparison; differences are A minus B.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        gold: Option<PathBuf>,
        #[arg(long)]
        pred_a: Option<PathBuf>,
        #[arg(long)]
        pred_b: Option<PathBuf>,
    },
    /// Add one backtranslated copy per train item.
    Augment {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: Option<PathBuf>,
        /// Also add copies of dev-side items.
        #[arg(long)]
        augment_dev: bool,
    },
    /// Class counts per condition.
    Prevalence {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

fn raw(common: &Common, seed_key: Option<&str>, paths: &[(&str, &Option<PathBuf>)]) -> Result<RawConfig, CliError> {
    let mut raw = RawConfig::load(common.config.as_deref(), &common.set)?;
    for (key, path) in paths.iter().chain([&("out", &common.out)]) {
        if let Some(p) = path {
            raw.set_path(key, p)?;
        }
    }
    if let (Some(key), Some(seed)) = (seed_key, common.seed) {
        raw.set(key, seed as i64)?;
    }
    Ok(raw)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train { common } => {
            let cfg = raw(&common, Some("hyper.seed"), &[])?.parse()?;
            cmd_train(&cfg, common.quiet)?;
        }
        Command::Label {
            common,
            checkpoint,
            reports,
        } => {
            let cfg = raw(&common, None, &[("checkpoint", &checkpoint), ("reports", &reports)])?.parse()?;
            let n = cmd_label(&cfg)?;
            if !common.quiet {
                eprintln!("labeled {n} report(s)");
            }
        }
        Command::Evaluate { common, gold, pred } => {
            let cfg = raw(&common, Some("bootstrap.seed"), &[("gold", &gold), ("pred", &pred)])?.parse()?;
            cmd_evaluate(&cfg)?;
        }
        Command::Compare {
            common,
            gold,
            pred_a,
            pred_b,
        } => {
            let paths = [("gold", &gold), ("pred_a", &pred_a), ("pred_b", &pred_b)];
            let cfg = raw(&common, Some("bootstrap.seed"), &paths)?.parse()?;
            cmd_compare(&cfg)?;
        }
        Command::Augment { common, input, augment_dev } => {
            let mut raw = raw(&common, Some("split_seed"), &[("input", &input)])?;
            if augment_dev {
                raw.set("augment_dev", true)?;
            }
            let cfg = raw.parse()?;
            match cmd_augment(&cfg)? {
                AugmentOutcome::Written { rows, fallbacks } if !common.quiet => {
                    eprintln!("wrote {rows} rows ({fallbacks} fallback copies)")
                }
                AugmentOutcome::AwaitingTranslation { input, lines } => eprintln!(
                    "wrote {lines} lines to {}; translate them into output.txt beside it and re-run",
                    input.display()
                ),
                _ => {}
            }
        }
        Command::Prevalence { common, input } => {
            let cfg = raw(&common, None, &[("input", &input)])?.parse()?;
            cmd_prevalence(&cfg)?;
        }
    }
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => 0,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
        Err(_) => 2,
    }
}
