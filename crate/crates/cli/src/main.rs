//! `m3net` command-line driver.

mod commands;
mod config;
mod error;
mod predictions;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use m3net_core::Variant;

use crate::config::RunConfig;
use crate::error::CliResult;

#[derive(Parser, Debug)]
#[command(name = "m3net", version, about = "Multi-path fusion model for incomplete multimodal data")]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

/// Flags that override the config file. Precedence: flag > file > default.
#[derive(Args, Debug, Default)]
struct Overrides {
    /// Flat TOML config file.
    #[arg(long, global = true, env = "M3NET_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    variant: Option<Variant>,
    #[arg(long, global = true)]
    dim: Option<usize>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[arg(long, global = true)]
    batch_size: Option<usize>,
    #[arg(long, global = true)]
    lr: Option<f64>,
    /// Master seed for splits, initialization and shuffling.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    folds: Option<usize>,
    /// Report pooled out-of-fold AUC as the cross-validation headline.
    #[arg(long, global = true)]
    pooled_auc: bool,
    /// Worker threads for folds and bootstrap resamples.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true)]
    n: Option<usize>,
    #[arg(long, global = true)]
    frac_both: Option<f64>,
    #[arg(long, global = true)]
    frac_image_only: Option<f64>,
    #[arg(long, global = true)]
    frac_bio_only: Option<f64>,
    #[arg(long, global = true)]
    bio_signal: Option<f64>,
    #[arg(long, global = true)]
    image_signal: Option<f64>,
    #[arg(long, global = true)]
    cohort_seed: Option<u64>,
    #[arg(long, global = true)]
    id_prefix: Option<String>,
    #[arg(long, global = true)]
    bootstrap_resamples: Option<usize>,
    #[arg(long, global = true)]
    bootstrap_seed: Option<u64>,
}

impl Overrides {
    fn resolve(&self) -> CliResult<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = &self.$f { c.$f = v.clone(); } )* };
        }
        set!(variant, dim, epochs, batch_size, lr, seed, folds, jobs, n, bio_signal, image_signal,
             cohort_seed, id_prefix, bootstrap_resamples, bootstrap_seed);
        if self.pooled_auc {
            c.pooled_auc = true;
        }
        for (flag, slot) in [
            (self.frac_both, &mut c.frac_both),
            (self.frac_image_only, &mut c.frac_image_only),
            (self.frac_bio_only, &mut c.frac_bio_only),
        ] {
            if flag.is_some() {
                *slot = flag;
            }
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Baseline {
    /// Drop incomplete subjects from training and validation.
    CompleteOnly,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic cohort file.
    Synth {
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-validate on a cohort.
    Cv {
        cohort: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[arg(long)]
        baseline: Option<Baseline>,
        /// Comma-separated dims; one report per dim.
        #[arg(long, value_delimiter = ',')]
        dim_sweep: Option<Vec<usize>>,
    },
    /// Train fold models on one cohort and validate on another.
    Extval {
        train: PathBuf,
        test: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Train one model (3:1 train/validation split) and save it.
    Train {
        cohort: PathBuf,
        #[arg(long)]
        model_out: PathBuf,
    },
    /// Score a cohort with a saved model.
    Predict {
        model: PathBuf,
        cohort: PathBuf,
        /// CSV output; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// AUC with bootstrap CI; with a second file, the paired test.
    Stats {
        predictions_a: PathBuf,
        predictions_b: Option<PathBuf>,
        /// `id,label` CSV overriding the files' label column.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Compare analytic and finite-difference gradients.
    Gradcheck {
        /// Central-difference step.
        #[arg(long, default_value_t = 1e-5)]
        h: f64,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
        /// Dims checked for the second variant.
        #[arg(long, value_delimiter = ',', default_values_t = vec![1, 5, 20])]
        dims: Vec<usize>,
        #[arg(long, hide = true, num_args = 0..=1, default_missing_value = "0.1")]
        corrupt_gradient: Option<f64>,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    let config = cli.overrides.resolve()?;
    match cli.command {
        Command::Synth { out } => commands::synth(&config, &out),
        Command::Cv {
            cohort,
            out_dir,
            baseline,
            dim_sweep,
        } => commands::cv(&config, &cohort, &out_dir, baseline.is_some(), dim_sweep.as_deref()),
        Command::Extval { train, test, out_dir } => commands::extval(&config, &train, &test, &out_dir),
        Command::Train { cohort, model_out } => commands::train(&config, &cohort, &model_out),
        Command::Predict { model, cohort, out } => commands::predict(&model, &cohort, out.as_deref()),
        Command::Stats {
            predictions_a,
            predictions_b,
            labels,
            json,
        } => commands::stats(&config, &predictions_a, predictions_b.as_deref(), labels.as_deref(), json),
        Command::Gradcheck {
            h,
            tolerance,
            dims,
            corrupt_gradient,
        } => commands::gradcheck(&config, h, tolerance, &dims, corrupt_gradient),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
