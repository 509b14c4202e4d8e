//! `wdrec`: ingestion, training, evaluation and recommendation driven by a
//! TOML run configuration.

mod commands;
mod layout;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wdrec_core::config::RunConfig;
use wdrec_core::experiment::Variant;
use wdrec_core::synth::SynthConfig;
use wdrec_core::Error;

use crate::commands::Component;
use crate::layout::Layout;

#[derive(Parser)]
#[command(name = "wdrec", version, about = "Hybrid recommender for knowledge-graph items")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the global seed; component seeds are re-derived from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides `out` in the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse inputs, drop high-rate editors, filter, split, and write stats.
    Ingest,
    /// Print raw and filtered dataset statistics as JSON.
    Stats,
    /// Recompute the train/validation/test split of the ingested corpus.
    Split,
    /// Train one component.
    Train {
        #[arg(value_enum)]
        component: Component,
    },
    /// Evaluate model variants and write JSON reports plus a CSV table.
    Eval {
        /// Comma-separated subset of cf, content, full, unweighted.
        #[arg(long, value_delimiter = ',', default_value = "cf,content,full,unweighted")]
        variants: Vec<Variant>,
        /// Include per-editor metrics in the JSON reports.
        #[arg(long)]
        per_editor: bool,
    },
    /// Top-k items for one editor under the full model.
    Recommend {
        #[arg(long)]
        editor: String,
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// Items to fold the editor in from (required for unknown editors).
        #[arg(long, value_delimiter = ',')]
        items: Vec<String>,
    },
    /// Cut equally sized sub-matrices at target sparsities.
    Slice {
        /// Comma-separated target sparsities in [0, 1].
        #[arg(long, value_delimiter = ',', required = true)]
        targets: Vec<f64>,
        #[arg(long)]
        editors: usize,
        #[arg(long)]
        items: usize,
    },
    /// Write a synthetic corpus and a matching config into `--out`.
    Synth {
        #[arg(long, default_value_t = 500)]
        editors: usize,
        #[arg(long, default_value_t = 1000)]
        items: usize,
        #[arg(long, default_value_t = 32)]
        dim: usize,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Dependency(_) => 3,
        Error::Divergence(_) => 4,
        _ => 2,
    }
}

fn load_config(cli: &Cli) -> Result<(RunConfig, Layout), Error> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("--config <path> is required for this command".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.apply_seed(seed);
    }
    let out = match &cli.out {
        Some(o) => o.clone(),
        None if cfg.out.is_relative() => path.parent().unwrap_or(std::path::Path::new("")).join(&cfg.out),
        None => cfg.out.clone(),
    };
    Ok((cfg, Layout::new(&out)))
}

fn run(cli: &Cli) -> Result<(), Error> {
    if let Command::Synth { editors, items, dim } = &cli.command {
        let out = cli
            .out
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("--out <dir> is required for synth".into()))?;
        let synth = SynthConfig {
            n_editors: *editors,
            n_items: *items,
            seed: cli.seed.unwrap_or(0),
            ..SynthConfig::default()
        };
        return commands::synth(out, &synth, *dim);
    }
    let (cfg, layout) = load_config(cli)?;
    match &cli.command {
        Command::Ingest => commands::ingest(&cfg, &layout),
        Command::Stats => commands::print_stats(&cfg),
        Command::Split => commands::split(&cfg, &layout),
        Command::Train { component } => commands::train(*component, &cfg, &layout),
        Command::Eval { variants, per_editor } => commands::eval(&cfg, &layout, variants, *per_editor).map(|_| ()),
        Command::Recommend { editor, k, items } => {
            let rec = commands::recommend(&cfg, &layout, editor, *k, items)?;
            for (rank, (id, score)) in rec.items.iter().enumerate() {
                println!("{}\t{id}\t{score:.6}", rank + 1);
            }
            let [v, c, r] = rec.mean_weights;
            eprintln!("gate weights (mean over candidates): v={v:.4} c={c:.4} r={r:.4}");
            Ok(())
        }
        Command::Slice { targets, editors, items } => commands::slice(&layout, targets, (*editors, *items)),
        Command::Synth { .. } => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
