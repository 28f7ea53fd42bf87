use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use compgen::decoding::DecodeMode;
use compgen_cli::config::OUTPUT_DIR_ENV;
use compgen_cli::{cmd_build_dataset, cmd_evaluate, cmd_generate, cmd_pipeline, cmd_sweep, cmd_train, CliError, GenerateRequest, PipelineConfig};

#[derive(Parser)]
#[command(name = "compgen", version, about = "Mine comparative review sentences and generate aspect-guided comparisons")]
struct Cli {
    /// TOML pipeline config.
    #[arg(short, long, default_value = "compgen.toml")]
    config: PathBuf,
    /// Output directory (overrides the config file).
    #[arg(long, env = OUTPUT_DIR_ENV)]
    output_dir: Option<PathBuf>,
    /// Global seed for classifier training, splitting and decoding.
    #[arg(long)]
    seed: Option<u64>,
    /// Repeat for more log output.
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Label comparative sentences and write the split dataset.
    BuildDataset {
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Train the language model and embeddings and mine aspects.
    Train,
    /// Generate one comparative sentence per item.
    Generate {
        /// Item to generate for; repeatable. Defaults to every item.
        #[arg(long = "item")]
        items: Vec<String>,
        /// Source review text (default: the item's review with the lowest id).
        #[arg(long)]
        prompt: Option<String>,
        /// Text the decoder continues from.
        #[arg(long)]
        prefix: Option<String>,
        #[arg(long, value_parser = parse_mode)]
        mode: Option<DecodeMode>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(short)]
        k: Option<usize>,
        #[arg(long)]
        max_len: Option<usize>,
        /// Record per-step candidate scores.
        #[arg(long)]
        trace: bool,
        /// Run file (default: generations.jsonl in the output directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a run file.
    Evaluate {
        /// Run file (default: generations.jsonl in the output directory).
        #[arg(long)]
        run: Option<PathBuf>,
    },
    /// Generate and evaluate over the configured alpha, beta, k grid.
    Sweep,
    /// build-dataset, train, generate and evaluate in one go.
    Pipeline,
}

fn parse_mode(s: &str) -> Result<DecodeMode, String> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_")))
        .map_err(|_| format!("unknown mode {s}; expected greedy, stochastic, contrastive, agg or bow-rescore"))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = PipelineConfig::load(&cli.config)?;
    if let Some(dir) = cli.output_dir {
        cfg.paths.output_dir = dir;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.decode.seed = seed;
    }
    match cli.command {
        Command::BuildDataset { threshold } => {
            if let Some(t) = threshold {
                cfg.extraction.threshold = t;
            }
            let ds = cmd_build_dataset(&cfg)?;
            print!("{}", compgen::corpus::dataset_stats(&ds));
        }
        Command::Train => cmd_train(&cfg)?,
        Command::Generate { items, prompt, prefix, mode, alpha, beta, k, max_len, trace, out } => {
            let d = &mut cfg.decode;
            d.mode = mode.unwrap_or(d.mode);
            d.alpha = alpha.unwrap_or(d.alpha);
            d.beta = beta.unwrap_or(d.beta);
            d.k = k.unwrap_or(d.k);
            d.max_len = max_len.unwrap_or(d.max_len);
            let req = GenerateRequest { items, prompt, prefix, trace };
            for g in cmd_generate(&cfg, &req, out.as_deref())? {
                println!("{}\t{}", g.item_id, g.text);
            }
        }
        Command::Evaluate { run } => print!("{}", cmd_evaluate(&cfg, run.as_deref())?),
        Command::Sweep => {
            let rows = cmd_sweep(&cfg)?;
            println!("{} sweep cells written", rows.len());
        }
        Command::Pipeline => print!("{}", cmd_pipeline(&cfg)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
