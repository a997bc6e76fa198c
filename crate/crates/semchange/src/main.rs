use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use semchange::config::PipelineConfig;
use semchange::core::corpus::{build_vocabulary, token_counts};
use semchange::core::detect::{rank_targets, Strategy};
use semchange::core::eval::SynthSpec;
use semchange::core::similarity::Measure;
use semchange::evaluate::evaluate;
use semchange::formats::{format_labels, format_ranking, format_similarities, read_similarities, write_atomic};
use semchange::pipeline::{self, Trained};
use semchange::{InStage, Stage};

/// Lexical semantic change detection between two time periods.
#[derive(Parser)]
#[command(name = "semchange", version)]
struct Cli {
    /// Pipeline config (TOML).
    #[arg(long, global = true, default_value = "semchange.toml")]
    config: PathBuf,
    /// Override the config's random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Disable parallel schedules whose results depend on thread timing.
    #[arg(long, global = true)]
    strict_deterministic: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Read the corpus and targets, write the vocabulary, print statistics.
    Ingest,
    /// Train the configured backend and write one space per period.
    Train,
    /// Score the targets between the first and last period.
    Similarities {
        #[arg(long)]
        measure: Option<Measure>,
    },
    /// Label targets as stable (0) or changed (1).
    Detect {
        #[arg(long)]
        strategy: Option<Strategy>,
        /// Similarity file; defaults to the one `similarities` writes.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Rank targets by change distance.
    Rank {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Score an answer directory against a gold directory.
    Eval { pred_dir: PathBuf, gold_dir: PathBuf },
    /// Write a synthetic dataset with gold labels and a ready config.
    Synth {
        out: PathBuf,
        #[arg(long, default_value = "synthetic")]
        name: String,
        #[arg(long, default_value_t = 500)]
        vocab_size: usize,
        #[arg(long, default_value_t = 40)]
        targets: usize,
        #[arg(long, default_value_t = 10)]
        changed: usize,
        #[arg(long, default_value_t = 20_000)]
        sentences: usize,
        #[arg(long, default_value_t = 0.9)]
        strength: f64,
    },
    /// Full pipeline, or the sweep when the config has a `[sweep]` section.
    Run,
}

fn load_config(cli: &Cli) -> semchange::Result<PipelineConfig> {
    let mut cfg = PipelineConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.strict_deterministic |= cli.strict_deterministic;
    cfg.validate()?;
    for w in cfg.warnings() {
        log::warn!("{w}");
    }
    Ok(cfg)
}

fn trained_or_train(cfg: &PipelineConfig) -> semchange::Result<(pipeline::Inputs, Trained)> {
    let inputs = pipeline::ingest(cfg).in_stage(Stage::Ingest)?;
    let loaded = pipeline::load_trained(cfg, cfg.backend, &inputs.targets).in_stage(Stage::Train)?;
    let trained = match loaded {
        Some(t) => t,
        None => pipeline::train(cfg, cfg.backend, &inputs).in_stage(Stage::Train)?,
    };
    Ok((inputs, trained))
}

fn input_set(
    cfg: &PipelineConfig,
    input: &Option<PathBuf>,
    stage: Stage,
) -> semchange::Result<semchange::core::similarity::SimilaritySet> {
    let path = input
        .clone()
        .unwrap_or_else(|| pipeline::similarities_path(&cfg.output_dir, &cfg.name));
    read_similarities(&path).in_stage(stage)
}

fn run(cli: &Cli) -> semchange::Result<()> {
    match &cli.command {
        Command::Ingest => {
            let cfg = load_config(cli)?;
            let inputs = pipeline::ingest(&cfg).in_stage(Stage::Ingest)?;
            let vocab = build_vocabulary(&inputs.corpus, cfg.vocab.into()).in_stage(Stage::Ingest)?;
            for bin in &inputs.corpus.bins {
                let words: BTreeSet<&str> = bin.sentences.iter().flatten().map(String::as_str).collect();
                let seen = inputs.targets.iter().filter(|t| words.contains(t.as_str())).count();
                println!(
                    "{}\t{} sentences\t{} tokens\t{}/{} targets",
                    bin.period_id,
                    bin.sentences.len(),
                    bin.token_count(),
                    seen,
                    inputs.targets.len()
                );
            }
            let counts = token_counts(&inputs.corpus);
            let text: String = vocab.tokens().iter().map(|t| format!("{t}\t{}\n", counts[t])).collect();
            let path = cfg.output_dir.join("vocab").join(format!("{}.txt", cfg.name));
            write_atomic(&path, &text).in_stage(Stage::Ingest)?;
            println!("vocabulary\t{}\t{}", vocab.len(), path.display());
        }
        Command::Train => {
            let cfg = load_config(cli)?;
            let inputs = pipeline::ingest(&cfg).in_stage(Stage::Ingest)?;
            let trained = pipeline::train(&cfg, cfg.backend, &inputs).in_stage(Stage::Train)?;
            for t in &trained.missing_targets {
                log::warn!("target {t} is outside the vocabulary");
            }
            for p in pipeline::write_trained(&cfg, &trained).in_stage(Stage::Train)? {
                println!("{}", p.display());
            }
        }
        Command::Similarities { measure } => {
            let cfg = load_config(cli)?;
            let (inputs, trained) = trained_or_train(&cfg)?;
            let measure = measure.unwrap_or(cfg.similarity.measure);
            let set = pipeline::similarities(&cfg, &trained, &inputs.targets, measure).in_stage(Stage::Similarities)?;
            for (t, why) in &set.skipped {
                log::warn!("skipped {t}: {why}");
            }
            let path = pipeline::similarities_path(&cfg.output_dir, &cfg.name);
            write_atomic(&path, &format_similarities(&set)).in_stage(Stage::Similarities)?;
            println!("{}", path.display());
        }
        Command::Detect {
            strategy,
            input,
            output,
        } => {
            let cfg = load_config(cli)?;
            let set = input_set(&cfg, input, Stage::Detect)?;
            let strategy = strategy.unwrap_or(cfg.detect.strategy);
            let (labels, gmm) = pipeline::detect(&set, strategy, &cfg).in_stage(Stage::Detect)?;
            if let Some(m) = gmm {
                println!(
                    "gmm\tlog_likelihood={}\tmeans={:?}\tweights={:?}",
                    m.log_likelihood, m.means, m.weights
                );
            }
            let path = output
                .clone()
                .unwrap_or_else(|| pipeline::labels_path(&cfg.output_dir, &cfg.name));
            write_atomic(&path, &format_labels(&labels.labels)).in_stage(Stage::Write)?;
            println!(
                "{}\t{} of {} changed",
                path.display(),
                labels.changed().count(),
                labels.labels.len()
            );
        }
        Command::Rank { input, output } => {
            let cfg = load_config(cli)?;
            let set = input_set(&cfg, input, Stage::Rank)?;
            let ranking = rank_targets(&set);
            let path = output
                .clone()
                .unwrap_or_else(|| pipeline::ranking_path(&cfg.output_dir, &cfg.name));
            write_atomic(&path, &format_ranking(&ranking)).in_stage(Stage::Write)?;
            println!("{}", path.display());
        }
        Command::Eval { pred_dir, gold_dir } => {
            let report = evaluate(pred_dir, gold_dir).in_stage(Stage::Eval)?;
            print!("{}", report.render());
        }
        Command::Synth {
            out,
            name,
            vocab_size,
            targets,
            changed,
            sentences,
            strength,
        } => {
            let seed = cli.seed.unwrap_or(0);
            let spec = SynthSpec::uniform(*vocab_size, *targets, *changed, *sentences, *strength, seed);
            let ds = semchange::synth::write_synthetic(out, name, &spec).in_stage(Stage::Synth)?;
            println!("config\t{}", ds.config_path.display());
            println!("gold\t{}", ds.gold_dir.display());
        }
        Command::Run => {
            let cfg = load_config(cli)?;
            if cfg.sweep.is_some() {
                let report = pipeline::run_sweep(&cfg)?;
                print!("{}", report.table);
                print_outputs(&report.labels_path, &report.ranking_path);
            } else {
                let out = pipeline::run_pipeline(&cfg)?;
                if let Some(g) = &out.gmm {
                    println!("gmm\tlog_likelihood={}", g.log_likelihood);
                }
                print_outputs(&out.labels_path, &out.ranking_path);
                println!("report\t{}", out.report_path.display());
            }
        }
    }
    Ok(())
}

fn print_outputs(labels: &Path, ranking: &Path) {
    println!("task1\t{}", labels.display());
    println!("task2\t{}", ranking.display());
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match e.stage() {
                Some(stage) => eprintln!("semchange: {stage}: {e}"),
                None => eprintln!("semchange: {e}"),
            }
            ExitCode::FAILURE
        }
    }
}
