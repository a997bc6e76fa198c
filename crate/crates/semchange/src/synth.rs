//! Writing a synthetic dataset to disk as a ready-to-run pipeline input.
//!
//! Layout under the dataset root:
//!
//! ```text
//! corpus/t1.txt  corpus/t2.txt   one sentence per line
//! targets.txt                    one target per line
//! gold/task1/<name>.txt          binary gold
//! gold/task2/<name>.txt          graded gold (change strength)
//! config.toml                    pipeline config writing to out/
//! ```

use std::path::{Path, PathBuf};

use semchange_core::eval::{generate_synthetic, GoldStandard, SynthSpec};

use crate::config::{Backend, Period, PipelineConfig, TrConfig};
use crate::corpus_io::format_bin;
use crate::error::Result;
use crate::formats::{format_graded, format_labels, format_targets, write_atomic};

#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub root: PathBuf,
    pub config_path: PathBuf,
    pub gold_dir: PathBuf,
    pub config: PipelineConfig,
    pub gold: GoldStandard,
}

/// TR settings sized for the synthetic corpora: a few hundred words and
/// tens of thousands of short sentences.
pub fn synthetic_tr() -> TrConfig {
    TrConfig {
        dim: 50,
        window: 5,
        negatives: 5,
        min_count: 1,
        epochs: 3,
        ..TrConfig::default()
    }
}

/// A TR + cosine + GMM config reading the dataset under `root`.
pub fn synthetic_config(root: &Path, name: &str, seed: u64) -> PipelineConfig {
    let mut cfg = PipelineConfig {
        name: name.to_string(),
        targets: root.join("targets.txt"),
        output_dir: root.join("out"),
        seed,
        strict_deterministic: true,
        backend: Backend::Tr,
        tr: synthetic_tr(),
        ..PipelineConfig::default()
    };
    cfg.corpus.periods = ["t1", "t2"]
        .iter()
        .map(|id| Period {
            id: id.to_string(),
            path: root.join("corpus").join(format!("{id}.txt")),
        })
        .collect();
    cfg
}

pub fn write_synthetic(root: &Path, name: &str, spec: &SynthSpec) -> Result<SynthDataset> {
    let (corpus, gold) = generate_synthetic(spec)?;
    for bin in &corpus.bins {
        write_atomic(
            &root.join("corpus").join(format!("{}.txt", bin.period_id)),
            &format_bin(bin),
        )?;
    }
    let targets = gold.binary.keys().cloned().collect();
    write_atomic(&root.join("targets.txt"), &format_targets(&targets))?;
    let gold_dir = root.join("gold");
    write_atomic(
        &gold_dir.join("task1").join(format!("{name}.txt")),
        &format_labels(&gold.binary),
    )?;
    write_atomic(
        &gold_dir.join("task2").join(format!("{name}.txt")),
        &format_graded(&gold.graded),
    )?;

    let config_path = root.join("config.toml");
    write_atomic(
        &config_path,
        &synthetic_config(Path::new(""), name, spec.rng_seed).to_toml_string()?,
    )?;
    let config = PipelineConfig::load(&config_path)?;
    Ok(SynthDataset {
        root: root.to_path_buf(),
        config_path,
        gold_dir,
        config,
        gold,
    })
}
