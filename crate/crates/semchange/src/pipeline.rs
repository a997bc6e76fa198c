//! Stage sequencing: ingest, train, similarities, detect, rank, write.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use semchange_core::collocation::{BinCollocations, ProfileSpace};
use semchange_core::corpus::{build_vocabulary, TimeBinnedCorpus, VocabPolicy, Vocabulary};
use semchange_core::detect::{
    fit_gmm_1d, label, rank_targets, select_model, GmmModel, LabelSet, RankedList, Selection, Strategy,
};
use semchange_core::embedding::EmbeddingSpace;
use semchange_core::similarity::{target_similarities, Measure, SimilaritySet};
use semchange_core::tr::{period_view, reference_targets, train_sgns};
use semchange_core::tri::{make_index_vectors, train_tri_periods, PairWeights, TriAccumulator, TriParams};

use crate::cache::{cache_key, SpaceCache};
use crate::config::{Backend, PipelineConfig};
use crate::corpus_io::{corpus_hash, read_corpus};
use crate::error::{InStage, Result, Stage};
use crate::formats::{format_labels, format_ranking, format_similarities, read_targets, write_atomic};

/// Upper bound on the memory spent on per-shard TRI accumulators.
const SHARD_MEMORY_BUDGET: usize = 1 << 31;

/// Corpus, targets and the corpus content hash.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub corpus: TimeBinnedCorpus,
    pub targets: BTreeSet<String>,
    pub corpus_hash: String,
}

pub fn ingest(cfg: &PipelineConfig) -> Result<Inputs> {
    let targets = read_targets(&cfg.targets)?;
    if targets.is_empty() {
        return Err(semchange_core::Error::NoTargets.into());
    }
    let corpus = read_corpus(&cfg.corpus.periods)?;
    let corpus_hash = corpus_hash(&cfg.corpus.periods)?;
    Ok(Inputs {
        corpus,
        targets,
        corpus_hash,
    })
}

/// Per-period representations produced by a backend.
#[derive(Debug, Clone)]
pub enum Spaces {
    Embedding(Vec<EmbeddingSpace>),
    Profiles(Vec<ProfileSpace>),
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub backend: Backend,
    pub spaces: Spaces,
    /// Targets outside the backend's vocabulary.
    pub missing_targets: Vec<String>,
    pub from_cache: bool,
}

fn missing_from(vocab: &Vocabulary, targets: &BTreeSet<String>) -> Vec<String> {
    targets.iter().filter(|t| !vocab.contains(t)).cloned().collect()
}

/// TRI over fixed sentence shards accumulated in parallel and merged in
/// shard order. The summation order differs from a single pass, so results
/// may differ from [`train_tri_periods`] in the last bits.
pub fn train_tri_sharded(
    corpus: &TimeBinnedCorpus,
    vocab: &Vocabulary,
    params: &TriParams,
    shards: usize,
) -> Result<Vec<EmbeddingSpace>> {
    let table = make_index_vectors(vocab, params.dim, params.seeds_per_vector, params.rng_seed)?;
    let mut spaces: Vec<EmbeddingSpace> = Vec::with_capacity(corpus.bins.len());
    for bin in &corpus.bins {
        let weights = PairWeights::for_bin(bin, vocab, params.window, params.options);
        let chunk = bin.sentences.len().div_ceil(shards.max(1)).max(1);
        let parts: Vec<TriAccumulator> = bin
            .sentences
            .par_chunks(chunk)
            .map(|c| {
                let mut acc = TriAccumulator::new(vocab.len(), params.dim);
                acc.accumulate(c, vocab, &table, &weights, params.options, params.window);
                acc
            })
            .collect();
        let mut parts = parts.into_iter();
        let mut acc = parts
            .next()
            .unwrap_or_else(|| TriAccumulator::new(vocab.len(), params.dim));
        for p in parts {
            acc.merge(&p);
        }
        let prev = if params.options.init_from_previous {
            spaces.last()
        } else {
            None
        };
        spaces.push(acc.finish(vocab, &bin.period_id, prev)?);
    }
    Ok(spaces)
}

fn tri_shards(cfg: &PipelineConfig, vocab: &Vocabulary) -> usize {
    if cfg.strict_deterministic {
        return 1;
    }
    let per_shard = vocab.len().saturating_mul(cfg.tri.dim).saturating_mul(8).max(1);
    rayon::current_num_threads().min(SHARD_MEMORY_BUDGET / per_shard).max(1)
}

#[derive(Serialize)]
struct TrainKey<'a> {
    corpus: &'a str,
    backend: Backend,
    seed: u64,
    vocab: Option<crate::config::VocabConfig>,
    tri: Option<&'a crate::config::TriConfig>,
    tr: Option<&'a crate::config::TrConfig>,
    targets: Option<&'a BTreeSet<String>>,
    shards: usize,
}

fn train_embeddings(
    cfg: &PipelineConfig,
    backend: Backend,
    inputs: &Inputs,
) -> Result<(Vec<EmbeddingSpace>, Vec<String>)> {
    match backend {
        Backend::Tri => {
            let vocab = build_vocabulary(&inputs.corpus, cfg.vocab.into())?;
            let params = cfg.tri.params(cfg.seed);
            let shards = tri_shards(cfg, &vocab);
            let spaces = if shards == 1 {
                train_tri_periods(&inputs.corpus, &vocab, &params)?
            } else {
                train_tri_sharded(&inputs.corpus, &vocab, &params, shards)?
            };
            Ok((spaces, missing_from(&vocab, &inputs.targets)))
        }
        Backend::Tr => {
            let vocab = build_vocabulary(&inputs.corpus, VocabPolicy::MinCount(cfg.tr.min_count))?;
            let referenced = reference_targets(&inputs.corpus, &vocab, &inputs.targets)?;
            let model = train_sgns(&referenced, &cfg.tr.params(cfg.seed))?;
            let n = inputs.corpus.bins.len();
            let spaces = inputs
                .corpus
                .bins
                .iter()
                .enumerate()
                .map(|(b, bin)| {
                    let mut view = period_view(&model.target_space, &inputs.targets, b, n)?;
                    view.set_period_id(bin.period_id.clone());
                    Ok(view)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((spaces, referenced.missing_targets().to_vec()))
        }
        Backend::Collocation => unreachable!("collocation profiles are not embeddings"),
    }
}

/// Trains `backend`, reusing cached spaces when the corpus content and
/// backend parameters match a previous run.
pub fn train(cfg: &PipelineConfig, backend: Backend, inputs: &Inputs) -> Result<Trained> {
    if backend == Backend::Collocation {
        let vocab = build_vocabulary(&inputs.corpus, cfg.vocab.into())?;
        let selection = cfg.collocation.selection();
        let spaces = inputs
            .corpus
            .bins
            .iter()
            .map(|bin| BinCollocations::new(bin, &vocab, cfg.collocation.window).profile_space(selection))
            .collect::<semchange_core::Result<Vec<_>>>()?;
        return Ok(Trained {
            backend,
            spaces: Spaces::Profiles(spaces),
            missing_targets: missing_from(&vocab, &inputs.targets),
            from_cache: false,
        });
    }

    let shards = match backend {
        Backend::Tri if !cfg.strict_deterministic => 0,
        _ => 1,
    };
    let key = cache_key(&TrainKey {
        corpus: &inputs.corpus_hash,
        backend,
        seed: cfg.seed,
        vocab: (backend == Backend::Tri).then_some(cfg.vocab),
        tri: (backend == Backend::Tri).then_some(&cfg.tri),
        tr: (backend == Backend::Tr).then_some(&cfg.tr),
        targets: (backend == Backend::Tr).then_some(&inputs.targets),
        shards,
    });
    let cache = cfg.cache.then(|| SpaceCache::new(cfg.cache_dir()));
    if let Some(spaces) = cache.as_ref().and_then(|c| c.load(&key)) {
        log::info!("{backend}: reusing cached spaces {key}");
        let missing = inputs
            .targets
            .iter()
            .filter(|t| spaces.iter().all(|s| !s.contains(t)))
            .cloned()
            .collect();
        return Ok(Trained {
            backend,
            spaces: Spaces::Embedding(spaces),
            missing_targets: missing,
            from_cache: true,
        });
    }
    let (spaces, missing_targets) = train_embeddings(cfg, backend, inputs)?;
    if let Some(c) = &cache {
        c.store(&key, &spaces)?;
    }
    Ok(Trained {
        backend,
        spaces: Spaces::Embedding(spaces),
        missing_targets,
        from_cache: false,
    })
}

/// Backend parameters as `key=value` pairs for similarity headers and reports.
pub fn backend_params(cfg: &PipelineConfig, backend: Backend) -> Vec<(String, String)> {
    let mut p: Vec<(String, String)> = match backend {
        Backend::Tri => vec![
            ("dim".into(), cfg.tri.dim.to_string()),
            ("seeds".into(), cfg.tri.seeds.to_string()),
            ("window".into(), cfg.tri.window.to_string()),
            ("init_from_previous".into(), cfg.tri.init_from_previous.to_string()),
            ("positive_only".into(), cfg.tri.positive_only.to_string()),
            ("ppmi_weights".into(), cfg.tri.ppmi_weights.to_string()),
        ],
        Backend::Tr => vec![
            ("dim".into(), cfg.tr.dim.to_string()),
            ("window".into(), cfg.tr.window.to_string()),
            ("negatives".into(), cfg.tr.negatives.to_string()),
            ("min_count".into(), cfg.tr.min_count.to_string()),
            ("epochs".into(), cfg.tr.epochs.to_string()),
            ("learning_rate".into(), cfg.tr.learning_rate.to_string()),
            ("min_learning_rate".into(), cfg.tr.min_learning_rate.to_string()),
            (
                "subsample".into(),
                cfg.tr.subsample.map_or("off".into(), |s| s.to_string()),
            ),
        ],
        Backend::Collocation => {
            let mut v = vec![("window".into(), cfg.collocation.window.to_string())];
            match cfg.collocation.min_score {
                Some(s) => v.push(("min_score".into(), s.to_string())),
                None => v.push(("top_n".into(), cfg.collocation.top_n.to_string())),
            }
            v
        }
    };
    if backend != Backend::Collocation {
        p.push(("seed".into(), cfg.seed.to_string()));
    }
    p
}

/// Scores every target between the first and the last period.
pub fn similarities(
    cfg: &PipelineConfig,
    trained: &Trained,
    targets: &BTreeSet<String>,
    measure: Measure,
) -> Result<SimilaritySet> {
    let k = cfg.similarity.k;
    let mut set = match &trained.spaces {
        Spaces::Embedding(s) => target_similarities(&s[0], &s[s.len() - 1], targets, measure, k)?,
        Spaces::Profiles(s) => target_similarities(&s[0], &s[s.len() - 1], targets, measure, k)?,
    };
    set.backend = trained.backend.code().to_string();
    set.params.extend(backend_params(cfg, trained.backend));
    Ok(set)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmSummary {
    pub log_likelihood: f64,
    pub weights: [f64; 2],
    pub means: [f64; 2],
    pub variances: [f64; 2],
    pub iterations: usize,
    pub converged: bool,
}

impl From<&GmmModel> for GmmSummary {
    fn from(m: &GmmModel) -> Self {
        GmmSummary {
            log_likelihood: m.log_likelihood,
            weights: m.weights,
            means: m.means,
            variances: m.variances,
            iterations: m.history.len(),
            converged: m.converged,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub target: String,
    pub reason: String,
}

/// What one run did, written next to its answer files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub name: String,
    pub config_hash: String,
    pub backend: Backend,
    pub measure: String,
    pub strategy: String,
    pub params: BTreeMap<String, String>,
    pub periods: Vec<String>,
    pub targets: usize,
    pub scored: usize,
    pub changed: usize,
    pub gmm: Option<GmmSummary>,
    pub skipped: Vec<Skipped>,
    pub missing_targets: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RunOutputs {
    pub labels_path: PathBuf,
    pub ranking_path: PathBuf,
    pub similarities_path: PathBuf,
    pub report_path: PathBuf,
    pub set: SimilaritySet,
    pub labels: LabelSet,
    pub ranking: RankedList,
    /// Mixture fitted to the similarities whatever the labelling strategy;
    /// `None` when there were too few scored targets to fit one.
    pub gmm: Option<GmmModel>,
    pub report: RunReport,
}

pub fn labels_path(out: &Path, name: &str) -> PathBuf {
    out.join("task1").join(format!("{name}.txt"))
}

pub fn ranking_path(out: &Path, name: &str) -> PathBuf {
    out.join("task2").join(format!("{name}.txt"))
}

pub fn similarities_path(out: &Path, name: &str) -> PathBuf {
    out.join("similarities").join(format!("{name}.txt"))
}

pub fn report_path(out: &Path, name: &str) -> PathBuf {
    out.join("reports").join(format!("{name}.json"))
}

/// Tracks files written by a run so a failure can remove them.
#[derive(Debug, Default)]
pub struct OutputWriter {
    written: Vec<PathBuf>,
}

impl OutputWriter {
    pub fn write(&mut self, path: &Path, contents: &str) -> Result<()> {
        write_atomic(path, contents)?;
        self.written.push(path.to_path_buf());
        Ok(())
    }

    pub fn remove_all(&mut self) {
        for p in self.written.drain(..) {
            if let Err(e) = fs::remove_file(&p) {
                log::warn!("could not remove partial output {}: {e}", p.display());
            }
        }
    }

    pub fn commit(&mut self) {
        self.written.clear();
    }
}

/// Labels `set`, fitting the mixture even for threshold strategies so the
/// log-likelihood is always reported.
pub fn detect(set: &SimilaritySet, strategy: Strategy, cfg: &PipelineConfig) -> Result<(LabelSet, Option<GmmModel>)> {
    let opts = cfg.gmm_options();
    let (labels, model) = label(set, strategy, &opts)?;
    let model = match model {
        Some(m) => Some(m),
        None => fit_gmm_1d(&set.values(), &opts).ok(),
    };
    Ok((labels, model))
}

fn scored_run(
    cfg: &PipelineConfig,
    inputs: &Inputs,
    trained: &Trained,
    measure: Measure,
    name: &str,
    writer: &mut OutputWriter,
) -> Result<RunOutputs> {
    let set = similarities(cfg, trained, &inputs.targets, measure).in_stage(Stage::Similarities)?;
    for (t, why) in &set.skipped {
        log::warn!("{name}: skipped {t}: {why}");
    }
    let strategy = cfg.detect.strategy;
    let (labels, gmm) = detect(&set, strategy, cfg).in_stage(Stage::Detect)?;
    let ranking = rank_targets(&set);
    if ranking.entries.is_empty() {
        return Err(semchange_core::Error::AllTargetsSkipped).in_stage(Stage::Rank);
    }

    let out = &cfg.output_dir;
    let report = RunReport {
        name: name.to_string(),
        config_hash: cfg.hash(),
        backend: trained.backend,
        measure: measure.code().to_string(),
        strategy: strategy.code().to_string(),
        params: set.params.iter().cloned().collect(),
        periods: inputs.corpus.bins.iter().map(|b| b.period_id.clone()).collect(),
        targets: inputs.targets.len(),
        scored: set.len(),
        changed: labels.changed().count(),
        gmm: gmm.as_ref().map(GmmSummary::from),
        skipped: set
            .skipped
            .iter()
            .map(|(t, r)| Skipped {
                target: t.clone(),
                reason: r.clone(),
            })
            .collect(),
        missing_targets: trained.missing_targets.clone(),
    };
    let paths = (
        labels_path(out, name),
        ranking_path(out, name),
        similarities_path(out, name),
        report_path(out, name),
    );
    (|| {
        writer.write(&paths.2, &format_similarities(&set))?;
        writer.write(&paths.0, &format_labels(&labels.labels))?;
        writer.write(&paths.1, &format_ranking(&ranking))?;
        let json = serde_json::to_string_pretty(&report).expect("report serializes");
        writer.write(&paths.3, &(json + "\n"))
    })()
    .in_stage(Stage::Write)?;
    Ok(RunOutputs {
        labels_path: paths.0,
        ranking_path: paths.1,
        similarities_path: paths.2,
        report_path: paths.3,
        set,
        labels,
        ranking,
        gmm,
        report,
    })
}

/// Runs the configured backend, measure and strategy end to end and writes
/// `task1/<name>.txt`, `task2/<name>.txt`, the similarity set and a report.
/// On failure every file this run wrote is removed and the error names the
/// failing stage.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunOutputs> {
    for w in cfg.warnings() {
        log::warn!("{w}");
    }
    let inputs = ingest(cfg).in_stage(Stage::Ingest)?;
    let trained = train(cfg, cfg.backend, &inputs).in_stage(Stage::Train)?;
    let mut writer = OutputWriter::default();
    match scored_run(cfg, &inputs, &trained, cfg.similarity.measure, &cfg.name, &mut writer) {
        Ok(o) => {
            writer.commit();
            Ok(o)
        }
        Err(e) => {
            writer.remove_all();
            Err(e)
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepRun {
    pub backend: Backend,
    pub measure: Measure,
    pub outputs: RunOutputs,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub runs: Vec<SweepRun>,
    /// Index into `runs` of the selected configuration.
    pub selected: usize,
    pub selection: Selection,
    pub table: String,
    pub table_path: PathBuf,
    pub labels_path: PathBuf,
    pub ranking_path: PathBuf,
}

pub fn sweep_run_name(name: &str, backend: Backend, measure: Measure) -> String {
    format!("{name}_{backend}_{measure}")
}

fn render_sweep_table(runs: &[SweepRun], selected: usize) -> String {
    let header = [
        "run",
        "backend",
        "measure",
        "scored",
        "skipped",
        "log_likelihood",
        "selected",
    ];
    let rows: Vec<[String; 7]> = runs
        .iter()
        .enumerate()
        .map(|(i, r)| {
            [
                r.outputs.report.name.clone(),
                r.backend.to_string(),
                r.measure.to_string(),
                r.outputs.set.len().to_string(),
                r.outputs.set.skipped.len().to_string(),
                r.outputs
                    .gmm
                    .as_ref()
                    .map_or("-".into(), |g| format!("{:.6}", g.log_likelihood)),
                if i == selected { "*".into() } else { String::new() },
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &[&str]| {
        let text: Vec<String> = cells.iter().zip(widths).map(|(c, w)| format!("{c:<w$}")).collect();
        writeln!(out, "{}", text.join("  ").trim_end()).unwrap();
    };
    line(&header);
    for row in &rows {
        line(&row.iter().map(String::as_str).collect::<Vec<_>>());
    }
    out
}

/// Runs every backend x measure combination of the sweep, picks the run
/// whose mixture has the highest log-likelihood, and writes its answers as
/// `task1/<name>.txt` and `task2/<name>.txt` next to the per-run files.
pub fn run_sweep(cfg: &PipelineConfig) -> Result<SweepReport> {
    let sweep = cfg.sweep.clone().unwrap_or_default();
    for w in cfg.warnings() {
        log::warn!("{w}");
    }
    let inputs = ingest(cfg).in_stage(Stage::Ingest)?;
    let mut writer = OutputWriter::default();
    let result = (|| {
        let mut runs = Vec::new();
        for &backend in &sweep.backends {
            let trained = train(cfg, backend, &inputs).in_stage(Stage::Train)?;
            for &measure in &sweep.measures {
                let name = sweep_run_name(&cfg.name, backend, measure);
                log::info!("sweep run {name}");
                let outputs = scored_run(cfg, &inputs, &trained, measure, &name, &mut writer)?;
                runs.push(SweepRun {
                    backend,
                    measure,
                    outputs,
                });
            }
        }
        let fitted: Vec<usize> = (0..runs.len()).filter(|&i| runs[i].outputs.gmm.is_some()).collect();
        let candidates: Vec<(SimilaritySet, GmmModel)> = fitted
            .iter()
            .map(|&i| (runs[i].outputs.set.clone(), runs[i].outputs.gmm.clone().unwrap()))
            .collect();
        let selection = select_model(&candidates).in_stage(Stage::Detect)?;
        let selected = fitted[selection.index];
        if selection.cross_set_comparison {
            log::warn!("model selection compares likelihoods fitted to different similarity sets");
        }

        let table = render_sweep_table(&runs, selected);
        let out = &cfg.output_dir;
        let table_path = out.join("reports").join(format!("{}.sweep.txt", cfg.name));
        let chosen = &runs[selected].outputs;
        let labels_path = labels_path(out, &cfg.name);
        let ranking_path = ranking_path(out, &cfg.name);
        (|| {
            writer.write(&table_path, &table)?;
            writer.write(&labels_path, &format_labels(&chosen.labels.labels))?;
            writer.write(&ranking_path, &format_ranking(&chosen.ranking))
        })()
        .in_stage(Stage::Write)?;
        Ok(SweepReport {
            runs,
            selected,
            selection,
            table,
            table_path,
            labels_path,
            ranking_path,
        })
    })();
    match result {
        Ok(r) => {
            writer.commit();
            Ok(r)
        }
        Err(e) => {
            writer.remove_all();
            Err(e)
        }
    }
}

/// Spaces of a finished `train` stage as written by the CLI.
pub fn spaces_dir(cfg: &PipelineConfig) -> PathBuf {
    cfg.output_dir.join("spaces").join(&cfg.name)
}

/// Where the `train` subcommand leaves one period's representation.
pub fn trained_path(cfg: &PipelineConfig, backend: Backend, period: &str) -> PathBuf {
    let ext = match backend {
        Backend::Collocation => "profiles",
        _ => "space",
    };
    cfg.output_dir
        .join("spaces")
        .join(&cfg.name)
        .join(format!("{backend}.{period}.{ext}"))
}

pub fn write_trained(cfg: &PipelineConfig, trained: &Trained) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    match &trained.spaces {
        Spaces::Embedding(spaces) => {
            for s in spaces {
                let p = trained_path(cfg, trained.backend, s.period_id());
                crate::formats::write_space(&p, s)?;
                paths.push(p);
            }
        }
        Spaces::Profiles(spaces) => {
            for s in spaces {
                let p = trained_path(cfg, trained.backend, &s.period_id);
                write_atomic(&p, &crate::formats::format_profiles(s))?;
                paths.push(p);
            }
        }
    }
    Ok(paths)
}

/// Reads back what [`write_trained`] wrote, or `None` if any period is missing.
pub fn load_trained(cfg: &PipelineConfig, backend: Backend, targets: &BTreeSet<String>) -> Result<Option<Trained>> {
    let paths: Vec<PathBuf> = cfg
        .corpus
        .periods
        .iter()
        .map(|p| trained_path(cfg, backend, &p.id))
        .collect();
    if !paths.iter().all(|p| p.is_file()) {
        return Ok(None);
    }
    let (spaces, words): (Spaces, BTreeSet<String>) = match backend {
        Backend::Collocation => {
            let s = paths
                .iter()
                .map(|p| crate::formats::read_profiles(p))
                .collect::<Result<Vec<_>>>()?;
            let words = s.iter().flat_map(|x| x.profiles.keys().cloned()).collect();
            (Spaces::Profiles(s), words)
        }
        _ => {
            let s = paths
                .iter()
                .map(|p| crate::formats::read_space(p))
                .collect::<Result<Vec<_>>>()?;
            let words = s.iter().flat_map(|x| x.tokens().iter().cloned()).collect();
            (Spaces::Embedding(s), words)
        }
    };
    Ok(Some(Trained {
        backend,
        spaces,
        missing_targets: targets.iter().filter(|t| !words.contains(*t)).cloned().collect(),
        from_cache: true,
    }))
}
