//! Pipeline configuration.
//!
//! A config is one TOML file. Omitted keys take their defaults; when
//! `language` is set, its per-language defaults apply first and explicit keys
//! override them. Relative paths are resolved against the config file's
//! directory.
//!
//! ```toml
//! name = "english"
//! language = "en"
//! targets = "targets.txt"
//! output_dir = "out"
//! backend = "tr"
//!
//! [[corpus.periods]]
//! id = "t1"
//! path = "corpus1/"
//!
//! [[corpus.periods]]
//! id = "t2"
//! path = "corpus2/"
//!
//! [similarity]
//! measure = "CS"
//!
//! [detect]
//! strategy = "gmm"
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use semchange_core::collocation::{ProfileSelection, DEFAULT_TOP_N};
use semchange_core::corpus::VocabPolicy;
use semchange_core::detect::{GmmOptions, InitPolicy, Strategy};
use semchange_core::similarity::{Measure, DEFAULT_NEIGHBOURS};
use semchange_core::tr::SgnsParams;
use semchange_core::tri::{TriOptions, TriParams, DEFAULT_SEEDS};

use crate::error::{Error, Result};
use crate::formats::read_text;

/// TRI dimensions outside this range are accepted with a warning.
pub const TRI_STUDIED_DIMS: std::ops::RangeInclusive<usize> = 200..=1000;

/// Serializes a type through its `Display` / `FromStr` code.
mod code {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};
    use std::fmt::Display;
    use std::str::FromStr;

    pub fn serialize<T: Display, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<T, D::Error>
    where
        T: FromStr,
        T::Err: Display,
        D: Deserializer<'de>,
    {
        String::deserialize(d)?.parse().map_err(D::Error::custom)
    }

    pub mod list {
        use super::*;
        use serde::ser::SerializeSeq;

        pub fn serialize<T: Display, S: Serializer>(v: &[T], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(v.len()))?;
            for x in v {
                seq.serialize_element(&x.to_string())?;
            }
            seq.end()
        }

        pub fn deserialize<'de, T, D>(d: D) -> Result<Vec<T>, D::Error>
        where
            T: FromStr,
            T::Err: Display,
            D: Deserializer<'de>,
        {
            Vec::<String>::deserialize(d)?
                .into_iter()
                .map(|s| s.parse().map_err(D::Error::custom))
                .collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Tri,
    Tr,
    Collocation,
}

impl Backend {
    pub const ALL: [Backend; 3] = [Backend::Tri, Backend::Tr, Backend::Collocation];

    pub fn code(self) -> &'static str {
        match self {
            Backend::Tri => "tri",
            Backend::Tr => "tr",
            Backend::Collocation => "collocation",
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Backend::ALL
            .into_iter()
            .find(|b| b.code().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown backend `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Period {
    pub id: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusConfig {
    pub periods: Vec<Period>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum VocabConfig {
    TopK(usize),
    MinCount(u64),
}

impl Default for VocabConfig {
    fn default() -> Self {
        VocabConfig::TopK(50_000)
    }
}

impl From<VocabConfig> for VocabPolicy {
    fn from(v: VocabConfig) -> Self {
        match v {
            VocabConfig::TopK(k) => VocabPolicy::TopK(k),
            VocabConfig::MinCount(c) => VocabPolicy::MinCount(c),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TriConfig {
    pub dim: usize,
    pub seeds: usize,
    pub window: usize,
    pub init_from_previous: bool,
    pub positive_only: bool,
    pub ppmi_weights: bool,
}

impl Default for TriConfig {
    fn default() -> Self {
        let p = TriParams::default();
        TriConfig {
            dim: p.dim,
            seeds: DEFAULT_SEEDS,
            window: p.window,
            init_from_previous: p.options.init_from_previous,
            positive_only: p.options.positive_only,
            ppmi_weights: p.options.ppmi_weights,
        }
    }
}

impl TriConfig {
    pub fn params(&self, seed: u64) -> TriParams {
        TriParams {
            dim: self.dim,
            seeds_per_vector: self.seeds,
            window: self.window,
            options: TriOptions {
                init_from_previous: self.init_from_previous,
                positive_only: self.positive_only,
                ppmi_weights: self.ppmi_weights,
            },
            rng_seed: seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub min_count: u64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub min_learning_rate: f64,
    pub subsample: Option<f64>,
}

impl Default for TrConfig {
    fn default() -> Self {
        let p = SgnsParams::default();
        TrConfig {
            dim: p.dim,
            window: p.window,
            negatives: p.negatives,
            min_count: p.min_count,
            epochs: p.epochs,
            learning_rate: p.learning_rate,
            min_learning_rate: p.min_learning_rate,
            subsample: p.subsample_threshold,
        }
    }
}

impl TrConfig {
    pub fn params(&self, seed: u64) -> SgnsParams {
        SgnsParams {
            dim: self.dim,
            window: self.window,
            negatives: self.negatives,
            min_count: self.min_count,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            min_learning_rate: self.min_learning_rate,
            subsample_threshold: self.subsample,
            rng_seed: seed,
            track_objective: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollocationConfig {
    pub window: usize,
    /// Keep the `top_n` highest-scoring collocates...
    pub top_n: usize,
    /// ...or, when set, every collocate scoring at least this instead.
    pub min_score: Option<f64>,
}

impl Default for CollocationConfig {
    fn default() -> Self {
        CollocationConfig {
            window: 5,
            top_n: DEFAULT_TOP_N,
            min_score: None,
        }
    }
}

impl CollocationConfig {
    pub fn selection(&self) -> ProfileSelection {
        match self.min_score {
            Some(s) => ProfileSelection::MinScore(s),
            None => ProfileSelection::TopN(self.top_n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimilarityConfig {
    #[serde(with = "code")]
    pub measure: Measure,
    /// Neighbourhood size for NS.
    pub k: usize,
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        SimilarityConfig {
            measure: Measure::Cosine,
            k: DEFAULT_NEIGHBOURS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectConfig {
    #[serde(with = "code")]
    pub strategy: Strategy,
    pub restarts: usize,
    pub jitter: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for DetectConfig {
    fn default() -> Self {
        let g = GmmOptions::default();
        let InitPolicy::Quartiles { jitter, .. } = g.init else {
            unreachable!("default init is quartiles")
        };
        DetectConfig {
            strategy: Strategy::Gmm,
            restarts: g.restarts,
            jitter,
            tol: g.tol,
            max_iter: g.max_iter,
        }
    }
}

impl DetectConfig {
    pub fn gmm_options(&self, seed: u64) -> GmmOptions {
        GmmOptions {
            init: InitPolicy::Quartiles {
                seed,
                jitter: self.jitter,
            },
            tol: self.tol,
            max_iter: self.max_iter,
            restarts: self.restarts,
            ..GmmOptions::default()
        }
    }
}

/// Grid of runs for model selection by GMM log-likelihood.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub backends: Vec<Backend>,
    #[serde(with = "code::list")]
    pub measures: Vec<Measure>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            backends: Backend::ALL.to_vec(),
            measures: Measure::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Output file stem: `task1/<name>.txt`, `task2/<name>.txt`.
    pub name: String,
    pub language: Option<String>,
    pub targets: PathBuf,
    pub output_dir: PathBuf,
    /// Cache directory for trained spaces; defaults to `<output_dir>/cache`.
    pub cache_dir: Option<PathBuf>,
    pub cache: bool,
    pub seed: u64,
    /// Forbid parallel schedules whose floating-point summation order
    /// depends on thread timing.
    pub strict_deterministic: bool,
    pub corpus: CorpusConfig,
    pub vocab: VocabConfig,
    pub backend: Backend,
    pub tri: TriConfig,
    pub tr: TrConfig,
    pub collocation: CollocationConfig,
    pub similarity: SimilarityConfig,
    pub detect: DetectConfig,
    pub sweep: Option<SweepConfig>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            name: "answer".into(),
            language: None,
            targets: PathBuf::from("targets.txt"),
            output_dir: PathBuf::from("out"),
            cache_dir: None,
            cache: true,
            seed: 0,
            strict_deterministic: false,
            corpus: CorpusConfig::default(),
            vocab: VocabConfig::default(),
            backend: Backend::Tr,
            tri: TriConfig::default(),
            tr: TrConfig::default(),
            collocation: CollocationConfig::default(),
            similarity: SimilarityConfig::default(),
            detect: DetectConfig::default(),
            sweep: None,
        }
    }
}

fn language_defaults(lang: &str) -> toml::Table {
    let tri = TriParams::for_language(lang);
    let tr = SgnsParams::for_language(lang);
    let mut tri_t = toml::Table::new();
    tri_t.insert("dim".into(), (tri.dim as i64).into());
    tri_t.insert("ppmi_weights".into(), tri.options.ppmi_weights.into());
    let mut tr_t = toml::Table::new();
    tr_t.insert("epochs".into(), (tr.epochs as i64).into());
    let mut t = toml::Table::new();
    t.insert("tri".into(), tri_t.into());
    t.insert("tr".into(), tr_t.into());
    t
}

/// Overlays `over` onto `base`, recursing into tables.
fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl PipelineConfig {
    /// Parses a config; relative paths are resolved against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let user: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let mut table = match user.get("language").and_then(|v| v.as_str()) {
            Some(lang) => language_defaults(lang),
            None => toml::Table::new(),
        };
        merge(&mut table, user);
        let mut cfg: PipelineConfig =
            PipelineConfig::deserialize(toml::Value::Table(table)).map_err(|e| Error::Config(e.to_string()))?;
        cfg.resolve_paths(base_dir);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        PipelineConfig::from_toml_str(&text, base).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.targets);
        join(&mut self.output_dir);
        if let Some(c) = &mut self.cache_dir {
            join(c);
        }
        for p in &mut self.corpus.periods {
            join(&mut p.path);
        }
    }

    /// Range checks that do not touch the file system.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.name.is_empty() || self.name.contains(['/', '\\']) || self.name.chars().any(char::is_whitespace) {
            return bad(format!("name {:?} is not a plain file stem", self.name));
        }
        if self.corpus.periods.len() < 2 {
            return bad(format!(
                "need at least two corpus periods, got {}",
                self.corpus.periods.len()
            ));
        }
        for (i, p) in self.corpus.periods.iter().enumerate() {
            if p.id.is_empty() || p.id.chars().any(char::is_whitespace) {
                return bad(format!("period id {:?} must be a non-empty token", p.id));
            }
            if self.corpus.periods[..i].iter().any(|q| q.id == p.id) {
                return bad(format!("duplicate period id {:?}", p.id));
            }
        }
        if i64::try_from(self.seed).is_err() {
            return bad(format!("seed {} does not fit a TOML integer", self.seed));
        }
        if self.tri.dim == 0 || self.tri.seeds == 0 || self.tri.seeds > self.tri.dim {
            return bad(format!(
                "tri: need 1 <= seeds <= dim, got seeds {} dim {}",
                self.tri.seeds, self.tri.dim
            ));
        }
        if self.tri.window == 0 || self.collocation.window == 0 {
            return bad("window must be >= 1".into());
        }
        self.tr
            .params(self.seed)
            .validate()
            .map_err(|e| Error::Config(format!("tr: {e}")))?;
        if self.similarity.k == 0 {
            return bad("similarity.k must be >= 1".into());
        }
        if self.detect.restarts == 0 || self.detect.max_iter == 0 || self.detect.tol.is_nan() || self.detect.tol < 0.0 {
            return bad("detect: restarts and max_iter must be >= 1, tol >= 0".into());
        }
        if let Some(s) = &self.sweep {
            if s.backends.is_empty() || s.measures.is_empty() {
                return bad("sweep needs at least one backend and one measure".into());
            }
        }
        Ok(())
    }

    /// Advisory messages for values accepted but outside the studied regime.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        let uses_tri =
            self.backend == Backend::Tri || self.sweep.as_ref().is_some_and(|s| s.backends.contains(&Backend::Tri));
        if uses_tri && !TRI_STUDIED_DIMS.contains(&self.tri.dim) {
            w.push(format!(
                "tri.dim = {} is outside the studied range {}..={}",
                self.tri.dim,
                TRI_STUDIED_DIMS.start(),
                TRI_STUDIED_DIMS.end()
            ));
        }
        w
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.cache_dir.clone().unwrap_or_else(|| self.output_dir.join("cache"))
    }

    pub fn gmm_options(&self) -> GmmOptions {
        self.detect.gmm_options(self.seed)
    }

    /// SHA-256 over the canonical JSON form of the resolved config. Key
    /// order, comments and spelled-out defaults do not affect it.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes to JSON");
        hex::encode(Sha256::digest(&canonical))
    }
}
