//! Temporal Referencing: skip-gram with negative sampling over a corpus in
//! which each target occurrence is tagged with its period on the target
//! side only. Context vectors stay shared across periods, so the tagged
//! vectors `w#t1` and `w#t2` live in one space.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{for_each_window_pair, TimeBinnedCorpus, Vocabulary};
use crate::embedding::EmbeddingSpace;
use crate::math::{dot, log_sigmoid, sigmoid};
use crate::{Error, Result};

/// Period label of the shared target space.
pub const REFERENCED_PERIOD: &str = "referenced";

/// Serialized name of a target's tagged form in bin `bin` (0-based): `word#t1`, `word#t2`, ...
pub fn tagged_name(word: &str, bin: usize) -> String {
    format!("{word}#t{}", bin + 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgnsParams {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub min_count: u64,
    pub epochs: usize,
    /// Initial learning rate, decayed linearly to `min_learning_rate`.
    pub learning_rate: f64,
    pub min_learning_rate: f64,
    /// word2vec-style frequent-word subsampling threshold; `None` disables it.
    pub subsample_threshold: Option<f64>,
    pub rng_seed: u64,
    /// Evaluate the exact expected objective after every epoch. Costs a pass
    /// over all distinct pairs times the vocabulary, so it is meant for small
    /// corpora and diagnostics.
    pub track_objective: bool,
}

impl Default for SgnsParams {
    fn default() -> Self {
        SgnsParams {
            dim: 100,
            window: 5,
            negatives: 20,
            min_count: 10,
            epochs: 4,
            learning_rate: 0.025,
            min_learning_rate: 1e-4,
            subsample_threshold: None,
            rng_seed: 0,
            track_objective: false,
        }
    }
}

impl SgnsParams {
    /// Eight epochs for English and Latin, four for German and Swedish.
    pub fn for_language(lang: &str) -> Self {
        let epochs = match lang {
            "en" | "english" | "la" | "latin" => 8,
            _ => 4,
        };
        SgnsParams {
            epochs,
            ..SgnsParams::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if self.dim == 0 {
            return bad("dim must be >= 1");
        }
        if self.negatives == 0 {
            return bad("negatives must be >= 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1");
        }
        if self.window == 0 {
            return bad("window must be >= 1");
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 || self.min_learning_rate < 0.0 {
            return bad("learning rates must be positive");
        }
        if let Some(t) = self.subsample_threshold {
            if t.is_nan() || t <= 0.0 {
                return bad("subsample threshold must be positive");
            }
        }
        Ok(())
    }
}

/// Identity of one in-vocabulary position: its training-target id (tagged
/// for target words) and its plain context id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    pub target: u32,
    pub context: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferencedSentence {
    pub bin: usize,
    /// `None` marks out-of-vocabulary tokens, which still occupy a position.
    pub slots: Vec<Option<Slot>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferencedCorpus {
    context_vocab: Vocabulary,
    target_tokens: Vec<String>,
    target_index: BTreeMap<String, u32>,
    sentences: Vec<ReferencedSentence>,
    bin_count: usize,
    missing_targets: Vec<String>,
}

impl ReferencedCorpus {
    pub fn context_vocab(&self) -> &Vocabulary {
        &self.context_vocab
    }

    /// Names of the training targets, indexed by target id. Tagged forms use
    /// [`tagged_name`].
    pub fn target_tokens(&self) -> &[String] {
        &self.target_tokens
    }

    pub fn target_id(&self, name: &str) -> Option<u32> {
        self.target_index.get(name).copied()
    }

    pub fn sentences(&self) -> &[ReferencedSentence] {
        &self.sentences
    }

    pub fn bin_count(&self) -> usize {
        self.bin_count
    }

    /// Requested targets outside the vocabulary; they get no tagged vectors.
    pub fn missing_targets(&self) -> &[String] {
        &self.missing_targets
    }

    pub fn target_occurrences(&self, target: u32) -> usize {
        self.slots().filter(|s| s.target == target).count()
    }

    pub fn context_occurrences(&self, context: u32) -> usize {
        self.slots().filter(|s| s.context == context).count()
    }

    fn slots(&self) -> impl Iterator<Item = &Slot> {
        self.sentences.iter().flat_map(|s| s.slots.iter().flatten())
    }

    /// All (target, context) training pairs of one sentence.
    pub fn sentence_pairs(&self, sentence: &ReferencedSentence, window: usize) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        let slots = &sentence.slots;
        for_each_window_pair(slots.len(), window, |i, j| {
            if let (Some(t), Some(c)) = (slots[i], slots[j]) {
                out.push((t.target, c.context));
            }
        });
        out
    }
}

/// Rewrites target occurrences to their per-bin tagged identity on the target
/// side. `vocab` is the plain (context) vocabulary, normally built with
/// `MinCount(min_count)`; a target outside it is recorded in
/// [`ReferencedCorpus::missing_targets`] instead of failing.
pub fn reference_targets(
    corpus: &TimeBinnedCorpus,
    vocab: &Vocabulary,
    targets: &BTreeSet<String>,
) -> Result<ReferencedCorpus> {
    if targets.is_empty() {
        return Err(Error::NoTargets);
    }
    let missing_targets: Vec<String> = targets.iter().filter(|t| !vocab.contains(t)).cloned().collect();

    let mut target_tokens = Vec::new();
    let mut target_index = BTreeMap::new();
    // plain context id -> target id, for non-target words
    let mut plain_target = vec![None; vocab.len()];
    for (id, token) in vocab.tokens().iter().enumerate() {
        if !targets.contains(token) {
            plain_target[id] = Some(target_tokens.len() as u32);
            target_index.insert(token.clone(), target_tokens.len() as u32);
            target_tokens.push(token.clone());
        }
    }
    // tagged ids in (word, bin) order, only for forms that actually occur
    let mut tagged: BTreeMap<(u32, usize), u32> = BTreeMap::new();
    let mut present: BTreeSet<(String, usize)> = BTreeSet::new();
    for (b, bin) in corpus.bins.iter().enumerate() {
        for token in bin.sentences.iter().flatten() {
            if targets.contains(token) && vocab.contains(token) {
                present.insert((token.clone(), b));
            }
        }
    }
    for (word, b) in present {
        let name = tagged_name(&word, b);
        let id = target_tokens.len() as u32;
        target_index.insert(name.clone(), id);
        target_tokens.push(name);
        tagged.insert((vocab.id(&word).unwrap(), b), id);
    }

    let sentences = corpus
        .bins
        .iter()
        .enumerate()
        .flat_map(|(b, bin)| {
            let plain_target = &plain_target;
            let tagged = &tagged;
            bin.sentences.iter().map(move |s| ReferencedSentence {
                bin: b,
                slots: s
                    .iter()
                    .map(|tok| {
                        let context = vocab.id(tok)?;
                        let target = match plain_target[context as usize] {
                            Some(t) => t,
                            None => tagged[&(context, b)],
                        };
                        Some(Slot { target, context })
                    })
                    .collect(),
            })
        })
        .collect();

    Ok(ReferencedCorpus {
        context_vocab: vocab.clone(),
        target_tokens,
        target_index,
        sentences,
        bin_count: corpus.bins.len(),
        missing_targets,
    })
}

/// Gradients of the SGNS loss
/// `-log σ(u_c·v) - Σ_n log σ(-u_n·v)` for one (target, context, negatives) triple.
#[derive(Debug, Clone, PartialEq)]
pub struct SgnsGradients {
    pub loss: f64,
    pub target: Vec<f64>,
    pub positive: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

/// Loss and per-output coefficients `σ(u_k·v) - label_k`; the gradient wrt
/// `u_k` is `coef_k v` and wrt `v` is `Σ_k coef_k u_k`.
fn sgns_coefficients<'a>(v: &[f64], outputs: impl Iterator<Item = (&'a [f64], bool)>, coefs: &mut Vec<f64>) -> f64 {
    coefs.clear();
    let mut loss = 0.0;
    for (u, positive) in outputs {
        let f = dot(v, u);
        if positive {
            loss -= log_sigmoid(f);
            coefs.push(sigmoid(f) - 1.0);
        } else {
            loss -= log_sigmoid(-f);
            coefs.push(sigmoid(f));
        }
    }
    loss
}

pub fn sgns_loss(target: &[f64], positive: &[f64], negatives: &[&[f64]]) -> f64 {
    let mut coefs = Vec::new();
    sgns_coefficients(target, sgns_outputs(positive, negatives), &mut coefs)
}

pub fn sgns_gradients(target: &[f64], positive: &[f64], negatives: &[&[f64]]) -> SgnsGradients {
    let mut coefs = Vec::new();
    let loss = sgns_coefficients(target, sgns_outputs(positive, negatives), &mut coefs);
    let mut d_target = vec![0.0; target.len()];
    for ((u, _), &g) in sgns_outputs(positive, negatives).zip(&coefs) {
        for (d, x) in d_target.iter_mut().zip(u) {
            *d += g * x;
        }
    }
    let scaled = |g: f64| target.iter().map(|x| g * x).collect::<Vec<f64>>();
    SgnsGradients {
        loss,
        target: d_target,
        positive: scaled(coefs[0]),
        negatives: coefs[1..].iter().map(|&g| scaled(g)).collect(),
    }
}

fn sgns_outputs<'a>(positive: &'a [f64], negatives: &'a [&'a [f64]]) -> impl Iterator<Item = (&'a [f64], bool)> {
    core::iter::once((positive, true)).chain(negatives.iter().map(|n| (*n, false)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgnsModel {
    /// Target vectors: plain non-target words plus tagged target forms.
    pub target_space: EmbeddingSpace,
    /// Shared context vectors over the plain vocabulary.
    pub context_space: EmbeddingSpace,
    /// Mean sampled pair loss of each epoch, measured before each update.
    pub epoch_losses: Vec<f64>,
    /// Expected objective after each epoch, when `track_objective` is set.
    pub epoch_objectives: Vec<f64>,
}

/// Mean over all training pairs of
/// `-log σ(u_c·v) - negatives · Σ_n P(n) log σ(-u_n·v)`,
/// with `P` the unigram^0.75 noise distribution.
fn expected_objective(
    pair_counts: &BTreeMap<(u32, u32), usize>,
    w_in: &[f64],
    w_out: &[f64],
    noise_probs: &[f64],
    params: &SgnsParams,
) -> f64 {
    let dim = params.dim;
    let mut total = 0.0;
    let mut n = 0usize;
    for (&(t, c), &count) in pair_counts {
        let v = &w_in[t as usize * dim..(t as usize + 1) * dim];
        let row = |id: usize| &w_out[id * dim..(id + 1) * dim];
        let mut loss = -log_sigmoid(dot(v, row(c as usize)));
        let neg: f64 = noise_probs
            .iter()
            .enumerate()
            .map(|(id, p)| p * log_sigmoid(-dot(v, row(id))))
            .sum();
        loss -= params.negatives as f64 * neg;
        total += loss * count as f64;
        n += count;
    }
    total / n as f64
}

/// Trains SGNS on a referenced corpus, single-threaded and deterministic for
/// a fixed `rng_seed`. Sentences are shuffled each epoch across bins.
pub fn train_sgns(corpus: &ReferencedCorpus, params: &SgnsParams) -> Result<SgnsModel> {
    params.validate()?;
    let total_pairs: usize = corpus
        .sentences
        .iter()
        .map(|s| corpus.sentence_pairs(s, params.window).len())
        .sum();
    if total_pairs == 0 {
        return Err(Error::EmptyCorpus);
    }
    let dim = params.dim;
    let n_targets = corpus.target_tokens.len();
    let vocab = &corpus.context_vocab;
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);

    let mut w_in: Vec<f64> = (0..n_targets * dim)
        .map(|_| (rng.random::<f64>() - 0.5) / dim as f64)
        .collect();
    let mut w_out = vec![0.0; vocab.len() * dim];

    let noise_weights: Vec<f64> = vocab.counts().iter().map(|&c| libm::pow(c as f64, 0.75)).collect();
    let noise = WeightedIndex::new(&noise_weights)
        .map_err(|e| Error::InvalidParameter(format!("negative sampling table: {e}")))?;

    let keep_prob: Option<Vec<f64>> = params.subsample_threshold.map(|t| {
        let total: u64 = vocab.counts().iter().sum();
        vocab
            .counts()
            .iter()
            .map(|&c| {
                let f = c as f64 / total as f64;
                ((libm::sqrt(f / t) + 1.0) * t / f).min(1.0)
            })
            .collect()
    });

    let schedule_len = (total_pairs * params.epochs) as f64;
    let mut processed = 0usize;
    let mut order: Vec<usize> = (0..corpus.sentences.len()).collect();
    let mut epoch_losses = Vec::with_capacity(params.epochs);
    let mut negs: Vec<u32> = Vec::with_capacity(params.negatives);
    let mut coefs = Vec::with_capacity(params.negatives + 1);
    let mut grad_v = vec![0.0; dim];
    let mut slots: Vec<Option<Slot>> = Vec::new();
    let mut epoch_objectives = Vec::new();
    let objective_inputs = params.track_objective.then(|| {
        let z: f64 = noise_weights.iter().sum();
        let probs: Vec<f64> = noise_weights.iter().map(|w| w / z).collect();
        let mut counts: BTreeMap<(u32, u32), usize> = BTreeMap::new();
        for s in &corpus.sentences {
            for p in corpus.sentence_pairs(s, params.window) {
                *counts.entry(p).or_default() += 1;
            }
        }
        (counts, probs)
    });

    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut loss_n = 0usize;
        for &si in &order {
            let sentence = &corpus.sentences[si];
            slots.clear();
            slots.extend_from_slice(&sentence.slots);
            if let Some(keep) = &keep_prob {
                for s in slots.iter_mut() {
                    if let Some(slot) = s {
                        if rng.random::<f64>() >= keep[slot.context as usize] {
                            *s = None;
                        }
                    }
                }
            }
            let pairs = corpus.sentence_pairs(
                &ReferencedSentence {
                    bin: sentence.bin,
                    slots: core::mem::take(&mut slots),
                },
                params.window,
            );
            // dropped (subsampled) pairs still advance the schedule
            let scheduled = corpus.sentence_pairs(sentence, params.window).len();
            let lr_at = |done: usize| {
                let progress = done as f64 / schedule_len;
                (params.learning_rate - (params.learning_rate - params.min_learning_rate) * progress)
                    .max(params.min_learning_rate)
            };
            for (t, c) in pairs.iter().copied() {
                let lr = lr_at(processed);
                processed += 1;
                negs.clear();
                while negs.len() < params.negatives {
                    let n = noise.sample(&mut rng) as u32;
                    if n != c {
                        negs.push(n);
                    }
                }
                let v = &w_in[t as usize * dim..(t as usize + 1) * dim];
                let loss = {
                    let w_out = &w_out;
                    let outputs = core::iter::once((c, true))
                        .chain(negs.iter().map(|&n| (n, false)))
                        .map(|(id, pos)| (&w_out[id as usize * dim..(id as usize + 1) * dim], pos));
                    sgns_coefficients(v, outputs, &mut coefs)
                };
                loss_sum += loss;
                loss_n += 1;
                // gradient step: v uses the pre-update outputs, outputs use the pre-update v
                grad_v.iter_mut().for_each(|g| *g = 0.0);
                for (k, &id) in core::iter::once(&c).chain(negs.iter()).enumerate() {
                    let u = &w_out[id as usize * dim..(id as usize + 1) * dim];
                    for (g, x) in grad_v.iter_mut().zip(u) {
                        *g += coefs[k] * x;
                    }
                }
                for (k, &id) in core::iter::once(&c).chain(negs.iter()).enumerate() {
                    let step = lr * coefs[k];
                    let (u, v) = (id as usize * dim, t as usize * dim);
                    for d in 0..dim {
                        w_out[u + d] -= step * w_in[v + d];
                    }
                }
                let v = &mut w_in[t as usize * dim..(t as usize + 1) * dim];
                for (x, g) in v.iter_mut().zip(&grad_v) {
                    *x -= lr * g;
                }
            }
            processed += scheduled - pairs.len();
        }
        epoch_losses.push(if loss_n == 0 { 0.0 } else { loss_sum / loss_n as f64 });
        if let Some((counts, probs)) = &objective_inputs {
            epoch_objectives.push(expected_objective(counts, &w_in, &w_out, probs, params));
        }
    }

    let mut target_space = EmbeddingSpace::new(dim, REFERENCED_PERIOD);
    for (id, name) in corpus.target_tokens.iter().enumerate() {
        target_space.insert(name.clone(), &w_in[id * dim..(id + 1) * dim])?;
    }
    let mut context_space = EmbeddingSpace::new(dim, "context");
    for (id, name) in vocab.tokens().iter().enumerate() {
        context_space.insert(name.clone(), &w_out[id * dim..(id + 1) * dim])?;
    }
    Ok(SgnsModel {
        target_space,
        context_space,
        epoch_losses,
        epoch_objectives,
    })
}

/// Vectors of `w#t1` and `w#t2`, in bin order.
pub fn extract_temporal_pair(target_space: &EmbeddingSpace, word: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let get = |bin: usize| {
        target_space
            .get(&tagged_name(word, bin))
            .map(<[f64]>::to_vec)
            .ok_or_else(|| Error::TargetUnseenInPeriod {
                token: word.to_string(),
                period: bin + 1,
            })
    };
    Ok((get(0)?, get(1)?))
}

/// The shared target space seen from one period: plain words unchanged and
/// each target's tagged form for `bin` renamed back to the plain word.
/// Targets without a tagged form for `bin` are absent.
pub fn period_view(
    target_space: &EmbeddingSpace,
    targets: &BTreeSet<String>,
    bin: usize,
    bin_count: usize,
) -> Result<EmbeddingSpace> {
    let tagged: BTreeSet<String> = targets
        .iter()
        .flat_map(|t| (0..bin_count).map(move |b| tagged_name(t, b)))
        .collect();
    let mut view = EmbeddingSpace::new(target_space.dim(), format!("t{}", bin + 1));
    for (token, v) in target_space.iter() {
        if !tagged.contains(token) && !targets.contains(token) {
            view.insert(token, v)?;
        }
    }
    for t in targets {
        if let Some(v) = target_space.get(&tagged_name(t, bin)) {
            view.insert(t.clone(), v)?;
        }
    }
    Ok(view)
}
