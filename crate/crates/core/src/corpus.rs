//! Time-binned corpora, vocabularies and windowed co-occurrence streams.
//!
//! One line of input is one sentence and windows never cross sentences.
//! Tokens are whatever whitespace splitting yields: no lowercasing, no
//! punctuation stripping.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use hashbrown::HashMap;

use crate::{Error, Result};

/// Splits a line on runs of whitespace.
pub fn tokenize(line: &str) -> Vec<String> {
    line.split_whitespace().map(str::to_string).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusBin {
    pub period_id: String,
    pub sentences: Vec<Vec<String>>,
}

impl CorpusBin {
    pub fn new(period_id: impl Into<String>) -> Self {
        CorpusBin {
            period_id: period_id.into(),
            sentences: Vec::new(),
        }
    }

    /// Builds a bin from raw lines, one sentence per line.
    pub fn from_lines<'a, I>(period_id: impl Into<String>, lines: I) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        CorpusBin {
            period_id: period_id.into(),
            sentences: lines.into_iter().map(tokenize).collect(),
        }
    }

    pub fn push_line(&mut self, line: &str) {
        self.sentences.push(tokenize(line));
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }
}

/// Sentences partitioned into ordered period bins. The detection pipeline
/// uses exactly two bins.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TimeBinnedCorpus {
    pub bins: Vec<CorpusBin>,
}

impl TimeBinnedCorpus {
    pub fn new(bins: Vec<CorpusBin>) -> Self {
        TimeBinnedCorpus { bins }
    }

    /// Checks the two-period shape required for change detection.
    pub fn require_two_bins(&self) -> Result<()> {
        if self.bins.len() != 2 {
            return Err(Error::InvalidParameter(alloc::format!(
                "change detection needs exactly 2 period bins, corpus has {}",
                self.bins.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VocabPolicy {
    /// Keep the K most frequent tokens, ties broken lexicographically.
    TopK(usize),
    /// Keep tokens occurring at least n times.
    MinCount(u64),
}

/// Token to dense id map with pooled frequency counts.
///
/// Ids are assigned by descending count, ties lexicographic, so id order is
/// deterministic for a given corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    counts: Vec<u64>,
    index: BTreeMap<String, u32>,
    policy: VocabPolicy,
}

impl Vocabulary {
    /// Applies `policy` to raw token counts.
    pub fn from_counts<I>(counts: I, policy: VocabPolicy) -> Self
    where
        I: IntoIterator<Item = (String, u64)>,
    {
        let mut entries: Vec<(String, u64)> = counts.into_iter().filter(|(_, c)| *c > 0).collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.as_bytes().cmp(b.0.as_bytes())));
        match policy {
            VocabPolicy::TopK(k) => entries.truncate(k),
            VocabPolicy::MinCount(n) => entries.retain(|(_, c)| *c >= n),
        }

        let mut tokens = Vec::with_capacity(entries.len());
        let mut freq = Vec::with_capacity(entries.len());
        let mut index = BTreeMap::new();
        for (id, (token, count)) in entries.into_iter().enumerate() {
            index.insert(token.clone(), id as u32);
            tokens.push(token);
            freq.push(count);
        }
        Vocabulary {
            tokens,
            counts: freq,
            index,
            policy,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn policy(&self) -> VocabPolicy {
        self.policy
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    pub fn count(&self, id: u32) -> u64 {
        self.counts[id as usize]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Maps a sentence to ids; out-of-vocabulary tokens keep their slot as `None`.
    pub fn encode(&self, sentence: &[String]) -> Vec<Option<u32>> {
        sentence.iter().map(|t| self.id(t)).collect()
    }
}

/// Raw token frequencies pooled over every bin.
pub fn token_counts(corpus: &TimeBinnedCorpus) -> BTreeMap<String, u64> {
    let mut counts = BTreeMap::new();
    for token in corpus.bins.iter().flat_map(|b| b.sentences.iter().flatten()) {
        if let Some(c) = counts.get_mut(token.as_str()) {
            *c += 1;
        } else {
            counts.insert(token.clone(), 1);
        }
    }
    counts
}

pub fn build_vocabulary(corpus: &TimeBinnedCorpus, policy: VocabPolicy) -> Result<Vocabulary> {
    let counts = token_counts(corpus);
    if counts.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(Vocabulary::from_counts(counts, policy))
}

/// Calls `f(i, j)` for every ordered position pair with `0 < |i - j| <= window`
/// in a sentence of length `len`, `i` ascending then `j` ascending.
pub(crate) fn for_each_window_pair(len: usize, window: usize, mut f: impl FnMut(usize, usize)) {
    for i in 0..len {
        let lo = i.saturating_sub(window);
        let hi = (i + window).min(len.saturating_sub(1));
        for j in lo..=hi {
            if j != i {
                f(i, j);
            }
        }
    }
}

/// (target, context) id pairs of one encoded sentence. Out-of-vocabulary
/// slots emit nothing but still count as positions.
pub fn sentence_pairs(ids: &[Option<u32>], window: usize) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for_each_window_pair(ids.len(), window, |i, j| {
        if let (Some(t), Some(c)) = (ids[i], ids[j]) {
            out.push((t, c));
        }
    });
    out
}

/// Streams (target_id, context_id) pairs over a bin within a symmetric window.
///
/// # Panics
///
/// Panics if `window` is zero.
pub fn stream_pairs<'a>(
    bin: &'a CorpusBin,
    vocab: &'a Vocabulary,
    window: usize,
) -> impl Iterator<Item = (u32, u32)> + 'a {
    assert!(window >= 1, "window must be at least 1");
    bin.sentences
        .iter()
        .flat_map(move |s| sentence_pairs(&vocab.encode(s), window))
}

/// Windowed co-occurrence counts of one bin, with pair-count marginals.
#[derive(Debug, Clone, Default)]
pub struct Cooccurrence {
    pub pairs: HashMap<(u32, u32), u64>,
    /// `n(w, *)` indexed by target id.
    pub target_totals: Vec<u64>,
    /// `n(*, c)` indexed by context id.
    pub context_totals: Vec<u64>,
    pub total: u64,
}

impl Cooccurrence {
    pub fn count(&self, target: u32, context: u32) -> u64 {
        self.pairs.get(&(target, context)).copied().unwrap_or(0)
    }

    /// Positive pointwise mutual information of a pair, computed from pair
    /// counts: `max(0, ln(n(w,c) N / (n(w,*) n(*,c))))`. Zero for unseen pairs.
    pub fn ppmi(&self, target: u32, context: u32) -> f64 {
        let n_wc = self.count(target, context);
        if n_wc == 0 {
            return 0.0;
        }
        let n_w = self.target_totals[target as usize] as f64;
        let n_c = self.context_totals[context as usize] as f64;
        let pmi = libm::log(n_wc as f64 * self.total as f64 / (n_w * n_c));
        pmi.max(0.0)
    }
}

pub fn count_cooccurrences(bin: &CorpusBin, vocab: &Vocabulary, window: usize) -> Cooccurrence {
    let mut co = Cooccurrence {
        pairs: HashMap::new(),
        target_totals: alloc::vec![0; vocab.len()],
        context_totals: alloc::vec![0; vocab.len()],
        total: 0,
    };
    for (t, c) in stream_pairs(bin, vocab, window) {
        *co.pairs.entry((t, c)).or_insert(0) += 1;
        co.target_totals[t as usize] += 1;
        co.context_totals[c as usize] += 1;
        co.total += 1;
    }
    co
}
