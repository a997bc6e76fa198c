//! Dice-scored collocation profiles per period.
//!
//! Frequencies are windowed pair counts: `f(w,c)` is the number of times `c`
//! falls in a window around `w`, `f(w)` and `f(c)` the corresponding pair
//! marginals. This keeps `f(w,c) <= min(f(w), f(c))`, so every score lies in
//! [0, 1].

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::corpus::{count_cooccurrences, Cooccurrence, CorpusBin, Vocabulary};
use crate::math::cosine_from_parts;
use crate::{Error, Result};

pub const DEFAULT_TOP_N: usize = 100;

/// `2 f(w,c) / (f(w) + f(c))`.
pub fn dice(f_wc: u64, f_w: u64, f_c: u64) -> Result<f64> {
    if f_wc > f_w || f_wc > f_c || f_w + f_c == 0 {
        return Err(Error::InvalidParameter(alloc::format!(
            "dice needs f_w >= f_wc, f_c >= f_wc and f_w + f_c > 0 (got f_wc={f_wc}, f_w={f_w}, f_c={f_c})"
        )));
    }
    Ok(2.0 * f_wc as f64 / (f_w + f_c) as f64)
}

/// Which scored contexts make it into a profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProfileSelection {
    /// The n best contexts, ties broken lexicographically.
    TopN(usize),
    /// Every context scoring at least this much.
    MinScore(f64),
}

impl Default for ProfileSelection {
    fn default() -> Self {
        ProfileSelection::TopN(DEFAULT_TOP_N)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollocationProfile {
    pub word: String,
    pub period_id: String,
    pub weights: BTreeMap<String, f64>,
}

impl CollocationProfile {
    pub fn empty(word: impl Into<String>, period_id: impl Into<String>) -> Self {
        CollocationProfile {
            word: word.into(),
            period_id: period_id.into(),
            weights: BTreeMap::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Co-occurrence statistics of one bin, from which profiles of any word can
/// be read off without recounting.
#[derive(Debug, Clone)]
pub struct BinCollocations<'a> {
    vocab: &'a Vocabulary,
    period_id: String,
    counts: Cooccurrence,
    by_target: Vec<Vec<(u32, u64)>>,
}

impl<'a> BinCollocations<'a> {
    pub fn new(bin: &CorpusBin, vocab: &'a Vocabulary, window: usize) -> Self {
        let counts = count_cooccurrences(bin, vocab, window);
        let mut by_target = alloc::vec![Vec::new(); vocab.len()];
        for (&(t, c), &n) in &counts.pairs {
            by_target[t as usize].push((c, n));
        }
        BinCollocations {
            vocab,
            period_id: bin.period_id.clone(),
            counts,
            by_target,
        }
    }

    pub fn period_id(&self) -> &str {
        &self.period_id
    }

    pub fn profile(&self, word: &str, selection: ProfileSelection) -> Result<CollocationProfile> {
        let w = self
            .vocab
            .id(word)
            .ok_or_else(|| Error::MissingToken(word.to_string()))?;
        let f_w = self.counts.target_totals[w as usize];
        let mut scored: Vec<(&str, f64)> = self.by_target[w as usize]
            .iter()
            .map(|&(c, f_wc)| {
                let f_c = self.counts.context_totals[c as usize];
                Ok((self.vocab.token(c), dice(f_wc, f_w, f_c)?))
            })
            .collect::<Result<_>>()?;
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.as_bytes().cmp(b.0.as_bytes())));
        match selection {
            ProfileSelection::TopN(n) => scored.truncate(n),
            ProfileSelection::MinScore(min) => scored.retain(|s| s.1 >= min),
        }
        Ok(CollocationProfile {
            word: word.to_string(),
            period_id: self.period_id.clone(),
            weights: scored.into_iter().map(|(c, s)| (c.to_string(), s)).collect(),
        })
    }

    /// Profiles of every vocabulary word (empty for words unseen in the bin).
    pub fn profile_space(&self, selection: ProfileSelection) -> Result<ProfileSpace> {
        let profiles = self
            .vocab
            .tokens()
            .iter()
            .map(|t| Ok((t.clone(), self.profile(t, selection)?)))
            .collect::<Result<_>>()?;
        Ok(ProfileSpace {
            period_id: self.period_id.clone(),
            profiles,
        })
    }
}

/// Builds the collocation profile of `word` in `bin`. A word unseen in the
/// bin gets an empty profile; a word outside `vocab` is an error.
pub fn build_profile(
    bin: &CorpusBin,
    vocab: &Vocabulary,
    word: &str,
    window: usize,
    selection: ProfileSelection,
) -> Result<CollocationProfile> {
    BinCollocations::new(bin, vocab, window).profile(word, selection)
}

/// Cosine of the two weight vectors over their union support; 0 when either
/// profile is empty.
pub fn profile_similarity(p1: &CollocationProfile, p2: &CollocationProfile) -> f64 {
    sparse_cosine(&p1.weights, &p2.weights).unwrap_or(0.0)
}

pub(crate) fn sparse_cosine(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> Option<f64> {
    let dot: f64 = a.iter().filter_map(|(k, x)| b.get(k).map(|y| x * y)).sum();
    let na: f64 = a.values().map(|x| x * x).sum();
    let nb: f64 = b.values().map(|x| x * x).sum();
    cosine_from_parts(dot, na, nb)
}

/// Profiles of one period keyed by word.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSpace {
    pub period_id: String,
    pub profiles: BTreeMap<String, CollocationProfile>,
}

impl ProfileSpace {
    pub fn get(&self, word: &str) -> Option<&CollocationProfile> {
        self.profiles.get(word)
    }
}
