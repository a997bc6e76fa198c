//! Temporal Random Indexing.
//!
//! Every vocabulary entry gets one sparse ternary index vector, generated once
//! and shared by all period bins. A word's vector in a period is the
//! (optionally PPMI-weighted) sum of the index vectors of its window
//! contexts in that period. Sharing the random projection is what makes the
//! per-period spaces directly comparable.

use alloc::string::ToString;
use alloc::vec::Vec;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{count_cooccurrences, sentence_pairs, Cooccurrence, CorpusBin, TimeBinnedCorpus, Vocabulary};
use crate::embedding::EmbeddingSpace;
use crate::{Error, Result};

pub const DEFAULT_SEEDS: usize = 10;

/// Sparse ternary random vectors, one per vocabulary id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexVectorTable {
    dim: usize,
    seeds_per_vector: usize,
    rng_seed: u64,
    vectors: Vec<Vec<(u32, i8)>>,
}

impl IndexVectorTable {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seeds_per_vector(&self) -> usize {
        self.seeds_per_vector
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Nonzero `(component, sign)` entries of one index vector.
    pub fn sparse(&self, id: u32) -> &[(u32, i8)] {
        &self.vectors[id as usize]
    }

    pub fn dense(&self, id: u32) -> Vec<f64> {
        let mut v = alloc::vec![0.0; self.dim];
        for &(pos, sign) in self.sparse(id) {
            v[pos as usize] = f64::from(sign);
        }
        v
    }
}

/// Generates one index vector per vocabulary entry: `seeds` distinct
/// components, the first half (rounded up) set to +1 and the rest to -1.
pub fn make_index_vectors(vocab: &Vocabulary, dim: usize, seeds: usize, rng_seed: u64) -> Result<IndexVectorTable> {
    if seeds == 0 || seeds > dim {
        return Err(Error::InvalidParameter(alloc::format!(
            "index vector seeds must be in 1..={dim}, got {seeds}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let positives = seeds.div_ceil(2);
    let vectors = (0..vocab.len())
        .map(|_| {
            let mut positions: Vec<usize> = index::sample(&mut rng, dim, seeds).into_vec();
            positions.sort_unstable();
            // signs are assigned by draw order so they are not tied to position
            let mut entries: Vec<(u32, i8)> = Vec::with_capacity(seeds);
            let drawn = index::sample(&mut rng, seeds, seeds).into_vec();
            for (rank, &slot) in drawn.iter().enumerate() {
                let sign = if rank < positives { 1 } else { -1 };
                entries.push((positions[slot] as u32, sign));
            }
            entries.sort_unstable_by_key(|e| e.0);
            entries
        })
        .collect();
    Ok(IndexVectorTable {
        dim,
        seeds_per_vector: seeds,
        rng_seed,
        vectors,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TriOptions {
    /// Start a bin's accumulation from the previous bin's vectors.
    pub init_from_previous: bool,
    /// Drop the -1 components of every index vector.
    pub positive_only: bool,
    /// Weight each pair by the bin-local PPMI of (target, context).
    pub ppmi_weights: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriParams {
    pub dim: usize,
    pub seeds_per_vector: usize,
    pub window: usize,
    pub options: TriOptions,
    pub rng_seed: u64,
}

impl Default for TriParams {
    fn default() -> Self {
        TriParams {
            dim: 1000,
            seeds_per_vector: DEFAULT_SEEDS,
            window: 5,
            options: TriOptions {
                ppmi_weights: true,
                ..TriOptions::default()
            },
            rng_seed: 0,
        }
    }
}

impl TriParams {
    /// Dimension and PPMI weighting per corpus language:
    /// 400 without PPMI for English, 1000 with PPMI otherwise.
    pub fn for_language(lang: &str) -> Self {
        let english = matches!(lang, "en" | "english" | "English" | "EN");
        let mut p = TriParams::default();
        if english {
            p.dim = 400;
            p.options.ppmi_weights = false;
        }
        p
    }
}

/// Per-pair weights for one bin.
#[derive(Debug, Clone)]
pub enum PairWeights {
    Unit,
    Ppmi(Cooccurrence),
}

impl PairWeights {
    pub fn for_bin(bin: &CorpusBin, vocab: &Vocabulary, window: usize, options: TriOptions) -> Self {
        if options.ppmi_weights {
            PairWeights::Ppmi(count_cooccurrences(bin, vocab, window))
        } else {
            PairWeights::Unit
        }
    }

    fn weight(&self, target: u32, context: u32) -> f64 {
        match self {
            PairWeights::Unit => 1.0,
            PairWeights::Ppmi(co) => co.ppmi(target, context),
        }
    }
}

/// Partial accumulation over a range of sentences. Partials over disjoint
/// sentence ranges combine by addition.
#[derive(Debug, Clone, PartialEq)]
pub struct TriAccumulator {
    dim: usize,
    vectors: Vec<f64>,
    seen: Vec<bool>,
}

impl TriAccumulator {
    pub fn new(vocab_len: usize, dim: usize) -> Self {
        TriAccumulator {
            dim,
            vectors: alloc::vec![0.0; vocab_len * dim],
            seen: alloc::vec![false; vocab_len],
        }
    }

    pub fn accumulate(
        &mut self,
        sentences: &[alloc::vec::Vec<alloc::string::String>],
        vocab: &Vocabulary,
        table: &IndexVectorTable,
        weights: &PairWeights,
        options: TriOptions,
        window: usize,
    ) {
        let dim = self.dim;
        for sentence in sentences {
            for (t, c) in sentence_pairs(&vocab.encode(sentence), window) {
                let w = weights.weight(t, c);
                self.seen[t as usize] = true;
                let row = &mut self.vectors[t as usize * dim..(t as usize + 1) * dim];
                for &(pos, sign) in table.sparse(c) {
                    if options.positive_only && sign < 0 {
                        continue;
                    }
                    row[pos as usize] += w * f64::from(sign);
                }
            }
        }
    }

    pub fn merge(&mut self, other: &TriAccumulator) {
        for (a, b) in self.vectors.iter_mut().zip(&other.vectors) {
            *a += b;
        }
        for (a, b) in self.seen.iter_mut().zip(&other.seen) {
            *a |= b;
        }
    }

    /// Builds the period space. With `prev`, its vectors are the starting
    /// point and its tokens are carried over even when unseen in this bin.
    pub fn finish(self, vocab: &Vocabulary, period_id: &str, prev: Option<&EmbeddingSpace>) -> Result<EmbeddingSpace> {
        let mut space = EmbeddingSpace::new(self.dim, period_id);
        if let Some(prev) = prev {
            for (token, v) in prev.iter() {
                space.insert(token, v)?;
            }
        }
        for (id, token) in vocab.tokens().iter().enumerate() {
            if !self.seen[id] {
                continue;
            }
            let acc = &self.vectors[id * self.dim..(id + 1) * self.dim];
            match space.get_mut(token) {
                Some(dst) => dst.iter_mut().zip(acc).for_each(|(d, a)| *d += a),
                None => space.insert(token.to_string(), acc)?,
            }
        }
        Ok(space)
    }
}

/// Trains one period space from `bin`.
///
/// `prev` is only consulted when `options.init_from_previous` is set; passing
/// `None` there (the first bin) starts from zeros.
pub fn train_tri(
    bin: &CorpusBin,
    vocab: &Vocabulary,
    table: &IndexVectorTable,
    options: TriOptions,
    window: usize,
    prev: Option<&EmbeddingSpace>,
) -> Result<EmbeddingSpace> {
    check_table(vocab, table)?;
    let prev = if options.init_from_previous { prev } else { None };
    if let Some(p) = prev {
        if p.dim() != table.dim() {
            return Err(Error::DimensionMismatch {
                expected: table.dim(),
                actual: p.dim(),
            });
        }
    }
    let weights = PairWeights::for_bin(bin, vocab, window, options);
    let mut acc = TriAccumulator::new(vocab.len(), table.dim());
    acc.accumulate(&bin.sentences, vocab, table, &weights, options, window);
    acc.finish(vocab, &bin.period_id, prev)
}

pub(crate) fn check_table(vocab: &Vocabulary, table: &IndexVectorTable) -> Result<()> {
    if table.len() != vocab.len() {
        return Err(Error::InvalidParameter(alloc::format!(
            "index table has {} vectors for a vocabulary of {}",
            table.len(),
            vocab.len()
        )));
    }
    Ok(())
}

/// Trains every bin in order with one shared index table.
pub fn train_tri_periods(
    corpus: &TimeBinnedCorpus,
    vocab: &Vocabulary,
    params: &TriParams,
) -> Result<Vec<EmbeddingSpace>> {
    let table = make_index_vectors(vocab, params.dim, params.seeds_per_vector, params.rng_seed)?;
    let mut spaces: Vec<EmbeddingSpace> = Vec::with_capacity(corpus.bins.len());
    for bin in &corpus.bins {
        let space = train_tri(bin, vocab, &table, params.options, params.window, spaces.last())?;
        spaces.push(space);
    }
    Ok(spaces)
}
