//! Task metrics and a synthetic diachronic corpus with known gold.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::{index, IndexedRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{CorpusBin, TimeBinnedCorpus};
use crate::detect::{LabelSet, RankedList};
use crate::math::{cosine_from_parts, dot, mean, squared_norm};
use crate::{Error, Result};

/// Gold labels: binary change flags and graded change scores.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GoldStandard {
    pub binary: BTreeMap<String, u8>,
    pub graded: BTreeMap<String, f64>,
}

impl GoldStandard {
    /// Checks that binary and graded gold cover the same targets when both exist.
    pub fn validate(&self) -> Result<()> {
        if !self.binary.is_empty() && !self.graded.is_empty() && !self.binary.keys().eq(self.graded.keys()) {
            return Err(Error::InvalidParameter(
                "binary and graded gold cover different targets".into(),
            ));
        }
        Ok(())
    }
}

/// Fraction of gold targets whose predicted label matches.
pub fn accuracy(pred: &LabelSet, gold: &GoldStandard) -> Result<f64> {
    let missing: Vec<String> = gold
        .binary
        .keys()
        .filter(|t| !pred.labels.contains_key(*t))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingPredictions(missing));
    }
    if gold.binary.is_empty() {
        return Err(Error::InvalidParameter("empty binary gold".into()));
    }
    let correct = gold.binary.iter().filter(|(t, g)| pred.labels[*t] == **g).count();
    Ok(correct as f64 / gold.binary.len() as f64)
}

/// Fractional (average) ranks, 1-based.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = alloc::vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i..=j share the mean of ranks i+1..=j+1
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman's ρ between predicted distances and graded gold: the Pearson
/// correlation of the average ranks.
pub fn spearman(pred: &RankedList, gold: &GoldStandard) -> Result<f64> {
    let predicted: BTreeMap<&str, f64> = pred.entries.iter().map(|(t, d)| (t.as_str(), *d)).collect();
    let missing: Vec<String> = gold
        .graded
        .keys()
        .filter(|t| !predicted.contains_key(t.as_str()))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingPredictions(missing));
    }
    if gold.graded.len() < 2 {
        return Err(Error::InsufficientTargets {
            needed: 2,
            actual: gold.graded.len(),
        });
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = gold.graded.iter().map(|(t, g)| (predicted[t.as_str()], *g)).unzip();
    rank_correlation(&xs, &ys)
}

pub fn rank_correlation(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let centre = |v: Vec<f64>| {
        let m = mean(&v);
        v.into_iter().map(|x| x - m).collect::<Vec<_>>()
    };
    let rx = centre(average_ranks(xs));
    let ry = centre(average_ranks(ys));
    cosine_from_parts(dot(&rx, &ry), squared_norm(&rx), squared_norm(&ry)).ok_or(Error::UndefinedCorrelation)
}

/// Parameters of the synthetic two-period corpus.
///
/// Every target owns two disjoint context communities A and B drawn from the
/// non-target words. A sentence is one target plus `sentence_len` context
/// words from one of its communities. Stable targets use A in both periods;
/// a changed target uses A in t1 and B with probability `change_strength`
/// in t2.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub vocab_size: usize,
    pub n_targets: usize,
    pub n_changed: usize,
    pub sentences_per_bin: usize,
    /// One strength per changed target, each in [0.05, 1].
    pub change_strength: Vec<f64>,
    pub community_size: usize,
    pub sentence_len: usize,
    pub rng_seed: u64,
}

/// Strengths below this cannot be told apart from stable targets.
pub const MIN_CHANGE_STRENGTH: f64 = 0.05;

impl SynthSpec {
    /// A spec where every changed target has the same strength.
    pub fn uniform(
        vocab_size: usize,
        n_targets: usize,
        n_changed: usize,
        sentences_per_bin: usize,
        strength: f64,
        rng_seed: u64,
    ) -> Self {
        SynthSpec {
            vocab_size,
            n_targets,
            n_changed,
            sentences_per_bin,
            change_strength: alloc::vec![strength; n_changed],
            community_size: 8,
            sentence_len: 6,
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSynthSpec(m));
        if self.n_targets == 0 {
            return bad("need at least one target".into());
        }
        if self.n_changed > self.n_targets || self.n_targets > self.vocab_size {
            return bad(format!(
                "need n_changed <= n_targets <= vocab_size, got {} / {} / {}",
                self.n_changed, self.n_targets, self.vocab_size
            ));
        }
        if self.change_strength.len() != self.n_changed {
            return bad(format!(
                "{} change strengths for {} changed targets",
                self.change_strength.len(),
                self.n_changed
            ));
        }
        if let Some(s) = self
            .change_strength
            .iter()
            .find(|s| !(MIN_CHANGE_STRENGTH..=1.0).contains(*s))
        {
            return bad(format!("change strength {s} outside [{MIN_CHANGE_STRENGTH}, 1]"));
        }
        if self.community_size == 0 || self.sentence_len == 0 || self.sentences_per_bin == 0 {
            return bad("community size, sentence length and sentences per bin must be positive".into());
        }
        if self.vocab_size - self.n_targets < 2 * self.community_size {
            return bad(format!(
                "{} context words cannot hold two disjoint communities of {}",
                self.vocab_size - self.n_targets,
                self.community_size
            ));
        }
        Ok(())
    }
}

pub fn target_name(i: usize) -> String {
    format!("target{i:03}")
}

fn context_name(i: usize) -> String {
    format!("ctx{i:04}")
}

/// Generates the corpus (bins `t1`, `t2`) and its gold: binary = changed
/// flags, graded = change strength (0 for stable targets).
pub fn generate_synthetic(spec: &SynthSpec) -> Result<(TimeBinnedCorpus, GoldStandard)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let n_context = spec.vocab_size - spec.n_targets;

    let mut changed_ids: Vec<usize> = index::sample(&mut rng, spec.n_targets, spec.n_changed).into_vec();
    changed_ids.sort_unstable();
    let mut strength = alloc::vec![0.0; spec.n_targets];
    for (&t, &s) in changed_ids.iter().zip(&spec.change_strength) {
        strength[t] = s;
    }

    let communities: Vec<(Vec<usize>, Vec<usize>)> = (0..spec.n_targets)
        .map(|_| {
            let picked = index::sample(&mut rng, n_context, 2 * spec.community_size).into_vec();
            let (a, b) = picked.split_at(spec.community_size);
            (a.to_vec(), b.to_vec())
        })
        .collect();

    let mut bins = Vec::with_capacity(2);
    for period in 0..2 {
        let mut bin = CorpusBin::new(format!("t{}", period + 1));
        for _ in 0..spec.sentences_per_bin {
            let t = rng.random_range(0..spec.n_targets);
            let use_b = period == 1 && strength[t] > 0.0 && rng.random_bool(strength[t]);
            let community = if use_b { &communities[t].1 } else { &communities[t].0 };
            let mut sentence: Vec<String> = (0..spec.sentence_len)
                .map(|_| context_name(*community.choose(&mut rng).expect("non-empty community")))
                .collect();
            let at = rng.random_range(0..=sentence.len());
            sentence.insert(at, target_name(t));
            bin.sentences.push(sentence);
        }
        bins.push(bin);
    }

    let gold = GoldStandard {
        binary: (0..spec.n_targets)
            .map(|t| (target_name(t), u8::from(strength[t] > 0.0)))
            .collect(),
        graded: (0..spec.n_targets).map(|t| (target_name(t), strength[t])).collect(),
    };
    Ok((TimeBinnedCorpus::new(bins), gold))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::Strategy;
    use alloc::string::ToString;
    use alloc::vec;
    use rand::seq::SliceRandom;

    fn labels(pairs: &[(&str, u8)]) -> LabelSet {
        LabelSet {
            strategy: Strategy::Gmm,
            labels: pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }

    fn gold_binary(pairs: &[(&str, u8)]) -> GoldStandard {
        GoldStandard {
            binary: pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            graded: BTreeMap::new(),
        }
    }

    fn ranked(pairs: &[(&str, f64)]) -> RankedList {
        RankedList {
            entries: pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }

    fn graded(pairs: &[(&str, f64)]) -> GoldStandard {
        GoldStandard {
            binary: BTreeMap::new(),
            graded: pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }

    #[test]
    fn accuracy_examples() {
        let g = [("a", 1), ("b", 0), ("c", 1)];
        assert_eq!(accuracy(&labels(&g), &gold_binary(&g)).unwrap(), 1.0);
        let flipped: Vec<(&str, u8)> = g.iter().map(|(k, v)| (*k, 1 - v)).collect();
        assert_eq!(accuracy(&labels(&flipped), &gold_binary(&g)).unwrap(), 0.0);

        let names = ["a", "b", "c", "d", "e", "f", "g", "h", "i", "j"];
        let gold: Vec<(&str, u8)> = names.iter().map(|n| (*n, 1)).collect();
        let pred: Vec<(&str, u8)> = names.iter().enumerate().map(|(i, n)| (*n, u8::from(i < 7))).collect();
        assert!((accuracy(&labels(&pred), &gold_binary(&gold)).unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn accuracy_lists_missing_targets() {
        let err = accuracy(&labels(&[("a", 1)]), &gold_binary(&[("a", 1), ("b", 0), ("c", 0)])).unwrap_err();
        assert_eq!(err, Error::MissingPredictions(vec!["b".into(), "c".into()]));
        assert!(err.to_string().contains("b, c"));
    }

    #[test]
    fn spearman_examples() {
        let g = graded(&[("a", 1.0), ("b", 2.0), ("c", 3.0), ("d", 4.0)]);
        assert!(
            (spearman(&ranked(&[("a", 0.1), ("b", 0.2), ("c", 0.3), ("d", 0.4)]), &g).unwrap() - 1.0).abs() < 1e-15
        );
        assert!(
            (spearman(&ranked(&[("a", 0.4), ("b", 0.3), ("c", 0.2), ("d", 0.1)]), &g).unwrap() + 1.0).abs() < 1e-15
        );
        // pred ranks [1,2,3,4] vs gold ranks [2,1,4,3]: 1 - 6*4/(4*15)
        let g = graded(&[("a", 2.0), ("b", 1.0), ("c", 4.0), ("d", 3.0)]);
        let rho = spearman(&ranked(&[("a", 1.0), ("b", 2.0), ("c", 3.0), ("d", 4.0)]), &g).unwrap();
        assert!((rho - 0.6).abs() < 1e-15, "{rho}");
    }

    #[test]
    fn spearman_errors() {
        let g = graded(&[("a", 1.0), ("b", 2.0)]);
        assert!(matches!(
            spearman(&ranked(&[("a", 0.1)]), &g),
            Err(Error::MissingPredictions(_))
        ));
        assert!(matches!(
            spearman(&ranked(&[("a", 0.1)]), &graded(&[("a", 1.0)])),
            Err(Error::InsufficientTargets { .. })
        ));
        assert_eq!(
            spearman(&ranked(&[("a", 0.5), ("b", 0.5)]), &g),
            Err(Error::UndefinedCorrelation)
        );
    }

    #[test]
    fn average_ranks_with_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 20.0, 5.0]), [2.0, 3.5, 3.5, 1.0]);
        assert_eq!(average_ranks(&[1.0, 1.0, 1.0]), [2.0, 2.0, 2.0]);
        assert!(average_ranks(&[]).is_empty());
    }

    #[test]
    fn synth_spec_validation() {
        assert!(SynthSpec::uniform(500, 40, 10, 100, 0.9, 0).validate().is_ok());
        assert!(SynthSpec::uniform(500, 40, 41, 100, 0.9, 0).validate().is_err());
        assert!(SynthSpec::uniform(30, 40, 10, 100, 0.9, 0).validate().is_err());
        assert!(SynthSpec::uniform(500, 40, 10, 100, 0.0, 0).validate().is_err());
        assert!(SynthSpec::uniform(500, 40, 10, 100, 0.04, 0).validate().is_err());
        assert!(SynthSpec::uniform(500, 40, 10, 100, 1.5, 0).validate().is_err());
        assert!(SynthSpec::uniform(50, 40, 10, 100, 0.5, 0).validate().is_err());
        let mut s = SynthSpec::uniform(500, 40, 10, 100, 0.9, 0);
        s.change_strength.pop();
        assert!(s.validate().is_err());
    }

    #[test]
    fn synthetic_corpus_shape_and_gold() {
        let spec = SynthSpec::uniform(120, 10, 3, 400, 0.8, 5);
        let (c, g) = generate_synthetic(&spec).unwrap();
        assert_eq!(c.bins.len(), 2);
        assert_eq!(c.bins[0].period_id, "t1");
        assert!(c.bins.iter().all(|b| b.sentences.len() == 400));
        assert!(c
            .bins
            .iter()
            .flat_map(|b| &b.sentences)
            .all(|s| s.len() == spec.sentence_len + 1));
        assert_eq!(g.binary.values().filter(|&&x| x == 1).count(), 3);
        assert!(g.validate().is_ok());
        for (t, &b) in &g.binary {
            assert_eq!(g.graded[t] > 0.0, b == 1);
            if b == 1 {
                assert_eq!(g.graded[t], 0.8);
            }
        }
        assert_eq!(generate_synthetic(&spec).unwrap(), (c.clone(), g.clone()));
        let other = generate_synthetic(&SynthSpec { rng_seed: 6, ..spec }).unwrap();
        assert_ne!(other.0, c);
    }

    #[test]
    fn no_changed_targets_means_all_stable() {
        let (_, g) = generate_synthetic(&SynthSpec::uniform(100, 8, 0, 50, 0.9, 1)).unwrap();
        assert!(g.binary.values().all(|&x| x == 0));
        assert!(g.graded.values().all(|&x| x == 0.0));
    }

    #[test]
    fn changed_targets_switch_context_communities() {
        let spec = SynthSpec::uniform(200, 6, 2, 3000, 1.0, 2);
        let (c, g) = generate_synthetic(&spec).unwrap();
        let contexts = |bin: &CorpusBin, t: &str| -> alloc::collections::BTreeSet<String> {
            bin.sentences
                .iter()
                .filter(|s| s.iter().any(|x| x == t))
                .flat_map(|s| s.iter().filter(|x| *x != t).cloned())
                .collect()
        };
        for (t, &changed) in &g.binary {
            let (a, b) = (contexts(&c.bins[0], t), contexts(&c.bins[1], t));
            if changed == 1 {
                assert!(a.is_disjoint(&b), "{t}");
            } else {
                assert_eq!(a, b, "{t}");
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn spearman_bounded_and_antisymmetric(v in prop::collection::vec(-100.0f64..100.0, 2..30), perm_seed in 0u64..1000) {
                let names: Vec<String> = (0..v.len()).map(|i| format!("w{i}")).collect();
                let mut gold_vals = v.clone();
                gold_vals.shuffle(&mut ChaCha8Rng::seed_from_u64(perm_seed));
                let g = GoldStandard {
                    binary: BTreeMap::new(),
                    graded: names.iter().cloned().zip(gold_vals).collect(),
                };
                let fwd = RankedList { entries: names.iter().cloned().zip(v.iter().copied()).collect() };
                let rev = RankedList { entries: names.iter().cloned().zip(v.iter().map(|x| -x)).collect() };
                if let Ok(r) = spearman(&fwd, &g) {
                    prop_assert!((-1.0..=1.0).contains(&r));
                    prop_assert!((spearman(&rev, &g).unwrap() + r).abs() < 1e-12);
                }
            }
        }
    }
}
