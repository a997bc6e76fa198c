//! Cross-period similarity of target words: cosine (CS), Pearson
//! correlation (PC) and second-order neighbourhood similarity (NS).

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::collocation::{profile_similarity, sparse_cosine, ProfileSpace};
use crate::embedding::EmbeddingSpace;
use crate::math::{cosine_from_parts, dot, mean, squared_norm};
use crate::{Error, Result};

pub const DEFAULT_NEIGHBOURS: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Measure {
    Cosine,
    Pearson,
    Neighbourhood,
}

impl Measure {
    pub const ALL: [Measure; 3] = [Measure::Cosine, Measure::Pearson, Measure::Neighbourhood];

    pub fn code(self) -> &'static str {
        match self {
            Measure::Cosine => "CS",
            Measure::Pearson => "PC",
            Measure::Neighbourhood => "NS",
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "CS" | "cs" | "cosine" => Ok(Measure::Cosine),
            "PC" | "pc" | "pearson" => Ok(Measure::Pearson),
            "NS" | "ns" | "neighbourhood" | "neighborhood" => Ok(Measure::Neighbourhood),
            other => Err(Error::InvalidParameter(alloc::format!(
                "unknown similarity measure `{other}`"
            ))),
        }
    }
}

pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            actual: v.len(),
        });
    }
    cosine_from_parts(dot(u, v), squared_norm(u), squared_norm(v)).ok_or(Error::UndefinedCosine)
}

/// Cosine of the mean-centred vectors.
pub fn pearson(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            actual: v.len(),
        });
    }
    if u.len() < 2 {
        return Err(Error::UndefinedCorrelation);
    }
    let (mu, mv) = (mean(u), mean(v));
    let cu: Vec<f64> = u.iter().map(|x| x - mu).collect();
    let cv: Vec<f64> = v.iter().map(|x| x - mv).collect();
    cosine_from_parts(dot(&cu, &cv), squared_norm(&cu), squared_norm(&cv)).ok_or(Error::UndefinedCorrelation)
}

/// What neighbourhood similarity needs from one period's representation.
pub trait WordSpace {
    fn words(&self) -> Vec<&str>;

    fn has_word(&self, word: &str) -> bool;

    /// Cosine between two words of this space; `None` if either is missing
    /// or has a zero representation.
    fn cosine_within(&self, a: &str, b: &str) -> Option<f64>;
}

/// Per-target similarity between two period spaces of the same kind.
pub trait TemporalSpace: WordSpace {
    fn cross_cosine(&self, other: &Self, word: &str) -> Result<f64>;

    fn cross_pearson(&self, other: &Self, word: &str) -> Result<f64>;
}

fn lookup<'a>(space: &'a EmbeddingSpace, word: &str) -> Result<&'a [f64]> {
    space.get(word).ok_or_else(|| Error::MissingToken(word.to_string()))
}

impl WordSpace for EmbeddingSpace {
    fn words(&self) -> Vec<&str> {
        self.tokens().iter().map(String::as_str).collect()
    }

    fn has_word(&self, word: &str) -> bool {
        self.contains(word)
    }

    fn cosine_within(&self, a: &str, b: &str) -> Option<f64> {
        cosine(self.get(a)?, self.get(b)?).ok()
    }
}

impl TemporalSpace for EmbeddingSpace {
    fn cross_cosine(&self, other: &Self, word: &str) -> Result<f64> {
        cosine(lookup(self, word)?, lookup(other, word)?)
    }

    fn cross_pearson(&self, other: &Self, word: &str) -> Result<f64> {
        pearson(lookup(self, word)?, lookup(other, word)?)
    }
}

impl WordSpace for ProfileSpace {
    fn words(&self) -> Vec<&str> {
        self.profiles.keys().map(String::as_str).collect()
    }

    fn has_word(&self, word: &str) -> bool {
        self.profiles.contains_key(word)
    }

    fn cosine_within(&self, a: &str, b: &str) -> Option<f64> {
        sparse_cosine(&self.get(a)?.weights, &self.get(b)?.weights)
    }
}

impl TemporalSpace for ProfileSpace {
    /// Profile similarity: 0 when either profile is empty.
    fn cross_cosine(&self, other: &Self, word: &str) -> Result<f64> {
        let p1 = self.get(word).ok_or_else(|| Error::MissingToken(word.to_string()))?;
        let p2 = other.get(word).ok_or_else(|| Error::MissingToken(word.to_string()))?;
        Ok(profile_similarity(p1, p2))
    }

    /// Pearson correlation of the two profiles laid out over their union support.
    fn cross_pearson(&self, other: &Self, word: &str) -> Result<f64> {
        let p1 = self.get(word).ok_or_else(|| Error::MissingToken(word.to_string()))?;
        let p2 = other.get(word).ok_or_else(|| Error::MissingToken(word.to_string()))?;
        let support: BTreeSet<&String> = p1.weights.keys().chain(p2.weights.keys()).collect();
        let lay_out = |w: &BTreeMap<String, f64>| -> Vec<f64> {
            support.iter().map(|k| w.get(*k).copied().unwrap_or(0.0)).collect()
        };
        pearson(&lay_out(&p1.weights), &lay_out(&p2.weights))
    }
}

/// The `k` nearest words to `word` by cosine, excluding `word` itself and
/// words with undefined cosine. Ties at the cut are resolved lexicographically.
pub fn nearest_neighbours<'a, S: WordSpace + ?Sized>(space: &'a S, word: &str, k: usize) -> Result<Vec<&'a str>> {
    if !space.has_word(word) {
        return Err(Error::MissingToken(word.to_string()));
    }
    let mut scored: Vec<(&str, f64)> = space
        .words()
        .into_iter()
        .filter(|w| *w != word)
        .filter_map(|w| space.cosine_within(word, w).map(|c| (w, c)))
        .collect();
    if scored.len() < k {
        return Err(Error::NotEnoughNeighbours {
            needed: k,
            available: scored.len(),
        });
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.as_bytes().cmp(b.0.as_bytes())));
    Ok(scored.into_iter().take(k).map(|(w, _)| w).collect())
}

/// Second-order similarity: the cosine of `word`'s cosine profiles in each
/// space against the lexicographically ordered union of its `k` nearest
/// neighbours in both. A union member missing from a space contributes 0 there.
pub fn neighbourhood_similarity<S: WordSpace + ?Sized>(e1: &S, e2: &S, word: &str, k: usize) -> Result<f64> {
    let union = neighbour_union(e1, e2, word, k)?;
    let (u1, u2) = (second_order(e1, word, &union), second_order(e2, word, &union));
    cosine_from_parts(dot(&u1, &u2), squared_norm(&u1), squared_norm(&u2)).ok_or(Error::UndefinedCosine)
}

/// The sorted union of both neighbour sets.
pub fn neighbour_union<S: WordSpace + ?Sized>(e1: &S, e2: &S, word: &str, k: usize) -> Result<Vec<String>> {
    let n1 = nearest_neighbours(e1, word, k)?;
    let n2 = nearest_neighbours(e2, word, k)?;
    let union: BTreeSet<&str> = n1.into_iter().chain(n2).collect();
    Ok(union.into_iter().map(str::to_string).collect())
}

fn second_order<S: WordSpace + ?Sized>(space: &S, word: &str, union: &[String]) -> Vec<f64> {
    union
        .iter()
        .map(|n| space.cosine_within(word, n).unwrap_or(0.0))
        .collect()
}

/// The similarity set 𝒮 of a target list, with skipped targets and why.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimilaritySet {
    pub measure: Option<Measure>,
    pub backend: String,
    pub params: Vec<(String, String)>,
    pub scores: BTreeMap<String, f64>,
    pub skipped: Vec<(String, String)>,
}

impl SimilaritySet {
    /// A bare set of scores, mostly for tests and threshold experiments.
    pub fn from_scores<I, S>(scores: I) -> Self
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        SimilaritySet {
            scores: scores.into_iter().map(|(k, v)| (k.into(), v)).collect(),
            ..SimilaritySet::default()
        }
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Scores in target order.
    pub fn values(&self) -> Vec<f64> {
        self.scores.values().copied().collect()
    }
}

/// Scores every target with `measure`. Targets whose score cannot be computed
/// (missing from a space, zero vector, constant vector) are listed in
/// `skipped` with the reason.
pub fn target_similarities<S: TemporalSpace>(
    e1: &S,
    e2: &S,
    targets: &BTreeSet<String>,
    measure: Measure,
    k: usize,
) -> Result<SimilaritySet> {
    if targets.is_empty() {
        return Err(Error::NoTargets);
    }
    let mut set = SimilaritySet {
        measure: Some(measure),
        ..SimilaritySet::default()
    };
    if measure == Measure::Neighbourhood {
        set.params.push(("k".to_string(), k.to_string()));
    }
    for t in targets {
        let score = match measure {
            Measure::Cosine => e1.cross_cosine(e2, t),
            Measure::Pearson => e1.cross_pearson(e2, t),
            Measure::Neighbourhood => neighbourhood_similarity(e1, e2, t, k),
        };
        match score {
            Ok(s) => {
                set.scores.insert(t.clone(), s);
            }
            Err(e) => set.skipped.push((t.clone(), e.to_string())),
        }
    }
    if set.scores.is_empty() {
        return Err(Error::AllTargetsSkipped);
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn space(period: &str, rows: &[(&str, &[f64])]) -> EmbeddingSpace {
        let mut s = EmbeddingSpace::new(rows[0].1.len(), period);
        for (t, v) in rows {
            s.insert(*t, v).unwrap();
        }
        s
    }

    fn targets(ws: &[&str]) -> BTreeSet<String> {
        ws.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine(&[1.0, 2.0], &[2.0, 1.0]).unwrap() - 0.8).abs() < 1e-15);
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 1.0]), Err(Error::UndefinedCosine));
        assert!(matches!(
            cosine(&[1.0], &[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn pearson_examples() {
        let u = [1.0, 4.0, 2.0, 8.0];
        assert!((pearson(&u, &u).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = u.iter().map(|x| -x).collect();
        assert!((pearson(&u, &neg).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(pearson(&[3.0, 3.0, 3.0], &u[..3]), Err(Error::UndefinedCorrelation));
        assert_eq!(pearson(&[1.0], &[2.0]), Err(Error::UndefinedCorrelation));
        let centred = [1.0, -2.0, 0.5, 0.5];
        let other = [-1.0, 1.0, 3.0, -3.0];
        assert!((pearson(&centred, &other).unwrap() - cosine(&centred, &other).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn measure_codes_round_trip() {
        for m in Measure::ALL {
            assert_eq!(m.code().parse::<Measure>().unwrap(), m);
        }
        assert!("XX".parse::<Measure>().is_err());
    }

    fn six_words() -> (EmbeddingSpace, EmbeddingSpace) {
        let e1 = space(
            "t1",
            &[
                ("w", &[1.0, 0.0, 0.0]),
                ("a", &[0.9, 0.1, 0.0]),
                ("b", &[0.8, 0.0, 0.3]),
                ("c", &[0.0, 1.0, 0.0]),
                ("d", &[0.1, 0.9, 0.2]),
                ("e", &[0.0, 0.0, 1.0]),
            ],
        );
        let e2 = space(
            "t2",
            &[
                ("w", &[0.0, 1.0, 0.1]),
                ("a", &[0.9, 0.1, 0.0]),
                ("b", &[0.8, 0.0, 0.3]),
                ("c", &[0.0, 1.0, 0.0]),
                ("d", &[0.1, 0.9, 0.2]),
                ("e", &[0.0, 0.0, 1.0]),
            ],
        );
        (e1, e2)
    }

    #[test]
    fn neighbourhood_hand_computed() {
        let (e1, e2) = six_words();
        // t1: w is closest to a then b; t2: w is closest to c then d
        assert_eq!(nearest_neighbours(&e1, "w", 2).unwrap(), ["a", "b"]);
        assert_eq!(nearest_neighbours(&e2, "w", 2).unwrap(), ["c", "d"]);
        assert_eq!(neighbour_union(&e1, &e2, "w", 2).unwrap(), ["a", "b", "c", "d"]);

        let cos_to = |s: &EmbeddingSpace, n: &str| cosine(s.get("w").unwrap(), s.get(n).unwrap()).unwrap();
        let u1: Vec<f64> = ["a", "b", "c", "d"].iter().map(|n| cos_to(&e1, n)).collect();
        let u2: Vec<f64> = ["a", "b", "c", "d"].iter().map(|n| cos_to(&e2, n)).collect();
        let expected = cosine(&u1, &u2).unwrap();
        let ns = neighbourhood_similarity(&e1, &e2, "w", 2).unwrap();
        assert!((ns - expected).abs() < 1e-12);
        assert!(ns < 0.5);
        assert_eq!(neighbourhood_similarity(&e1, &e1, "w", 2).unwrap(), 1.0);
    }

    #[test]
    fn neighbour_ties_cut_lexicographically() {
        let e = space(
            "t1",
            &[
                ("w", &[1.0, 0.0]),
                ("z", &[1.0, 1.0]),
                ("y", &[1.0, 1.0]),
                ("x", &[1.0, 1.0]),
                ("far", &[0.0, 1.0]),
            ],
        );
        assert_eq!(nearest_neighbours(&e, "w", 2).unwrap(), ["x", "y"]);
    }

    #[test]
    fn neighbourhood_errors() {
        let (e1, e2) = six_words();
        assert!(matches!(
            neighbourhood_similarity(&e1, &e2, "w", 6),
            Err(Error::NotEnoughNeighbours {
                needed: 6,
                available: 5
            })
        ));
        assert!(matches!(
            neighbourhood_similarity(&e1, &e2, "nope", 2),
            Err(Error::MissingToken(_))
        ));
    }

    #[test]
    fn neighbour_missing_from_other_space_counts_zero() {
        let (e1, mut e2) = six_words();
        let mut trimmed = EmbeddingSpace::new(3, "t2");
        for (t, v) in e2.iter() {
            if t != "a" {
                trimmed.insert(t, v).unwrap();
            }
        }
        e2 = trimmed;
        let union = neighbour_union(&e1, &e2, "w", 2).unwrap();
        assert!(union.contains(&"a".to_string()));
        let u1: Vec<f64> = union.iter().map(|n| e1.cosine_within("w", n).unwrap()).collect();
        let u2: Vec<f64> = union.iter().map(|n| e2.cosine_within("w", n).unwrap_or(0.0)).collect();
        assert_eq!(u2[0], 0.0);
        let ns = neighbourhood_similarity(&e1, &e2, "w", 2).unwrap();
        assert!((ns - cosine(&u1, &u2).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn target_similarities_reports_skips() {
        let (e1, e2) = six_words();
        let s = target_similarities(&e1, &e1, &targets(&["w"]), Measure::Cosine, 2).unwrap();
        assert_eq!(s.scores["w"], 1.0);

        let mut e2b = EmbeddingSpace::new(3, "t2");
        for (t, v) in e2.iter() {
            if t != "c" {
                e2b.insert(t, v).unwrap();
            }
        }
        let s = target_similarities(&e1, &e2b, &targets(&["w", "a", "c"]), Measure::Cosine, 2).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.skipped.len(), 1);
        assert_eq!(s.skipped[0].0, "c");
        assert!(s.skipped[0].1.contains("missing"));

        assert_eq!(
            target_similarities(&e1, &e2, &targets(&["nope"]), Measure::Cosine, 2),
            Err(Error::AllTargetsSkipped)
        );
        assert_eq!(
            target_similarities(&e1, &e2, &BTreeSet::new(), Measure::Cosine, 2),
            Err(Error::NoTargets)
        );
    }

    #[test]
    fn pearson_scores_equal_centred_cosine() {
        let (e1, e2) = six_words();
        let all = targets(&["w", "a", "b", "d"]);
        let s = target_similarities(&e1, &e2, &all, Measure::Pearson, 2).unwrap();
        for t in &all {
            let centre = |v: &[f64]| {
                let m = v.iter().sum::<f64>() / v.len() as f64;
                v.iter().map(|x| x - m).collect::<Vec<_>>()
            };
            let a = centre(e1.get(t).unwrap());
            let b = centre(e2.get(t).unwrap());
            let expected = a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>()
                / (a.iter().map(|x| x * x).sum::<f64>().sqrt() * b.iter().map(|x| x * x).sum::<f64>().sqrt());
            assert!((s.scores[t] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn profile_spaces_support_all_measures() {
        use crate::collocation::CollocationProfile;
        let prof = |w: &str, p: &str, kv: &[(&str, f64)]| CollocationProfile {
            word: w.into(),
            period_id: p.into(),
            weights: kv.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        };
        let mk = |p: &str, w_prof: &[(&str, f64)]| ProfileSpace {
            period_id: p.into(),
            profiles: [
                ("w".to_string(), prof("w", p, w_prof)),
                ("x".to_string(), prof("x", p, &[("a", 0.5), ("b", 0.1)])),
                ("y".to_string(), prof("y", p, &[("c", 0.4)])),
                ("z".to_string(), prof("z", p, &[("a", 0.1), ("c", 0.3)])),
            ]
            .into_iter()
            .collect(),
        };
        let p1 = mk("t1", &[("a", 0.5), ("b", 0.2)]);
        let p2 = mk("t2", &[("a", 0.1), ("c", 0.6)]);
        let t = targets(&["w"]);
        let cs = target_similarities(&p1, &p2, &t, Measure::Cosine, 2).unwrap();
        assert!((cs.scores["w"] - profile_similarity(p1.get("w").unwrap(), p2.get("w").unwrap())).abs() < 1e-15);
        let pc = target_similarities(&p1, &p2, &t, Measure::Pearson, 2).unwrap();
        let expected = pearson(&[0.5, 0.2, 0.0], &[0.1, 0.0, 0.6]).unwrap();
        assert!((pc.scores["w"] - expected).abs() < 1e-15);
        let ns = target_similarities(&p1, &p2, &t, Measure::Neighbourhood, 2).unwrap();
        assert!(ns.scores["w"].abs() <= 1.0);
        assert_eq!(ns.params, vec![("k".to_string(), "2".to_string())]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn vecs(n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
            (
                prop::collection::vec(-10.0f64..10.0, n),
                prop::collection::vec(-10.0f64..10.0, n),
            )
        }

        proptest! {
            #[test]
            fn cosine_bounded_symmetric_scale_invariant((u, v) in vecs(6), c in 0.01f64..100.0) {
                if let Ok(s) = cosine(&u, &v) {
                    prop_assert!((-1.0..=1.0).contains(&s));
                    prop_assert_eq!(s, cosine(&v, &u).unwrap());
                    let scaled: Vec<f64> = u.iter().map(|x| x * c).collect();
                    prop_assert!((cosine(&scaled, &v).unwrap() - s).abs() < 1e-12);
                }
            }

            #[test]
            fn ns_is_symmetric_and_bounded(seed in 0u64..1000) {
                use rand::{Rng, SeedableRng};
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                let words = ["a", "b", "c", "d", "e", "f", "g", "h"];
                let mut mk = || {
                    let mut s = EmbeddingSpace::new(4, "t");
                    for w in words {
                        let v: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
                        s.insert(w, &v).unwrap();
                    }
                    s
                };
                let (e1, e2) = (mk(), mk());
                for w in words {
                    let a = neighbourhood_similarity(&e1, &e2, w, 3).unwrap();
                    let b = neighbourhood_similarity(&e2, &e1, w, 3).unwrap();
                    prop_assert!((-1.0..=1.0).contains(&a));
                    prop_assert_eq!(a, b);
                    // uniform positive scaling of a whole space
                    let mut scaled = EmbeddingSpace::new(4, "t");
                    for (t, v) in e2.iter() {
                        scaled.insert(t, &v.iter().map(|x| 3.5 * x).collect::<Vec<_>>()).unwrap();
                    }
                    prop_assert!((neighbourhood_similarity(&e1, &scaled, w, 3).unwrap() - a).abs() < 1e-12);
                }
            }
        }
    }
}
