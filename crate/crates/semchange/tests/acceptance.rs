//! Acceptance suite: one pass/fail line per criterion, nonzero exit if any
//! criterion fails. Every expected value comes from an oracle written here,
//! independent of the library code under test.
//!
//! Run with `cargo test -p semchange --test acceptance`.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use regex::Regex;

use semchange::core::corpus::{build_vocabulary, token_counts, CorpusBin, TimeBinnedCorpus, VocabPolicy};
use semchange::core::detect::{
    assign_labels, fit_gmm_1d, threshold_labels, GmmOptions, LabelSet, RankedList, Strategy,
};
use semchange::core::embedding::EmbeddingSpace;
use semchange::core::eval::{accuracy, generate_synthetic, spearman, GoldStandard, SynthSpec};
use semchange::core::similarity::{cosine, neighbourhood_similarity, pearson, SimilaritySet};
use semchange::core::tr::{reference_targets, sgns_gradients, sgns_loss, tagged_name, train_sgns, SgnsParams};
use semchange::core::tri::{train_tri_periods, TriOptions, TriParams};
use semchange::evaluate::{evaluate, Task};
use semchange::pipeline::run_pipeline;
use semchange::synth::write_synthetic;

type Outcome = Result<String, String>;
type Criterion = (&'static str, Box<dyn Fn() -> Outcome>);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($msg)+));
        }
    };
}

// ---- independent oracles ----

fn o_dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn o_cosine(a: &[f64], b: &[f64]) -> f64 {
    o_dot(a, b) / (o_dot(a, a).sqrt() * o_dot(b, b).sqrt())
}

fn o_mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn o_pearson(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (o_mean(x), o_mean(y));
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

/// Rank of each value: 1 + #smaller + (#equal - 1) / 2.
fn o_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|x| {
            let less = v.iter().filter(|y| *y < x).count() as f64;
            let equal = v.iter().filter(|y| *y == x).count() as f64;
            1.0 + less + (equal - 1.0) / 2.0
        })
        .collect()
}

fn o_spearman(x: &[f64], y: &[f64]) -> f64 {
    o_pearson(&o_ranks(x), &o_ranks(y))
}

fn random_set(rng: &mut ChaCha8Rng, n: usize) -> SimilaritySet {
    let modes = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
    let sd = rng.random_range(0.01..0.3);
    SimilaritySet::from_scores((0..n).map(|i| {
        let m = modes[rng.random_range(0..2)];
        let v: f64 = Normal::new(m, sd).unwrap().sample(rng);
        (format!("w{i:04}"), v.clamp(-1.0, 1.0))
    }))
}

fn changed(l: &LabelSet) -> BTreeSet<String> {
    l.changed().map(str::to_string).collect()
}

// ---- criteria ----

fn gmm_recovery() -> Outcome {
    let mut slowest = Duration::ZERO;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = (Normal::new(0.3, 0.05).unwrap(), Normal::new(0.8, 0.05).unwrap());
        let data: Vec<f64> = (0..200)
            .map(|_| {
                if rng.random_bool(0.5) {
                    a.sample(&mut rng)
                } else {
                    b.sample(&mut rng)
                }
            })
            .collect();
        let start = Instant::now();
        let m = fit_gmm_1d(&data, &GmmOptions::default()).map_err(|e| e.to_string())?;
        slowest = slowest.max(start.elapsed());
        let mut means = m.means;
        means.sort_by(f64::total_cmp);
        ensure!(
            (means[0] - 0.3).abs() <= 0.03 && (means[1] - 0.8).abs() <= 0.03,
            "seed {seed}: means {means:?}"
        );
    }
    ensure!(slowest < Duration::from_secs(1), "slowest fit {slowest:?}");
    Ok(format!("50/50 seeds within 0.03, slowest fit {slowest:?}"))
}

fn em_monotonicity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut iterations = 0;
    for d in 0..100 {
        let n = rng.random_range(20..=500);
        let data: Vec<f64> = match d % 3 {
            0 => (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            1 => random_set(&mut rng, n).values(),
            _ => {
                let nrm = Normal::new(rng.random_range(-5.0..5.0), rng.random_range(0.1..3.0)).unwrap();
                (0..n).map(|_| nrm.sample(&mut rng)).collect()
            }
        };
        let m = fit_gmm_1d(&data, &GmmOptions::default()).map_err(|e| e.to_string())?;
        for (i, w) in m.history.windows(2).enumerate() {
            ensure!(w[1] >= w[0] - 1e-10, "dataset {d} iteration {i}: {} -> {}", w[0], w[1]);
        }
        iterations += m.history.len();
    }
    Ok(format!(
        "100 datasets, {iterations} iterations, no decrease beyond 1e-10"
    ))
}

fn flip_rule() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut both = 0;
    for s in 0..1000 {
        let n = rng.random_range(8..200);
        let set = random_set(&mut rng, n);
        let (labels, _) = assign_labels(&set, &GmmOptions::default()).map_err(|e| e.to_string())?;
        let class_mean = |c: u8| {
            let v: Vec<f64> = labels
                .labels
                .iter()
                .filter(|(_, l)| **l == c)
                .map(|(t, _)| set.scores[t])
                .collect();
            (!v.is_empty()).then(|| o_mean(&v))
        };
        if let (Some(m1), Some(m0)) = (class_mean(1), class_mean(0)) {
            both += 1;
            ensure!(m1 < m0, "set {s}: changed mean {m1} >= stable mean {m0}");
        }
    }
    Ok(format!(
        "1000 sets, {both} with both classes, all changed means below stable means"
    ))
}

fn pearson_is_centred_cosine() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let d = rng.random_range(2..300);
        let u: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let centre = |x: &[f64]| {
            let m = o_mean(x);
            x.iter().map(|a| a - m).collect::<Vec<_>>()
        };
        let expected = o_cosine(&centre(&u), &centre(&v));
        let got = pearson(&u, &v).map_err(|e| e.to_string())?;
        worst = worst.max((got - expected).abs());
    }
    ensure!(worst <= 1e-12, "max deviation {worst:e}");
    Ok(format!("1000 pairs, max deviation {worst:e}"))
}

fn o_neighbours(space: &BTreeMap<String, Vec<f64>>, w: &str, k: usize) -> Vec<String> {
    let v = &space[w];
    let mut all: Vec<(String, f64)> = space
        .iter()
        .filter(|(u, _)| u.as_str() != w)
        .map(|(u, x)| (u.clone(), o_cosine(v, x)))
        .collect();
    all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    all.into_iter().take(k).map(|(u, _)| u).collect()
}

fn o_ns(e1: &BTreeMap<String, Vec<f64>>, e2: &BTreeMap<String, Vec<f64>>, w: &str, k: usize) -> f64 {
    let mut union: Vec<String> = o_neighbours(e1, w, k);
    union.extend(o_neighbours(e2, w, k));
    union.sort();
    union.dedup();
    let second = |e: &BTreeMap<String, Vec<f64>>| -> Vec<f64> {
        union
            .iter()
            .map(|u| e.get(u).map_or(0.0, |x| o_cosine(&e[w], x)))
            .collect()
    };
    o_cosine(&second(e1), &second(e2))
}

fn to_space(rows: &BTreeMap<String, Vec<f64>>, dim: usize) -> EmbeddingSpace {
    let mut s = EmbeddingSpace::new(dim, "t");
    for (w, v) in rows {
        s.insert(w.clone(), v).unwrap();
    }
    s
}

fn ns_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst, mut checked) = (0.0f64, 0);
    for trial in 0..200 {
        let n = rng.random_range(8..=50);
        let d = rng.random_range(2..=10);
        let k = rng.random_range(1..=5);
        let gen = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..d).map(|_| rng.random_range(-1.0..1.0)).collect() };
        let words: Vec<String> = (0..n).map(|i| format!("w{i:02}")).collect();
        let e1: BTreeMap<String, Vec<f64>> = words.iter().map(|w| (w.clone(), gen(&mut rng))).collect();
        // the second space lacks a few words, so some union members are missing there
        let mut e2 = BTreeMap::new();
        for w in &words {
            if rng.random_bool(0.9) {
                e2.insert(w.clone(), gen(&mut rng));
            }
        }
        let (s1, s2) = (to_space(&e1, d), to_space(&e2, d));
        for w in e2.keys() {
            if e2.len() <= k {
                break;
            }
            let got = neighbourhood_similarity(&s1, &s2, w, k).map_err(|e| e.to_string())?;
            let expected = o_ns(&e1, &e2, w, k);
            ensure!(
                (got - expected).abs() <= 1e-12,
                "trial {trial} word {w}: {got} vs {expected}"
            );
            worst = worst.max((got - expected).abs());
            let same = neighbourhood_similarity(&s1, &s1, w, k).map_err(|e| e.to_string())?;
            ensure!((same - 1.0).abs() <= 1e-12, "trial {trial}: NS(E,E,{w}) = {same}");
            checked += 1;
        }
    }
    Ok(format!(
        "{checked} words over 200 space pairs, max deviation {worst:e}, NS(E,E,w)=1"
    ))
}

fn tri_alignment() -> Outcome {
    let spec = SynthSpec::uniform(300, 20, 5, 3000, 0.9, 6);
    let (corpus, _) = generate_synthetic(&spec).map_err(|e| e.to_string())?;
    let text = &corpus.bins[0];
    let twin = TimeBinnedCorpus::new(vec![
        CorpusBin {
            period_id: "t1".into(),
            sentences: text.sentences.clone(),
        },
        CorpusBin {
            period_id: "t2".into(),
            sentences: text.sentences.clone(),
        },
    ]);
    let vocab = build_vocabulary(&twin, VocabPolicy::MinCount(1)).map_err(|e| e.to_string())?;
    let mut words = 0;
    for positive_only in [false, true] {
        let params = TriParams {
            dim: 400,
            options: TriOptions {
                ppmi_weights: false,
                positive_only,
                init_from_previous: false,
            },
            ..TriParams::default()
        };
        let spaces = train_tri_periods(&twin, &vocab, &params).map_err(|e| e.to_string())?;
        for w in vocab.tokens() {
            let (a, b) = (spaces[0].get(w), spaces[1].get(w));
            let (Some(a), Some(b)) = (a, b) else {
                return Err(format!("{w} missing from a period space"));
            };
            let c = cosine(a, b).map_err(|e| e.to_string())?;
            ensure!(c == 1.0, "{w}: cosine {c:?}");
            words += 1;
        }
    }
    Ok(format!("{words} word vectors, every cosine exactly 1"))
}

fn refs(n: &[Vec<f64>]) -> Vec<&[f64]> {
    n.iter().map(Vec::as_slice).collect()
}

fn tr_structure() -> Outcome {
    let toy = TimeBinnedCorpus::new(vec![
        CorpusBin::from_lines("t1", ["a b c d", "b c a", "d d a c b"]),
        CorpusBin::from_lines("t2", ["a c c b", "d a b", "b b c"]),
    ]);
    let mut corpora = vec![(toy, ["a", "c"].iter().map(|s| s.to_string()).collect::<BTreeSet<_>>())];
    for seed in 0..3 {
        let (c, g) = generate_synthetic(&SynthSpec::uniform(120, 10, 4, 600, 0.8, seed)).map_err(|e| e.to_string())?;
        corpora.push((c, g.binary.keys().cloned().collect()));
    }
    for (ci, (corpus, targets)) in corpora.iter().enumerate() {
        let vocab = build_vocabulary(corpus, VocabPolicy::MinCount(1)).map_err(|e| e.to_string())?;
        let referenced = reference_targets(corpus, &vocab, targets).map_err(|e| e.to_string())?;
        let counts = token_counts(corpus);
        for t in targets {
            let tagged: usize = (0..corpus.bins.len())
                .filter_map(|b| referenced.target_id(&tagged_name(t, b)))
                .map(|id| referenced.target_occurrences(id))
                .sum();
            ensure!(
                tagged as u64 == counts[t],
                "corpus {ci}: {t} has {tagged} tagged of {}",
                counts[t]
            );
            ensure!(
                referenced.target_id(t).is_none(),
                "corpus {ci}: plain target {t} trained"
            );
        }
        let params = SgnsParams {
            dim: 10,
            negatives: 3,
            min_count: 1,
            epochs: 1,
            ..SgnsParams::default()
        };
        let model = train_sgns(&referenced, &params).map_err(|e| e.to_string())?;
        let tagged: BTreeSet<String> = targets
            .iter()
            .flat_map(|t| (0..corpus.bins.len()).map(move |b| tagged_name(t, b)))
            .collect();
        for w in model.context_space.tokens() {
            ensure!(
                !tagged.contains(w) && vocab.contains(w),
                "corpus {ci}: context space holds {w}"
            );
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    let h = 1e-5;
    for _ in 0..100 {
        let gen = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..5).map(|_| rng.random_range(-1.0..1.0)).collect() };
        let v = gen(&mut rng);
        let c = gen(&mut rng);
        let negs: Vec<Vec<f64>> = (0..rng.random_range(1..=5)).map(|_| gen(&mut rng)).collect();
        let g = sgns_gradients(&v, &c, &refs(&negs));
        let mut check = |analytic: f64, plus: f64, minus: f64| -> Result<(), String> {
            let numeric = (plus - minus) / (2.0 * h);
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3);
            worst = worst.max(rel);
            ensure!(rel <= 1e-5, "analytic {analytic} numeric {numeric}");
            Ok(())
        };
        for i in 0..5 {
            let shift = |x: &[f64], d: f64| {
                let mut y = x.to_vec();
                y[i] += d;
                y
            };
            check(
                g.target[i],
                sgns_loss(&shift(&v, h), &c, &refs(&negs)),
                sgns_loss(&shift(&v, -h), &c, &refs(&negs)),
            )?;
            check(
                g.positive[i],
                sgns_loss(&v, &shift(&c, h), &refs(&negs)),
                sgns_loss(&v, &shift(&c, -h), &refs(&negs)),
            )?;
            for n in 0..negs.len() {
                let mut up = negs.clone();
                up[n][i] += h;
                let mut down = negs.clone();
                down[n][i] -= h;
                check(
                    g.negatives[n][i],
                    sgns_loss(&v, &c, &refs(&up)),
                    sgns_loss(&v, &c, &refs(&down)),
                )?;
            }
        }
    }
    Ok(format!(
        "{} corpora pure and conserved, 100 gradient triples max relative error {worst:e}",
        corpora.len()
    ))
}

fn threshold_nesting() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for s in 0..1000 {
        let n = rng.random_range(2..200);
        let set = random_set(&mut rng, n);
        let get = |st: Strategy| {
            threshold_labels(&set, st)
                .map(|l| changed(&l))
                .map_err(|e| e.to_string())
        };
        let (lo, mid, hi) = (
            get(Strategy::MeanMinusSigma)?,
            get(Strategy::Mean)?,
            get(Strategy::MeanPlusSigma)?,
        );
        ensure!(lo.is_subset(&mid) && mid.is_subset(&hi), "set {s}: not nested");
    }
    Ok("1000 sets nested".into())
}

fn end_to_end(root: &Path) -> Outcome {
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut failures = Vec::new();
    for seed in 0..5u64 {
        let dir = root.join(format!("seed{seed}"));
        let spec = SynthSpec::uniform(500, 40, 10, 20_000, 0.9, seed);
        let ds = write_synthetic(&dir, "synthetic", &spec).map_err(|e| e.to_string())?;
        run_pipeline(&ds.config).map_err(|e| e.to_string())?;
        let report = evaluate(&ds.config.output_dir, &ds.gold_dir).map_err(|e| e.to_string())?;
        let acc = report.get(Task::Binary, "synthetic").unwrap();
        let rho = report.get(Task::Graded, "synthetic").unwrap();
        lines.push(format!("seed {seed}: accuracy {acc:.3} spearman {rho:.3}"));
        if acc < 0.8 || rho < 0.6 {
            failures.push(seed);
        }
    }
    let elapsed = start.elapsed();
    ensure!(
        failures.is_empty(),
        "seeds {failures:?} below target; {}",
        lines.join("; ")
    );
    ensure!(elapsed < Duration::from_secs(300), "took {elapsed:?}");
    Ok(format!("{} in {:.1?}", lines.join("; "), elapsed))
}

fn metrics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let n = rng.random_range(2..60);
        let levels = rng.random_range(2..8);
        let words: Vec<String> = (0..n).map(|i| format!("t{i}")).collect();
        let pred: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64 / 4.0).collect();
        let gold: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64).collect();
        if o_ranks(&pred).windows(2).all(|w| w[0] == w[1]) || o_ranks(&gold).windows(2).all(|w| w[0] == w[1]) {
            continue;
        }
        let gs = GoldStandard {
            graded: words.iter().cloned().zip(gold.iter().copied()).collect(),
            binary: words.iter().map(|w| (w.clone(), rng.random_range(0..2u8))).collect(),
        };
        let ranked = RankedList {
            entries: words.iter().cloned().zip(pred.iter().copied()).collect(),
        };
        let got = spearman(&ranked, &gs).map_err(|e| e.to_string())?;
        let expected = o_spearman(&pred, &gold);
        worst = worst.max((got - expected).abs());
        ensure!((got - expected).abs() <= 1e-12, "spearman {got} vs {expected}");

        let labels = LabelSet {
            strategy: Strategy::Gmm,
            labels: words
                .iter()
                .map(|w| (w.clone(), *[0u8, 1].choose(&mut rng).unwrap()))
                .collect(),
        };
        let correct = words.iter().filter(|w| labels.labels[*w] == gs.binary[*w]).count();
        let acc = accuracy(&labels, &gs).map_err(|e| e.to_string())?;
        ensure!((acc - correct as f64 / n as f64).abs() <= 1e-12, "accuracy {acc}");
    }
    let example = GoldStandard {
        graded: [("a", 2.0), ("b", 1.0), ("c", 4.0), ("d", 3.0)]
            .map(|(w, g)| (w.to_string(), g))
            .into(),
        ..GoldStandard::default()
    };
    let pred = RankedList {
        entries: [("a", 1.0), ("b", 2.0), ("c", 3.0), ("d", 4.0)]
            .map(|(w, d)| (w.to_string(), d))
            .to_vec(),
    };
    let rho = spearman(&pred, &example).map_err(|e| e.to_string())?;
    ensure!(rho == 0.6, "n=4 example gives {rho:?}");
    Ok(format!(
        "500 tied samples, max deviation {worst:e}; n=4 example = {rho}"
    ))
}

fn format_conformance(root: &Path) -> Outcome {
    let task1 = Regex::new(r"^\S+\t(0|1)$").unwrap();
    let task2 = Regex::new(r"^\S+\t-?\d+(\.\d+)?$").unwrap();
    let mut files = 0;
    for seed in 0..5 {
        let out = root.join(format!("seed{seed}")).join("out");
        for (task, re) in [("task1", &task1), ("task2", &task2)] {
            let path = out.join(task).join("synthetic.txt");
            let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
            for (i, line) in text.lines().enumerate() {
                ensure!(re.is_match(line), "{}:{}: {line:?}", path.display(), i + 1);
            }
            files += 1;
        }
        let self_eval = evaluate(&out, &out).map_err(|e| e.to_string())?;
        for row in &self_eval.rows {
            ensure!(
                row.value == 1.0,
                "seed {seed}: self-evaluation {:?} = {}",
                row.task,
                row.value
            );
        }
    }
    Ok(format!("{files} answer files match the grammar, self-evaluation 1.0"))
}

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().expect("temp dir");
    let root = tmp.path().to_path_buf();
    let criteria: Vec<Criterion> = vec![
        ("1 GMM recovery", Box::new(gmm_recovery)),
        ("2 EM monotonicity", Box::new(em_monotonicity)),
        ("3 flip rule", Box::new(flip_rule)),
        ("4 Pearson = centred cosine", Box::new(pearson_is_centred_cosine)),
        ("5 NS oracle", Box::new(ns_oracle)),
        ("6 TRI implicit alignment", Box::new(tri_alignment)),
        ("7 TR structure and gradients", Box::new(tr_structure)),
        ("8 threshold nesting", Box::new(threshold_nesting)),
        (
            "9 end-to-end synthetic",
            Box::new({
                let root = root.clone();
                move || end_to_end(&root)
            }),
        ),
        ("10 metric correctness", Box::new(metrics)),
        (
            "11 format conformance",
            Box::new({
                let root = root.clone();
                move || format_conformance(&root)
            }),
        ),
    ];
    let mut failed = 0;
    println!("\nrunning {} acceptance criteria", criteria.len());
    for (name, check) in &criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let t = start.elapsed();
        match outcome {
            Ok(detail) => println!("PASS  {name} ({t:.1?}): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name} ({t:.1?}): {detail}");
            }
        }
    }
    println!("\nacceptance: {} passed, {failed} failed\n", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
