//! From a similarity set to binary change labels and a graded ranking.
//!
//! Binary labels come from a two-component 1-D Gaussian mixture fitted by EM
//! (low-similarity component = changed) or from mean/σ threshold baselines.
//! The ranking orders targets by the distance `1 - |sim|`.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use core::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::math::{mean, std_dev};
use crate::similarity::SimilaritySet;
use crate::{Error, Result};

pub const VARIANCE_FLOOR: f64 = 1e-6;
const MIN_POINTS: usize = 4;

/// Starting point of each EM run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitPolicy {
    /// Means at the 25th/75th percentiles, equal weights, the pooled data
    /// variance. Restarts after the first jitter both means uniformly by up
    /// to `jitter` standard deviations of the data.
    Quartiles { seed: u64, jitter: f64 },
    /// Fixed starting means; a single run, `restarts` is ignored.
    Means([f64; 2]),
}

impl Default for InitPolicy {
    fn default() -> Self {
        InitPolicy::Quartiles { seed: 0, jitter: 0.25 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmmOptions {
    pub init: InitPolicy,
    /// Stop once an iteration improves the log-likelihood by less than this.
    pub tol: f64,
    pub max_iter: usize,
    pub restarts: usize,
    pub variance_floor: f64,
}

impl Default for GmmOptions {
    fn default() -> Self {
        GmmOptions {
            init: InitPolicy::default(),
            tol: 1e-9,
            max_iter: 1000,
            restarts: 5,
            variance_floor: VARIANCE_FLOOR,
        }
    }
}

/// A fitted two-component mixture. Component order is whatever EM produced;
/// [`GmmModel::stable_component`] applies the labelling rule.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmModel {
    pub weights: [f64; 2],
    pub means: [f64; 2],
    pub variances: [f64; 2],
    /// Posterior of each component for each input point, in input order.
    pub responsibilities: Vec<[f64; 2]>,
    pub log_likelihood: f64,
    /// Log-likelihood at the start and after every EM iteration of the
    /// selected run.
    pub history: Vec<f64>,
    pub converged: bool,
}

impl GmmModel {
    /// Builds a model from parameters without fitting (responsibilities and
    /// history empty, log-likelihood NaN until [`log_likelihood`] is used).
    pub fn from_parameters(weights: [f64; 2], means: [f64; 2], variances: [f64; 2]) -> Self {
        GmmModel {
            weights,
            means,
            variances,
            responsibilities: Vec::new(),
            log_likelihood: f64::NAN,
            history: Vec::new(),
            converged: false,
        }
    }

    /// Mixture density at `x`.
    pub fn density(&self, x: f64) -> f64 {
        (0..2)
            .map(|m| self.weights[m] * normal_pdf(x, self.means[m], self.variances[m]))
            .sum()
    }

    /// Index of the component labelled stable (0): the higher-mean one. With
    /// component 0 initially "stable", labels are inverted when μ0 < μ1.
    pub fn stable_component(&self) -> usize {
        if self.means[0] < self.means[1] {
            1
        } else {
            0
        }
    }
}

fn normal_pdf(x: f64, mean: f64, variance: f64) -> f64 {
    libm::exp(-(x - mean) * (x - mean) / (2.0 * variance)) / libm::sqrt(2.0 * PI * variance)
}

fn log_normal_pdf(x: f64, mean: f64, variance: f64) -> f64 {
    -0.5 * libm::log(2.0 * PI * variance) - (x - mean) * (x - mean) / (2.0 * variance)
}

fn log_sum_exp2(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + libm::log(libm::exp(a - m) + libm::exp(b - m))
}

/// `Σ_s log Σ_m π_m φ(s | μ_m, σ²_m)`.
pub fn log_likelihood(model: &GmmModel, values: &[f64]) -> f64 {
    values.iter().map(|&x| log_mixture(model, x)).sum()
}

fn log_mixture(model: &GmmModel, x: f64) -> f64 {
    let lp = |m: usize| libm::log(model.weights[m]) + log_normal_pdf(x, model.means[m], model.variances[m]);
    log_sum_exp2(lp(0), lp(1))
}

struct Params {
    weights: [f64; 2],
    means: [f64; 2],
    variances: [f64; 2],
}

fn e_step(p: &Params, values: &[f64], resp: &mut Vec<[f64; 2]>) -> f64 {
    resp.clear();
    let mut ll = 0.0;
    for &x in values {
        let lp = [0, 1].map(|m| libm::log(p.weights[m]) + log_normal_pdf(x, p.means[m], p.variances[m]));
        let total = log_sum_exp2(lp[0], lp[1]);
        ll += total;
        resp.push(lp.map(|l| libm::exp(l - total)));
    }
    ll
}

fn m_step(p: &mut Params, values: &[f64], resp: &[[f64; 2]], floor: f64) {
    let n = values.len() as f64;
    for m in 0..2 {
        let nk: f64 = resp.iter().map(|r| r[m]).sum();
        if nk <= 0.0 {
            // empty component: it keeps its shape but carries no mass
            p.weights[m] = 0.0;
            continue;
        }
        let mu = resp.iter().zip(values).map(|(r, x)| r[m] * x).sum::<f64>() / nk;
        let var = resp
            .iter()
            .zip(values)
            .map(|(r, x)| r[m] * (x - mu) * (x - mu))
            .sum::<f64>()
            / nk;
        p.weights[m] = nk / n;
        p.means[m] = mu;
        p.variances[m] = var.max(floor);
    }
}

fn run_em(values: &[f64], init: Params, opts: &GmmOptions) -> GmmModel {
    let mut p = init;
    let mut resp = Vec::with_capacity(values.len());
    let mut ll = e_step(&p, values, &mut resp);
    let mut history = alloc::vec![ll];
    let mut converged = false;
    for _ in 0..opts.max_iter {
        m_step(&mut p, values, &resp, opts.variance_floor);
        let next = e_step(&p, values, &mut resp);
        history.push(next);
        let gain = next - ll;
        ll = next;
        if gain < opts.tol {
            converged = true;
            break;
        }
    }
    GmmModel {
        weights: p.weights,
        means: p.means,
        variances: p.variances,
        responsibilities: resp,
        log_likelihood: ll,
        history,
        converged,
    }
}

/// Linear-interpolation percentile of sorted data, `q` in [0, 1].
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = libm::ceil(pos) as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Fits a two-component 1-D Gaussian mixture by EM, keeping the best of
/// `opts.restarts` runs by final log-likelihood.
pub fn fit_gmm_1d(values: &[f64], opts: &GmmOptions) -> Result<GmmModel> {
    if values.len() < MIN_POINTS {
        return Err(Error::InsufficientTargets {
            needed: MIN_POINTS,
            actual: values.len(),
        });
    }
    if values.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("similarity scores must be finite".into()));
    }
    if values.iter().all(|&x| x == values[0]) {
        return Err(Error::DegenerateSimilaritySet);
    }
    let pooled = {
        let s = std_dev(values);
        (s * s).max(opts.variance_floor)
    };
    let starts: Vec<[f64; 2]> = match opts.init {
        InitPolicy::Means(means) => alloc::vec![means],
        InitPolicy::Quartiles { seed, jitter } => {
            let mut sorted = values.to_vec();
            sorted.sort_by(f64::total_cmp);
            let (mut lo, mut hi) = (percentile(&sorted, 0.25), percentile(&sorted, 0.75));
            if lo == hi {
                lo = sorted[0];
                hi = sorted[sorted.len() - 1];
            }
            let sd = libm::sqrt(pooled);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..opts.restarts.max(1))
                .map(|r| {
                    if r == 0 || jitter <= 0.0 {
                        [lo, hi]
                    } else {
                        [
                            lo + rng.random_range(-jitter..jitter) * sd,
                            hi + rng.random_range(-jitter..jitter) * sd,
                        ]
                    }
                })
                .collect()
        }
    };
    let mut best: Option<GmmModel> = None;
    for means in starts {
        let init = Params {
            weights: [0.5, 0.5],
            means,
            variances: [pooled, pooled],
        };
        let model = run_em(values, init, opts);
        if best.as_ref().is_none_or(|b| model.log_likelihood > b.log_likelihood) {
            best = Some(model);
        }
    }
    Ok(best.expect("at least one EM run"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Strategy {
    Gmm,
    Mean,
    MeanMinusSigma,
    MeanPlusSigma,
    Winsorizing,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Gmm,
        Strategy::Mean,
        Strategy::MeanMinusSigma,
        Strategy::MeanPlusSigma,
        Strategy::Winsorizing,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Strategy::Gmm => "gmm",
            Strategy::Mean => "mean",
            Strategy::MeanMinusSigma => "mean-sigma",
            Strategy::MeanPlusSigma => "mean+sigma",
            Strategy::Winsorizing => "winsorizing",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.code() == s)
            .ok_or_else(|| Error::InvalidParameter(alloc::format!("unknown detection strategy `{s}`")))
    }
}

/// 0 = stable, 1 = changed, per target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSet {
    pub strategy: Strategy,
    pub labels: BTreeMap<String, u8>,
}

impl LabelSet {
    pub fn changed(&self) -> impl Iterator<Item = &str> {
        self.labels.iter().filter(|(_, l)| **l == 1).map(|(t, _)| t.as_str())
    }
}

/// Gaussian-mixture labelling: each target takes the label of its
/// most responsible component, with the lower-mean component meaning
/// "changed". Equal responsibilities give 0.
pub fn assign_labels(set: &SimilaritySet, opts: &GmmOptions) -> Result<(LabelSet, GmmModel)> {
    let values = set.values();
    let model = fit_gmm_1d(&values, opts)?;
    let stable = model.stable_component();
    let changing = 1 - stable;
    let labels = set
        .scores
        .keys()
        .zip(&model.responsibilities)
        .map(|(t, r)| (t.clone(), u8::from(r[changing] > r[stable])))
        .collect();
    Ok((
        LabelSet {
            strategy: Strategy::Gmm,
            labels,
        },
        model,
    ))
}

fn require_two(set: &SimilaritySet) -> Result<()> {
    if set.len() < 2 {
        return Err(Error::InsufficientTargets {
            needed: 2,
            actual: set.len(),
        });
    }
    Ok(())
}

fn below(set: &SimilaritySet, threshold: f64, strategy: Strategy) -> LabelSet {
    LabelSet {
        strategy,
        labels: set
            .scores
            .iter()
            .map(|(t, &s)| (t.clone(), u8::from(s < threshold)))
            .collect(),
    }
}

/// The cut-off used by a threshold strategy: μ, μ−σ or μ+σ with σ the
/// population standard deviation.
pub fn threshold(set: &SimilaritySet, strategy: Strategy) -> Result<f64> {
    require_two(set)?;
    let values = set.values();
    let (mu, sigma) = (mean(&values), std_dev(&values));
    match strategy {
        Strategy::Mean => Ok(mu),
        Strategy::MeanMinusSigma => Ok(mu - sigma),
        Strategy::MeanPlusSigma => Ok(mu + sigma),
        Strategy::Winsorizing => winsorized_mean(&values),
        Strategy::Gmm => Err(Error::InvalidParameter(
            "the GMM strategy has no fixed threshold".into(),
        )),
    }
}

/// Label 1 for every score strictly below the strategy's threshold.
pub fn threshold_labels(set: &SimilaritySet, strategy: Strategy) -> Result<LabelSet> {
    let t = threshold(set, strategy)?;
    Ok(below(set, t, strategy))
}

/// Scores clamped into [μ−σ, μ+σ].
pub fn winsorize(values: &[f64]) -> Vec<f64> {
    let (mu, sigma) = (mean(values), std_dev(values));
    values.iter().map(|x| x.clamp(mu - sigma, mu + sigma)).collect()
}

fn winsorized_mean(values: &[f64]) -> Result<f64> {
    Ok(mean(&winsorize(values)))
}

/// Clamps scores into [μ−σ, μ+σ], recomputes the mean of the clamped scores
/// and labels original scores below it as changed.
pub fn winsorize_labels(set: &SimilaritySet) -> Result<LabelSet> {
    threshold_labels(set, Strategy::Winsorizing)
}

/// Labels with any strategy; the mixture model is returned for [`Strategy::Gmm`].
pub fn label(set: &SimilaritySet, strategy: Strategy, opts: &GmmOptions) -> Result<(LabelSet, Option<GmmModel>)> {
    match strategy {
        Strategy::Gmm => assign_labels(set, opts).map(|(l, m)| (l, Some(m))),
        other => threshold_labels(set, other).map(|l| (l, None)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    pub index: usize,
    pub log_likelihood: f64,
    /// Set when the winner was picked among models fitted to different
    /// similarity sets, where likelihoods are not strictly comparable.
    pub cross_set_comparison: bool,
}

/// Picks the candidate whose mixture has the highest log-likelihood (first
/// one on ties).
pub fn select_model(candidates: &[(SimilaritySet, GmmModel)]) -> Result<Selection> {
    let (index, best) = candidates
        .iter()
        .enumerate()
        .fold(None, |acc: Option<(usize, &GmmModel)>, (i, (_, m))| match acc {
            Some((_, b)) if b.log_likelihood >= m.log_likelihood => acc,
            _ => Some((i, m)),
        })
        .ok_or(Error::NoCandidates)?;
    let first = &candidates[0].0;
    Ok(Selection {
        index,
        log_likelihood: best.log_likelihood,
        cross_set_comparison: candidates.iter().any(|(s, _)| s != first),
    })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RankedList {
    /// (target, 1 - |sim|), most changed first.
    pub entries: Vec<(String, f64)>,
}

pub fn rank_targets(set: &SimilaritySet) -> RankedList {
    let mut entries: Vec<(String, f64)> = set
        .scores
        .iter()
        .map(|(t, s)| (t.clone(), 1.0 - libm::fabs(*s)))
        .collect();
    entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.as_bytes().cmp(b.0.as_bytes())));
    RankedList { entries }
}
