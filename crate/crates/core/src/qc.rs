//! Treebank quality control: which sentences a learner can memorize on
//! their own, trimming the rest, and reading the boosting distribution for
//! annotations that conflict with the rest of the corpus.

use std::fmt::Write as _;

use rayon::prelude::*;
use thiserror::Error;

use crate::boosting::{boost, BoostError, BoostOptions, BoostTrace};
use crate::eval::score_pair;
use crate::grammar::{Learner, ParserModel};
use crate::treebank::{Corpus, Entry, ScoringPolicy};

pub const DEFAULT_REPLICATION: usize = 10;
pub const DEFAULT_BINS: usize = 1000;
pub const DEFAULT_TOP_K: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QcError {
    #[error("replication must be at least 1")]
    Replication,
    #[error("bins must be at least 1")]
    Bins,
    #[error("trace has no distributions")]
    EmptyTrace,
    #[error(transparent)]
    Boost(#[from] BoostError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Memorization {
    Memorized,
    NotMemorized,
    /// The learner or parser failed; counts as not memorizable.
    LearnerFailed(String),
}

impl Memorization {
    pub fn passed(&self) -> bool {
        *self == Memorization::Memorized
    }
}

/// Every node except the root counts, preterminals included.
fn memorization_policy(policy: &ScoringPolicy) -> ScoringPolicy {
    ScoringPolicy {
        root_label: policy.root_label.clone(),
        count_preterminals: true,
        punctuation: Default::default(),
    }
}

/// Trains on `replication` copies of each entry and checks that every
/// entry's sentence parses back to its gold tree.
pub fn memorize_jointly<L: Learner>(
    entries: &[Entry],
    learner: &L,
    replication: usize,
    policy: &ScoringPolicy,
) -> Result<Vec<Memorization>, QcError> {
    if replication == 0 {
        return Err(QcError::Replication);
    }
    let train: Corpus = entries
        .iter()
        .flat_map(|e| std::iter::repeat_n(e.clone(), replication))
        .collect();
    let model = match learner.induce(&train, 0) {
        Ok(m) => m,
        Err(e) => return Ok(vec![Memorization::LearnerFailed(e.to_string()); entries.len()]),
    };
    let exact = memorization_policy(policy);
    Ok(entries
        .iter()
        .map(|e| match model.parse(&e.sentence) {
            Err(err) => Memorization::LearnerFailed(err.to_string()),
            Ok(out) => match score_pair(&e.gold, &out.tree, &exact) {
                Ok(c) if c.is_exact() && !out.fallback => Memorization::Memorized,
                Ok(_) => Memorization::NotMemorized,
                Err(err) => Memorization::LearnerFailed(err.to_string()),
            },
        })
        .collect())
}

pub fn memorization_test<L: Learner>(
    entry: &Entry,
    learner: &L,
    replication: usize,
    policy: &ScoringPolicy,
) -> Result<Memorization, QcError> {
    Ok(memorize_jointly(std::slice::from_ref(entry), learner, replication, policy)?.remove(0))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Removal {
    pub index: usize,
    pub reason: Memorization,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrimResult {
    pub memorizable: Vec<bool>,
    pub stable: Corpus,
    pub removed: Vec<Removal>,
}

impl TrimResult {
    /// The removed entries, in corpus order.
    pub fn removed_corpus(&self, corpus: &Corpus) -> Corpus {
        self.removed.iter().map(|r| corpus.entries[r.index].clone()).collect()
    }
}

/// Splits the corpus into entries that pass the memorization test and
/// those that do not.
pub fn trim_corpus<L: Learner>(
    corpus: &Corpus,
    learner: &L,
    replication: usize,
    policy: &ScoringPolicy,
) -> Result<TrimResult, QcError> {
    let results = corpus
        .entries
        .par_iter()
        .map(|e| memorization_test(e, learner, replication, policy))
        .collect::<Result<Vec<_>, _>>()?;
    let mut stable = Corpus::new();
    let mut removed = Vec::new();
    for (index, (e, r)) in corpus.entries.iter().zip(&results).enumerate() {
        if r.passed() {
            stable.push(e.clone());
        } else {
            removed.push(Removal {
                index,
                reason: r.clone(),
            });
        }
    }
    Ok(TrimResult {
        memorizable: results.iter().map(Memorization::passed).collect(),
        stable,
        removed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinRow {
    /// `t` of the distribution D_t.
    pub iteration: usize,
    pub bin: usize,
    pub mean_weight: f64,
}

/// Mean weight per rank bin for every distribution in the trace. Weights
/// are sorted descending and cut into `bins` runs of equal length; the
/// last run takes the remainder.
pub fn weight_rank_curves(trace: &BoostTrace, bins: usize) -> Result<Vec<BinRow>, QcError> {
    if bins == 0 {
        return Err(QcError::Bins);
    }
    let dists = trace.distributions();
    if dists[0].is_empty() {
        return Err(QcError::EmptyTrace);
    }
    let mut rows = Vec::new();
    for (t, d) in dists.iter().enumerate() {
        let mut w = d.weights().to_vec();
        w.sort_by(|a, b| b.total_cmp(a));
        let bins = bins.min(w.len());
        let size = w.len() / bins;
        for bin in 0..bins {
            let end = if bin + 1 == bins { w.len() } else { (bin + 1) * size };
            let chunk = &w[bin * size..end];
            rows.push(BinRow {
                iteration: t + 1,
                bin,
                mean_weight: chunk.iter().sum::<f64>() / chunk.len() as f64,
            });
        }
    }
    Ok(rows)
}

pub fn curves_csv(rows: &[BinRow]) -> String {
    let mut out = String::from("iteration,bin,mean_weight\n");
    for r in rows {
        writeln!(out, "{},{},{:.12e}", r.iteration, r.bin, r.mean_weight).unwrap();
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedEntry {
    pub index: usize,
    pub weight: f64,
    pub gold: String,
}

/// Entries by final weight, heaviest first, ties by index.
pub fn rank_inconsistencies(trace: &BoostTrace, top_k: usize) -> Vec<RankedEntry> {
    let w = trace.final_distribution().weights();
    let mut order: Vec<usize> = (0..w.len()).collect();
    order.sort_by(|&a, &b| w[b].total_cmp(&w[a]).then(a.cmp(&b)));
    order
        .into_iter()
        .take(top_k)
        .map(|index| RankedEntry {
            index,
            weight: w[index],
            gold: trace.gold.get(index).map(|t| t.to_bracketed()).unwrap_or_default(),
        })
        .collect()
}

pub fn ranking_report(ranked: &[RankedEntry]) -> String {
    let mut out = String::new();
    writeln!(out, "{:>5} {:>7} {:>14}  gold", "rank", "entry", "weight").unwrap();
    for (r, e) in ranked.iter().enumerate() {
        writeln!(out, "{:>5} {:>7} {:>14.8e}  {}", r + 1, e.index, e.weight, e.gold).unwrap();
    }
    out
}

/// Trim, boost the stable corpus, then rank it.
#[derive(Debug, Clone, PartialEq)]
pub struct QcReport {
    pub trim: TrimResult,
    pub trace: BoostTrace,
    /// Indices refer to the stable corpus.
    pub ranking: Vec<RankedEntry>,
}

pub fn qc_pipeline<L: Learner>(
    corpus: &Corpus,
    learner: &L,
    rounds: usize,
    master_seed: u64,
    top_k: usize,
    policy: &ScoringPolicy,
) -> Result<QcReport, QcError> {
    let trim = trim_corpus(corpus, learner, DEFAULT_REPLICATION, policy)?;
    let ensemble = boost(&trim.stable, rounds, learner, master_seed, policy, BoostOptions::default())?;
    let ranking = rank_inconsistencies(&ensemble.trace, top_k);
    Ok(QcReport {
        trim,
        trace: ensemble.trace,
        ranking,
    })
}
