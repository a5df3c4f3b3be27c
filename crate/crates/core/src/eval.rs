//! PARSEVAL-style scoring over constituent sets.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::treebank::{Constituent, Corpus, ScoringPolicy, Tree};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("yield mismatch{}: gold {gold:?} vs hypothesis {hyp:?}", index.map(|i| format!(" at entry {i}")).unwrap_or_default())]
    YieldMismatch {
        index: Option<usize>,
        gold: Vec<String>,
        hyp: Vec<String>,
    },
    #[error("{gold} gold entries but {hyp} hypotheses")]
    LengthMismatch { gold: usize, hyp: usize },
    #[error("cannot score an empty corpus")]
    EmptyCorpus,
}

/// Matched (`a`), hypothesis-only (`b`) and gold-only (`c`) constituents.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PairCounts {
    pub a: usize,
    pub b: usize,
    pub c: usize,
}

impl PairCounts {
    pub fn from_sets(gold: &BTreeSet<Constituent>, hyp: &BTreeSet<Constituent>) -> Self {
        let a = gold.intersection(hyp).count();
        PairCounts {
            a,
            b: hyp.len() - a,
            c: gold.len() - a,
        }
    }

    pub fn union(&self) -> usize {
        self.a + self.b + self.c
    }

    pub fn is_exact(&self) -> bool {
        self.b == 0 && self.c == 0
    }
}

impl std::ops::Add for PairCounts {
    type Output = PairCounts;
    fn add(self, o: PairCounts) -> PairCounts {
        PairCounts {
            a: self.a + o.a,
            b: self.b + o.b,
            c: self.c + o.c,
        }
    }
}

impl std::iter::Sum for PairCounts {
    fn sum<I: Iterator<Item = PairCounts>>(iter: I) -> Self {
        iter.fold(PairCounts::default(), |x, y| x + y)
    }
}

pub fn check_yields(gold: &Tree, hyp: &Tree) -> Result<(), EvalError> {
    let (g, h) = (gold.words(), hyp.words());
    if g != h {
        return Err(EvalError::YieldMismatch {
            index: None,
            gold: g,
            hyp: h,
        });
    }
    Ok(())
}

pub fn score_pair(gold: &Tree, hyp: &Tree, policy: &ScoringPolicy) -> Result<PairCounts, EvalError> {
    check_yields(gold, hyp)?;
    Ok(PairCounts::from_sets(
        &gold.constituents(policy),
        &hyp.constituents(policy),
    ))
}

/// a/(a+b+c); 1 when there is nothing to get wrong.
pub fn constituent_accuracy(counts: PairCounts) -> f64 {
    match counts.union() {
        0 => 1.0,
        u => counts.a as f64 / u as f64,
    }
}

/// Balanced F-measure, 2PR/(P+R); 0 when both are 0.
pub fn f_measure(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Half-up rounding to two decimals.
pub fn round2(x: f64) -> f64 {
    (x * 100.0 + 0.5).floor() / 100.0
}

/// Micro-averaged corpus scores. Percentages are kept unrounded; the
/// display forms round to two decimals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreReport {
    pub sentences: usize,
    pub counts: PairCounts,
    pub exact_matches: usize,
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
    pub exact: f64,
}

impl ScoreReport {
    pub fn from_pairs(pairs: &[PairCounts]) -> Result<Self, EvalError> {
        if pairs.is_empty() {
            return Err(EvalError::EmptyCorpus);
        }
        let counts: PairCounts = pairs.iter().copied().sum();
        let exact_matches = pairs.iter().filter(|p| p.is_exact()).count();
        let pct = |num: usize, den: usize| if den == 0 { 100.0 } else { 100.0 * num as f64 / den as f64 };
        let precision = pct(counts.a, counts.a + counts.b);
        let recall = pct(counts.a, counts.a + counts.c);
        Ok(ScoreReport {
            sentences: pairs.len(),
            counts,
            exact_matches,
            precision,
            recall,
            f: f_measure(precision, recall),
            exact: pct(exact_matches, pairs.len()),
        })
    }

    pub const CSV_COLUMNS: &'static str = "P,R,F,Exact";

    pub fn csv_fields(&self) -> String {
        format!(
            "{:.2},{:.2},{:.2},{:.2}",
            round2(self.precision),
            round2(self.recall),
            round2(self.f),
            round2(self.exact)
        )
    }
}

impl fmt::Display for ScoreReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:>7.2} {:>7.2} {:>7.2} {:>7.2}",
            round2(self.precision),
            round2(self.recall),
            round2(self.f),
            round2(self.exact)
        )
    }
}

/// Per-entry counts for a corpus and parallel hypotheses.
pub fn pair_counts(gold: &Corpus, hyps: &[Tree], policy: &ScoringPolicy) -> Result<Vec<PairCounts>, EvalError> {
    if gold.len() != hyps.len() {
        return Err(EvalError::LengthMismatch {
            gold: gold.len(),
            hyp: hyps.len(),
        });
    }
    gold.entries
        .iter()
        .zip(hyps)
        .enumerate()
        .map(|(i, (e, h))| {
            score_pair(&e.gold, h, policy).map_err(|err| match err {
                EvalError::YieldMismatch { gold, hyp, .. } => EvalError::YieldMismatch {
                    index: Some(i),
                    gold,
                    hyp,
                },
                other => other,
            })
        })
        .collect()
}

pub fn score_corpus(gold: &Corpus, hyps: &[Tree], policy: &ScoringPolicy) -> Result<ScoreReport, EvalError> {
    if gold.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    ScoreReport::from_pairs(&pair_counts(gold, hyps, policy)?)
}
