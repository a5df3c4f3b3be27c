//! Machinery shared by bagged and boosted ensembles: parsing a corpus with
//! every member, combining prefixes of the member list, and the
//! per-prefix evaluation table with its summary rows.

use std::fmt::Write as _;

use rayon::prelude::*;
use thiserror::Error;

use crate::combine::{combine_trees, CombineError};
use crate::eval::{score_corpus, EvalError, ScoreReport};
use crate::grammar::{GrammarError, ParserModel};
use crate::treebank::{Corpus, ScoringPolicy, Tree};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnsembleError {
    #[error("prefix size {prefix} outside 1..={members}")]
    Prefix { prefix: usize, members: usize },
    #[error("ensemble has no members")]
    Empty,
    #[error("member {member}: {source}")]
    Parse {
        member: usize,
        #[source]
        source: GrammarError,
    },
    #[error(transparent)]
    Combine(#[from] CombineError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// One member's parses of a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusParses {
    pub trees: Vec<Tree>,
    /// Entry indices that received a fallback tree.
    pub fallbacks: Vec<usize>,
}

pub fn parse_corpus<M: ParserModel + ?Sized>(model: &M, corpus: &Corpus) -> Result<CorpusParses, GrammarError> {
    let outcomes: Vec<_> = corpus
        .entries
        .par_iter()
        .map(|e| model.parse(&e.sentence))
        .collect::<Result<_, _>>()?;
    let fallbacks = outcomes
        .iter()
        .enumerate()
        .filter(|(_, o)| o.fallback)
        .map(|(i, _)| i)
        .collect();
    Ok(CorpusParses {
        trees: outcomes.into_iter().map(|o| o.tree).collect(),
        fallbacks,
    })
}

/// Parses `corpus` with each model, in member order.
pub fn parse_with_members<M: ParserModel>(models: &[&M], corpus: &Corpus) -> Result<Vec<CorpusParses>, EnsembleError> {
    models
        .iter()
        .enumerate()
        .map(|(member, m)| parse_corpus(*m, corpus).map_err(|source| EnsembleError::Parse { member, source }))
        .collect()
}

/// Combined tree for every sentence from the first `prefix` members.
/// `weights` of `None` means unweighted voting.
pub fn combine_prefix(
    parses: &[CorpusParses],
    weights: Option<&[f64]>,
    prefix: usize,
    policy: &ScoringPolicy,
) -> Result<Vec<Tree>, EnsembleError> {
    if prefix == 0 || prefix > parses.len() {
        return Err(EnsembleError::Prefix {
            prefix,
            members: parses.len(),
        });
    }
    let n = parses[0].trees.len();
    let weights = weights.map(|w| &w[..prefix]);
    (0..n)
        .into_par_iter()
        .map(|s| {
            let members: Vec<Tree> = parses[..prefix].iter().map(|p| p.trees[s].clone()).collect();
            combine_trees(&members, weights, policy).map_err(EnsembleError::from)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub prefix: usize,
    pub train: ScoreReport,
    pub test: ScoreReport,
}

/// A named summary row. Each side reports the prefix it was taken from.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub name: String,
    pub train_prefix: usize,
    pub train: ScoreReport,
    pub test_prefix: usize,
    pub test: ScoreReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleCurve {
    pub rows: Vec<CurveRow>,
    pub summary: Vec<SummaryRow>,
    /// Fallback parses per member: (train count, test count).
    pub fallbacks: Vec<(usize, usize)>,
}

/// Scores every prefix 1..=k on both sets and derives the Initial,
/// Final(k), BestF, TrainBestF and TestBestF rows. BestF pairs the best
/// training prefix on the training side with the best test prefix on the
/// test side; ties favor the smaller prefix.
pub fn prefix_curve(
    train_parses: &[CorpusParses],
    test_parses: &[CorpusParses],
    weights: Option<&[f64]>,
    train: &Corpus,
    test: &Corpus,
    policy: &ScoringPolicy,
) -> Result<EnsembleCurve, EnsembleError> {
    let k = train_parses.len();
    if k == 0 {
        return Err(EnsembleError::Empty);
    }
    let rows = (1..=k)
        .map(|prefix| {
            let tr = combine_prefix(train_parses, weights, prefix, policy)?;
            let te = combine_prefix(test_parses, weights, prefix, policy)?;
            Ok(CurveRow {
                prefix,
                train: score_corpus(train, &tr, policy)?,
                test: score_corpus(test, &te, policy)?,
            })
        })
        .collect::<Result<Vec<_>, EnsembleError>>()?;

    let argmax = |f: &dyn Fn(&CurveRow) -> f64| {
        rows.iter()
            .fold(&rows[0], |best, r| if f(r) > f(best) { r } else { best })
    };
    let best_train = argmax(&|r| r.train.f);
    let best_test = argmax(&|r| r.test.f);
    let row = |name: &str, a: &CurveRow, b: &CurveRow| SummaryRow {
        name: name.to_string(),
        train_prefix: a.prefix,
        train: a.train,
        test_prefix: b.prefix,
        test: b.test,
    };
    let first = &rows[0];
    let last = &rows[k - 1];
    let summary = vec![
        row("Initial", first, first),
        row(&format!("Final({k})"), last, last),
        row("BestF", best_train, best_test),
        row("TrainBestF", best_train, best_train),
        row("TestBestF", best_test, best_test),
    ];
    let fallbacks = train_parses
        .iter()
        .zip(test_parses)
        .map(|(a, b)| (a.fallbacks.len(), b.fallbacks.len()))
        .collect();
    Ok(EnsembleCurve {
        rows,
        summary,
        fallbacks,
    })
}

impl EnsembleCurve {
    /// Columns `prefix,set,P,R,F,Exact`, one line per prefix and set.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("prefix,set,P,R,F,Exact\n");
        for r in &self.rows {
            writeln!(out, "{},train,{}", r.prefix, r.train.csv_fields()).unwrap();
            writeln!(out, "{},test,{}", r.prefix, r.test.csv_fields()).unwrap();
        }
        out
    }

    /// Aligned text table of the summary rows plus fallback diagnostics.
    pub fn summary_table(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "{:<12} {:>6} {:>7} {:>7} {:>7} {:>7}   {:>6} {:>7} {:>7} {:>7} {:>7}",
            "row", "prefix", "trainP", "trainR", "trainF", "trainEx", "prefix", "testP", "testR", "testF", "testEx"
        )
        .unwrap();
        for s in &self.summary {
            writeln!(
                out,
                "{:<12} {:>6} {}   {:>6} {}",
                s.name, s.train_prefix, s.train, s.test_prefix, s.test
            )
            .unwrap();
        }
        let total: (usize, usize) = self
            .fallbacks
            .iter()
            .fold((0, 0), |acc, f| (acc.0 + f.0, acc.1 + f.1));
        writeln!(out, "fallback parses (train/test): {}/{}", total.0, total.1).unwrap();
        out
    }

    pub fn row(&self, name: &str) -> Option<&SummaryRow> {
        self.summary.iter().find(|s| s.name == name || s.name.starts_with(&format!("{name}(")))
    }
}
