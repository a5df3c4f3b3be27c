//! Parser induction: a smoothed PCFG learned from a corpus, decoded exactly
//! with a CKY chart. The rest of the crate only sees the [`Learner`] and
//! [`ParserModel`] traits, so the learner can be swapped out.

pub mod binarize;
mod cky;
mod pcfg;

pub use binarize::{binarize, debinarize};
pub use pcfg::{signature, BinaryRule, PcfgLearner, PcfgModel, DEFAULT_SMOOTHING, FALLBACK_LABEL, START};

use thiserror::Error;

use crate::treebank::{Corpus, Tree, TreebankError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GrammarError {
    #[error("cannot induce a grammar from an empty corpus")]
    EmptyCorpus,
    #[error("cannot parse an empty sentence")]
    EmptySentence,
    #[error("label {0:?} uses a character reserved for the grammar form")]
    ReservedLabel(String),
    #[error("intermediate label {0:?} does not attach to its parent")]
    DanglingIntermediate(String),
    #[error("malformed model file, line {line}: {message}")]
    ModelFormat { line: usize, message: String },
    #[error(transparent)]
    Tree(#[from] TreebankError),
}

/// Result of parsing one sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseOutcome {
    pub tree: Tree,
    /// log10 probability of the best derivation; `None` for a fallback tree.
    pub log10_prob: Option<f64>,
    /// Set when the chart had no complete parse and a right-branching
    /// placeholder tree was returned instead.
    pub fallback: bool,
}

/// A trained parser.
pub trait ParserModel: Send + Sync {
    fn parse(&self, sentence: &[String]) -> Result<ParseOutcome, GrammarError>;

    /// Stable text form; equal models serialize to equal bytes.
    fn to_text(&self) -> String;
}

/// A parser induction algorithm: deterministic given (corpus, seed).
pub trait Learner: Sync {
    type Model: ParserModel;

    fn induce(&self, corpus: &Corpus, seed: u64) -> Result<Self::Model, GrammarError>;
}
