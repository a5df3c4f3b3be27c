//! Run orchestration: synthetic corpora, the training-size study, run
//! configuration and report files.

pub mod synth;

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensemble::{parse_corpus, CorpusParses};
use crate::eval::{score_corpus, EvalError, ScoreReport};
use crate::grammar::{GrammarError, Learner};
use crate::seed::{self, stream};
use crate::treebank::{Corpus, ScoringPolicy};

pub const DEFAULT_SIZES: [usize; 7] = [50, 100, 500, 1000, 5000, 10000, 20000];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurveError {
    #[error("training size {size} exceeds corpus size {m}")]
    TooLarge { size: usize, m: usize },
    #[error("training sizes must be positive and ascending")]
    Unsorted,
    #[error("size {size}: {source}")]
    Learner {
        size: usize,
        #[source]
        source: GrammarError,
    },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// The default size ladder cut at `m`, always ending with `m` itself.
pub fn default_sizes(m: usize) -> Vec<usize> {
    let mut sizes: Vec<usize> = DEFAULT_SIZES.iter().copied().filter(|&s| s < m).collect();
    if m > 0 {
        sizes.push(m);
    }
    sizes
}

/// `corpus` in the order given by the run's shuffle stream.
pub fn shuffled(corpus: &Corpus, master_seed: u64) -> Corpus {
    let mut entries = corpus.entries.clone();
    entries.shuffle(&mut seed::stream_rng(master_seed, stream::SHUFFLE, 0));
    Corpus { entries }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SizeRow {
    pub size: usize,
    pub train: ScoreReport,
    pub test: ScoreReport,
    pub fallbacks: usize,
}

/// Trains on nested prefixes of the shuffled corpus and scores each model
/// on its own training prefix and on `test`.
pub fn learning_curve<L: Learner>(
    corpus: &Corpus,
    test: &Corpus,
    sizes: &[usize],
    learner: &L,
    master_seed: u64,
    policy: &ScoringPolicy,
) -> Result<Vec<SizeRow>, CurveError> {
    if sizes.is_empty() || sizes.windows(2).any(|w| w[0] >= w[1]) || sizes[0] == 0 {
        return Err(CurveError::Unsorted);
    }
    if let Some(&size) = sizes.iter().find(|&&s| s > corpus.len()) {
        return Err(CurveError::TooLarge { size, m: corpus.len() });
    }
    let order = shuffled(corpus, master_seed);
    sizes
        .iter()
        .map(|&size| {
            let train = Corpus {
                entries: order.entries[..size].to_vec(),
            };
            let err = |source| CurveError::Learner { size, source };
            let model = learner
                .induce(&train, seed::derive(master_seed, stream::SHUFFLE, size as u64))
                .map_err(err)?;
            let on_train: CorpusParses = parse_corpus(&model, &train).map_err(err)?;
            let on_test = parse_corpus(&model, test).map_err(err)?;
            Ok(SizeRow {
                size,
                train: score_corpus(&train, &on_train.trees, policy)?,
                test: score_corpus(test, &on_test.trees, policy)?,
                fallbacks: on_train.fallbacks.len() + on_test.fallbacks.len(),
            })
        })
        .collect()
}

pub fn learning_curve_csv(rows: &[SizeRow]) -> String {
    let mut out = String::from("size,set,P,R,F,Exact\n");
    for r in rows {
        writeln!(out, "{},train,{}", r.size, r.train.csv_fields()).unwrap();
        writeln!(out, "{},test,{}", r.size, r.test.csv_fields()).unwrap();
    }
    out
}

pub fn learning_curve_table(rows: &[SizeRow]) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{:>7} {:>7} {:>7} {:>7} {:>7}   {:>7} {:>7} {:>7} {:>7}",
        "size", "trainP", "trainR", "trainF", "trainEx", "testP", "testR", "testF", "testEx"
    )
    .unwrap();
    for r in rows {
        writeln!(out, "{:>7} {}   {}", r.size, r.train, r.test).unwrap();
    }
    out
}

/// Parameters of one run, written as `config.json` next to its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub seed: u64,
    pub policy: ScoringPolicy,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rounds: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sizes: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub top: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub voting: Option<crate::boosting::VoteWeighting>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_rule: Option<crate::boosting::AlphaRule>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sentences: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grammar: Option<String>,
    pub smoothing: f64,
}

impl RunConfig {
    pub fn new(command: &str, seed: u64, policy: ScoringPolicy) -> Self {
        RunConfig {
            command: command.to_string(),
            seed,
            policy,
            train: None,
            test: None,
            k: None,
            rounds: None,
            sizes: None,
            bins: None,
            top: None,
            voting: None,
            alpha_rule: None,
            sentences: None,
            noise: None,
            grammar: None,
            smoothing: crate::grammar::DEFAULT_SMOOTHING,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}

/// Creates `dir` and proves it writable, so a bad path fails before any
/// work starts.
pub fn prepare_out_dir(dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let probe = dir.join(".write-probe");
    fs::write(&probe, b"")?;
    fs::remove_file(probe)
}

/// Writes the run's files plus `config.json` and `seed`.
pub struct Report {
    dir: PathBuf,
}

impl Report {
    pub fn create(dir: &Path, config: &RunConfig) -> io::Result<Self> {
        prepare_out_dir(dir)?;
        let r = Report { dir: dir.to_path_buf() };
        r.write("config.json", &config.to_json())?;
        r.write("seed", &format!("{}\n", config.seed))?;
        Ok(r)
    }

    pub fn write(&self, name: &str, contents: &str) -> io::Result<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, contents)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}
