//! Synthetic treebanks sampled from a generator PCFG, with optional
//! label-conflict noise.
//!
//! Generator file format, one directive per line, `#` starts a comment:
//!
//! ```text
//! start TOP
//! S -> NP VP 0.9
//! N -> dog 0.5
//! lexicon N 200 zipf 1.1 suffix on
//! ```
//!
//! A symbol is a nonterminal iff it has rules. `lexicon TAG COUNT zipf S
//! suffix X [mass M]` adds COUNT words under TAG, each a letter stem
//! (`a`, `b`, ..., `z`, `aa`, ...) followed by X. The word of rank r gets
//! probability proportional to 1/(r+1)^S, scaled to total M, or without
//! `mass` to whatever TAG's earlier rules leave over.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rand::Rng as _;
use thiserror::Error;

use crate::seed::{self, stream, Rng};
use crate::treebank::{Corpus, Entry, Tree};

const PROPER_TOLERANCE: f64 = 1e-6;
const MAX_DEPTH: usize = 200;
const MAX_ATTEMPTS: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("generator line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("rules for {lhs} sum to {sum}, not 1")]
    NotProper { lhs: String, sum: f64 },
    #[error("start symbol {0:?} has no rules")]
    NoStart(String),
    #[error("expected sentence length is unbounded")]
    Unbounded,
    #[error("rule {lhs} -> {rhs} mixes words and nonterminals")]
    MixedRule { lhs: String, rhs: String },
    #[error("noise rate {0} outside [0, 1)")]
    NoiseRate(f64),
    #[error("no sentence of at most {0} words after {MAX_ATTEMPTS} attempts")]
    TooLong(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorGrammar {
    pub start: String,
    pub rules: BTreeMap<String, Vec<(Vec<String>, f64)>>,
}

fn zipf_weights(count: usize, s: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..count).map(|r| 1.0 / ((r + 1) as f64).powf(s)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Bijective base-26 letters: 0 → a, 25 → z, 26 → aa.
fn stem(mut r: usize) -> String {
    let mut out = Vec::new();
    loop {
        out.push(b'a' + (r % 26) as u8);
        if r < 26 {
            break;
        }
        r = r / 26 - 1;
    }
    out.reverse();
    String::from_utf8(out).expect("ascii")
}

impl GeneratorGrammar {
    pub fn parse(text: &str) -> Result<Self, SynthError> {
        let mut start = None;
        let mut rules: BTreeMap<String, Vec<(Vec<String>, f64)>> = BTreeMap::new();
        let mut lexicons: Vec<(usize, String, usize, f64, String, Option<f64>)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |message: &str| SynthError::Format {
                line,
                message: message.to_string(),
            };
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let tok: Vec<&str> = body.split_whitespace().collect();
            match tok[0] {
                "start" if tok.len() == 2 => start = Some(tok[1].to_string()),
                "lexicon" => {
                    let shape = tok.len() == 7 || (tok.len() == 9 && tok[7] == "mass");
                    if !shape || tok[3] != "zipf" || tok[5] != "suffix" {
                        return Err(err("expected `lexicon TAG COUNT zipf S suffix X [mass M]`"));
                    }
                    let mass = match tok.get(8) {
                        Some(m) => Some(m.parse::<f64>().ok().filter(|m| *m > 0.0 && *m <= 1.0).ok_or_else(|| err("bad mass"))?),
                        None => None,
                    };
                    let count: usize = tok[2].parse().map_err(|_| err("bad word count"))?;
                    let s: f64 = tok[4].parse().map_err(|_| err("bad zipf exponent"))?;
                    if count == 0 {
                        return Err(err("empty lexicon"));
                    }
                    lexicons.push((line, tok[1].to_string(), count, s, tok[6].to_string(), mass));
                }
                _ => {
                    if tok.len() < 4 || tok[1] != "->" {
                        return Err(err("expected `LHS -> RHS... PROB`"));
                    }
                    let p: f64 = tok[tok.len() - 1].parse().map_err(|_| err("bad probability"))?;
                    if !(p > 0.0 && p <= 1.0) {
                        return Err(err("probability outside (0, 1]"));
                    }
                    let rhs = tok[2..tok.len() - 1].iter().map(|s| s.to_string()).collect();
                    rules.entry(tok[0].to_string()).or_default().push((rhs, p));
                }
            }
        }
        for (line, tag, count, s, suffix, mass) in lexicons {
            let used: f64 = rules.get(&tag).map_or(0.0, |r| r.iter().map(|x| x.1).sum());
            let left = mass.unwrap_or(1.0 - used);
            if left <= PROPER_TOLERANCE {
                return Err(SynthError::Format {
                    line,
                    message: format!("no probability mass left for {tag}'s lexicon"),
                });
            }
            let entry = rules.entry(tag).or_default();
            for (r, w) in zipf_weights(count, s).into_iter().enumerate() {
                entry.push((vec![format!("{}{suffix}", stem(r))], w * left));
            }
        }
        let start = start.ok_or(SynthError::Format {
            line: 0,
            message: "missing start directive".into(),
        })?;
        let g = GeneratorGrammar { start, rules };
        g.check()?;
        Ok(g)
    }

    pub fn is_nonterminal(&self, sym: &str) -> bool {
        self.rules.contains_key(sym)
    }

    fn check(&self) -> Result<(), SynthError> {
        if !self.is_nonterminal(&self.start) {
            return Err(SynthError::NoStart(self.start.clone()));
        }
        for (lhs, rs) in &self.rules {
            let sum: f64 = rs.iter().map(|r| r.1).sum();
            if (sum - 1.0).abs() > PROPER_TOLERANCE {
                return Err(SynthError::NotProper { lhs: lhs.clone(), sum });
            }
            for (rhs, _) in rs {
                let words = rhs.iter().filter(|s| !self.is_nonterminal(s)).count();
                if words > 0 && rhs.len() > 1 {
                    return Err(SynthError::MixedRule {
                        lhs: lhs.clone(),
                        rhs: rhs.join(" "),
                    });
                }
            }
        }
        self.expected_lengths().map(|_| ())
    }

    /// Expected yield length per nonterminal, by fixed-point iteration
    /// from zero; fails if the iteration does not settle.
    pub fn expected_lengths(&self) -> Result<BTreeMap<String, f64>, SynthError> {
        let mut e: BTreeMap<String, f64> = self.rules.keys().map(|k| (k.clone(), 0.0)).collect();
        for _ in 0..100_000 {
            let mut change: f64 = 0.0;
            let mut next = BTreeMap::new();
            for (lhs, rs) in &self.rules {
                let v: f64 = rs
                    .iter()
                    .map(|(rhs, p)| p * rhs.iter().map(|s| e.get(s).copied().unwrap_or(1.0)).sum::<f64>())
                    .sum();
                change = change.max((v - e[lhs]).abs() / v.max(1.0));
                next.insert(lhs.clone(), v);
            }
            e = next;
            if e.values().any(|v| *v > 1e9 || !v.is_finite()) {
                return Err(SynthError::Unbounded);
            }
            if change < 1e-12 {
                return Ok(e);
            }
        }
        Err(SynthError::Unbounded)
    }

    /// Phrasal labels: nonterminals other than the start symbol with at
    /// least one non-lexical rule.
    pub fn phrasal_labels(&self) -> BTreeSet<&str> {
        self.rules
            .iter()
            .filter(|(lhs, rs)| {
                **lhs != self.start && rs.iter().any(|(rhs, _)| rhs.iter().all(|s| self.is_nonterminal(s)))
            })
            .map(|(lhs, _)| lhs.as_str())
            .collect()
    }

    fn sample_tree(&self, rng: &mut Rng) -> Option<Tree> {
        self.sample_symbol(&self.start, rng, 0)
    }

    fn sample_symbol(&self, sym: &str, rng: &mut Rng, depth: usize) -> Option<Tree> {
        if depth > MAX_DEPTH {
            return None;
        }
        let rs = &self.rules[sym];
        let mut x: f64 = rng.random::<f64>();
        let mut chosen = &rs[rs.len() - 1].0;
        for (rhs, p) in rs {
            if x < *p {
                chosen = rhs;
                break;
            }
            x -= p;
        }
        if chosen.len() == 1 && !self.is_nonterminal(&chosen[0]) {
            return Some(Tree::preterminal(sym, chosen[0].clone()));
        }
        let children = chosen
            .iter()
            .map(|c| self.sample_symbol(c, rng, depth + 1))
            .collect::<Option<Vec<_>>>()?;
        Some(Tree::node(sym, children))
    }
}

/// The generator used by the built-in experiments.
pub const DEFAULT_GRAMMAR: &str = include_str!("default_grammar.txt");

pub fn default_grammar() -> GeneratorGrammar {
    GeneratorGrammar::parse(DEFAULT_GRAMMAR).expect("built-in generator grammar is valid")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub corpus: Corpus,
    /// Indices of entries whose gold tree was perturbed.
    pub planted: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthOptions {
    pub noise: f64,
    /// Sentences longer than this are rejected and redrawn.
    pub max_words: usize,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            noise: 0.0,
            max_words: 25,
        }
    }
}

/// Samples `n` trees. Each entry is perturbed with probability
/// `options.noise` by relabeling one phrasal node; the new label is one the
/// grammar also uses over the same child labels when such a label exists,
/// otherwise any other phrasal label.
pub fn synth_corpus(g: &GeneratorGrammar, n: usize, options: SynthOptions, seed: u64) -> Result<SynthCorpus, SynthError> {
    if !(0.0..1.0).contains(&options.noise) {
        return Err(SynthError::NoiseRate(options.noise));
    }
    let mut rng = seed::stream_rng(seed, stream::SYNTH, 0);
    let mut noise_rng = seed::stream_rng(seed, stream::SYNTH_NOISE, 0);
    let mut corpus = Corpus::new();
    let mut planted = Vec::new();
    for index in 0..n {
        let mut tree = None;
        for _ in 0..MAX_ATTEMPTS {
            if let Some(t) = g.sample_tree(&mut rng) {
                if t.len() <= options.max_words {
                    tree = Some(t);
                    break;
                }
            }
        }
        let mut tree = tree.ok_or(SynthError::TooLong(options.max_words))?;
        if noise_rng.random::<f64>() < options.noise && perturb(g, &mut tree, &mut noise_rng) {
            planted.push(index);
        }
        corpus.push(Entry::new(tree).expect("sampled trees are valid"));
    }
    Ok(SynthCorpus { corpus, planted })
}

fn child_labels(t: &Tree) -> Vec<String> {
    t.children().iter().map(|c| c.label().to_string()).collect()
}

/// Relabels one phrasal node below the root. Returns false when the tree
/// has no such node.
pub fn perturb(g: &GeneratorGrammar, tree: &mut Tree, rng: &mut Rng) -> bool {
    let phrasal = g.phrasal_labels();
    let mut paths = Vec::new();
    collect_paths(tree, &mut Vec::new(), &mut paths, &phrasal);
    paths.retain(|p| !p.is_empty());
    let Some(path) = paths.choose(rng).cloned() else {
        return false;
    };
    let node = node_at(tree, &path);
    let (old, kids) = (node.label().to_string(), child_labels(node));
    let mut same_context: Vec<&str> = g
        .rules
        .iter()
        .filter(|(lhs, rs)| **lhs != old && phrasal.contains(lhs.as_str()) && rs.iter().any(|(rhs, _)| *rhs == kids))
        .map(|(lhs, _)| lhs.as_str())
        .collect();
    if same_context.is_empty() {
        same_context = phrasal.iter().copied().filter(|l| *l != old).collect();
    }
    let Some(new) = same_context.choose(rng).map(|s| s.to_string()) else {
        return false;
    };
    if let Tree::Node { label, .. } = node_at_mut(tree, &path) {
        *label = new;
    }
    true
}

fn collect_paths(t: &Tree, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>, phrasal: &BTreeSet<&str>) {
    if t.is_leaf() || t.is_preterminal() {
        return;
    }
    if phrasal.contains(t.label()) {
        out.push(path.clone());
    }
    for (i, c) in t.children().iter().enumerate() {
        path.push(i);
        collect_paths(c, path, out, phrasal);
        path.pop();
    }
}

fn node_at<'a>(t: &'a Tree, path: &[usize]) -> &'a Tree {
    path.iter().fold(t, |n, &i| &n.children()[i])
}

fn node_at_mut<'a>(t: &'a mut Tree, path: &[usize]) -> &'a mut Tree {
    let mut n = t;
    for &i in path {
        n = match n {
            Tree::Node { children, .. } => &mut children[i],
            Tree::Leaf(_) => unreachable!("paths only lead through internal nodes"),
        };
    }
    n
}
