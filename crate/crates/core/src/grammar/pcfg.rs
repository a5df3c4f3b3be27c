use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use super::binarize::{binarize, check_tree_labels, debinarize, UNARY_JOIN};
use super::{GrammarError, Learner, ParseOutcome, ParserModel};
use crate::treebank::{Corpus, Tree};

/// Start symbol of every grammar; its rules choose the root label.
pub const START: &str = "@ROOT";
/// Label of the right-branching placeholder produced when the chart is empty.
pub const FALLBACK_LABEL: &str = "JUNK";
pub const DEFAULT_SMOOTHING: f64 = 1e-3;

const FORMAT_HEADER: &str = "pcfg-model v1";
const GENERIC_UNKNOWN: &str = "UNK";
/// Known words seen at most this often also get the unknown-word scores.
const RARE_KNOWN: usize = 2;
/// Weight of the unknown-word scores for all other known words, so a
/// known word can still take a tag it was never seen with.
const KNOWN_BACKOFF: f64 = 1e-3;

/// Unknown-word class: capitalization and digit flags plus the last two
/// characters, lowercased.
pub fn signature(word: &str) -> String {
    let mut sig = String::from(GENERIC_UNKNOWN);
    if word.chars().next().is_some_and(char::is_uppercase) {
        sig.push_str("-C");
    }
    if word.chars().any(|c| c.is_ascii_digit()) {
        sig.push_str("-D");
    }
    let chars: Vec<char> = word.chars().collect();
    let tail: String = chars[chars.len().saturating_sub(2)..].iter().collect();
    sig.push('-');
    sig.push_str(&tail.to_lowercase());
    sig
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryRule {
    pub lhs: u32,
    pub left: u32,
    pub right: u32,
    pub log10_prob: f64,
}

/// A PCFG over binarized, unary-collapsed trees. All scores are log10
/// probabilities; that is also the persisted form, so a saved model
/// reloads bit-identically.
#[derive(Debug, Clone)]
pub struct PcfgModel {
    pub(super) labels: Vec<String>,
    pub(super) label_ids: HashMap<String, u32>,
    /// (label, log10 P(label | START)), by label id.
    pub(super) root_rules: Vec<(u32, f64)>,
    /// Sorted by (lhs, left, right); the index is the tie-break order.
    pub(super) binary: Vec<BinaryRule>,
    pub(super) by_left: Vec<Vec<u32>>,
    pub(super) rule_index: HashMap<(u32, u32, u32), u32>,
    pub(super) lexicon: BTreeMap<String, Vec<(u32, f64)>>,
    pub(super) signatures: BTreeMap<String, Vec<(u32, f64)>>,
    /// Labels seen directly above a word, composites included.
    pub(super) preterminals: Vec<u32>,
    /// Preterminal labels by innermost tag: a composite such as `NP+N`
    /// emits words with the distribution of `N`.
    pub(super) emitters: Vec<Vec<u32>>,
    pub(super) rare: BTreeSet<String>,
    pub(super) fallback_root: String,
}

impl PartialEq for PcfgModel {
    fn eq(&self, other: &Self) -> bool {
        self.labels == other.labels
            && self.root_rules == other.root_rules
            && self.binary == other.binary
            && self.lexicon == other.lexicon
            && self.signatures == other.signatures
            && self.preterminals == other.preterminals
            && self.rare == other.rare
            && self.fallback_root == other.fallback_root
    }
}

#[derive(Default)]
struct Counts {
    roots: BTreeMap<String, f64>,
    binary: BTreeMap<String, BTreeMap<(String, String), f64>>,
    lexical: BTreeMap<(String, String), f64>,
    preterminals: BTreeSet<String>,
    word_freq: BTreeMap<String, usize>,
}

fn innermost(label: &str) -> &str {
    label.rsplit(UNARY_JOIN).next().unwrap_or(label)
}

impl Counts {
    fn observe(&mut self, tree: &Tree) {
        self.observe_node(tree);
        *self.roots.entry(tree.label().to_string()).or_default() += 1.0;
    }

    fn observe_node(&mut self, tree: &Tree) {
        let children = tree.children();
        if tree.is_preterminal() {
            let word = children[0].label().to_string();
            *self.word_freq.entry(word.clone()).or_default() += 1;
            self.preterminals.insert(tree.label().to_string());
            *self.lexical.entry((innermost(tree.label()).to_string(), word)).or_default() += 1.0;
            return;
        }
        debug_assert_eq!(children.len(), 2, "grammar form is binary");
        let rhs = (children[0].label().to_string(), children[1].label().to_string());
        *self
            .binary
            .entry(tree.label().to_string())
            .or_default()
            .entry(rhs)
            .or_default() += 1.0;
        children.iter().for_each(|c| self.observe_node(c));
    }
}

impl PcfgModel {
    /// Relative-frequency estimate with additive smoothing `smoothing` over
    /// observed rule shapes.
    pub fn induce(corpus: &Corpus, smoothing: f64) -> Result<PcfgModel, GrammarError> {
        if corpus.is_empty() {
            return Err(GrammarError::EmptyCorpus);
        }
        let mut counts = Counts::default();
        for entry in &corpus.entries {
            check_tree_labels(&entry.gold)?;
            counts.observe(&binarize(&entry.gold));
        }

        // Rare-token classes: every token of a word seen at most once also
        // counts toward its signature and the generic unknown class.
        let mut sig_counts: BTreeMap<(String, String), f64> = BTreeMap::new();
        let mut tag_totals: BTreeMap<String, f64> = BTreeMap::new();
        for ((tag, word), &c) in &counts.lexical {
            *tag_totals.entry(tag.clone()).or_default() += c;
            if counts.word_freq[word] <= 1 {
                *sig_counts.entry((tag.clone(), signature(word))).or_default() += c;
                *sig_counts.entry((tag.clone(), GENERIC_UNKNOWN.to_string())).or_default() += c;
                *tag_totals.get_mut(tag).unwrap() += 2.0 * c;
            }
        }
        for (tag, total) in tag_totals.iter_mut() {
            *sig_counts.entry((tag.clone(), GENERIC_UNKNOWN.to_string())).or_default() += smoothing;
            *total += smoothing;
        }

        fn smooth<K>(table: &BTreeMap<K, f64>, smoothing: f64) -> Vec<f64> {
            let total: f64 = table.values().sum();
            let denom = total + smoothing * table.len() as f64;
            table.values().map(|c| ((c + smoothing) / denom).log10()).collect()
        }

        let mut label_set: BTreeSet<String> = BTreeSet::new();
        label_set.extend(counts.roots.keys().cloned());
        for (lhs, table) in &counts.binary {
            label_set.insert(lhs.clone());
            for (l, r) in table.keys() {
                label_set.insert(l.clone());
                label_set.insert(r.clone());
            }
        }
        label_set.extend(tag_totals.keys().cloned());
        label_set.extend(counts.preterminals.iter().cloned());

        let labels: Vec<String> = label_set.into_iter().collect();
        let ids: HashMap<String, u32> = labels.iter().enumerate().map(|(i, l)| (l.clone(), i as u32)).collect();

        let root_rules: Vec<(u32, f64)> = counts
            .roots
            .keys()
            .zip(smooth(&counts.roots, smoothing))
            .map(|(l, p)| (ids[l], p))
            .collect();

        let mut binary = Vec::new();
        for (lhs, table) in &counts.binary {
            for ((l, r), p) in table.keys().zip(smooth(table, smoothing)) {
                binary.push(BinaryRule {
                    lhs: ids[lhs],
                    left: ids[l],
                    right: ids[r],
                    log10_prob: p,
                });
            }
        }

        let mut lexicon: BTreeMap<String, Vec<(u32, f64)>> = BTreeMap::new();
        for ((tag, word), c) in &counts.lexical {
            let p = (c / tag_totals[tag]).log10();
            lexicon.entry(word.clone()).or_default().push((ids[tag], p));
        }
        let mut signatures: BTreeMap<String, Vec<(u32, f64)>> = BTreeMap::new();
        for ((tag, sig), c) in &sig_counts {
            let p = (c / tag_totals[tag]).log10();
            signatures.entry(sig.clone()).or_default().push((ids[tag], p));
        }

        let fallback_root = root_rules
            .iter()
            .fold(None::<(u32, f64)>, |best, &(l, p)| match best {
                Some((_, bp)) if bp >= p => best,
                _ => Some((l, p)),
            })
            .map(|(l, _)| labels[l as usize].split(UNARY_JOIN).next().unwrap().to_string())
            .unwrap_or_else(|| "TOP".to_string());

        let preterminals = counts.preterminals.iter().map(|l| ids[l]).collect();
        let rare = counts
            .word_freq
            .iter()
            .filter(|(_, &f)| f <= RARE_KNOWN)
            .map(|(w, _)| w.clone())
            .collect();
        Ok(PcfgModel::assemble(
            labels,
            root_rules,
            binary,
            lexicon,
            signatures,
            preterminals,
            rare,
            fallback_root,
        ))
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        labels: Vec<String>,
        root_rules: Vec<(u32, f64)>,
        mut binary: Vec<BinaryRule>,
        mut lexicon: BTreeMap<String, Vec<(u32, f64)>>,
        mut signatures: BTreeMap<String, Vec<(u32, f64)>>,
        mut preterminals: Vec<u32>,
        rare: BTreeSet<String>,
        fallback_root: String,
    ) -> PcfgModel {
        preterminals.sort_unstable();
        preterminals.dedup();
        binary.sort_by_key(|r| (r.lhs, r.left, r.right));
        lexicon.values_mut().for_each(|v| v.sort_by_key(|e| e.0));
        signatures.values_mut().for_each(|v| v.sort_by_key(|e| e.0));
        let label_ids: HashMap<String, u32> = labels.iter().enumerate().map(|(i, l)| (l.clone(), i as u32)).collect();
        let mut emitters = vec![Vec::new(); labels.len()];
        for &p in &preterminals {
            if let Some(&inner) = label_ids.get(innermost(&labels[p as usize])) {
                emitters[inner as usize].push(p);
            }
        }
        let mut by_left = vec![Vec::new(); labels.len()];
        let mut rule_index = HashMap::new();
        for (i, r) in binary.iter().enumerate() {
            by_left[r.left as usize].push(i as u32);
            rule_index.insert((r.lhs, r.left, r.right), i as u32);
        }
        PcfgModel {
            labels,
            label_ids,
            root_rules,
            binary,
            by_left,
            rule_index,
            lexicon,
            signatures,
            preterminals,
            emitters,
            rare,
            fallback_root,
        }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, id: u32) -> &str {
        &self.labels[id as usize]
    }

    pub fn label_id(&self, label: &str) -> Option<u32> {
        self.label_ids.get(label).copied()
    }

    pub fn root_rules(&self) -> &[(u32, f64)] {
        &self.root_rules
    }

    pub fn binary_rules(&self) -> &[BinaryRule] {
        &self.binary
    }

    pub fn is_known_word(&self, word: &str) -> bool {
        self.lexicon.contains_key(word)
    }

    /// Probability of `lhs -> left right` in probability space.
    pub fn rule_prob(&self, lhs: &str, left: &str, right: &str) -> Option<f64> {
        let key = (self.label_id(lhs)?, self.label_id(left)?, self.label_id(right)?);
        self.rule_index
            .get(&key)
            .map(|&i| 10f64.powf(self.binary[i as usize].log10_prob))
    }

    /// Candidate preterminals for a word with their log10 emission scores:
    /// observed counts plus the signature and generic unknown-class
    /// probabilities, the latter scaled down for frequent known words.
    /// Every preterminal label shares the scores of its innermost tag.
    pub fn lexical_scores(&self, word: &str) -> Vec<(u32, f64)> {
        let observed = self.lexicon.get(word);
        let generic = &self.signatures[GENERIC_UNKNOWN];
        let specific = self.signatures.get(&signature(word));
        let find = |v: Option<&Vec<(u32, f64)>>, tag: u32| {
            v.and_then(|v| v.iter().find(|e| e.0 == tag)).map_or(0.0, |e| 10f64.powf(e.1))
        };
        let backoff = match observed {
            Some(_) if !self.rare.contains(word) => KNOWN_BACKOFF,
            _ => 1.0,
        };
        let by_tag: Vec<(u32, f64)> = generic
            .iter()
            .map(|&(tag, p)| {
                let total = backoff * (10f64.powf(p) + find(specific, tag)) + find(observed, tag);
                (tag, total.log10())
            })
            .collect();
        let mut out: Vec<(u32, f64)> = by_tag
            .into_iter()
            .flat_map(|(tag, p)| self.emitters[tag as usize].iter().map(move |&l| (l, p)))
            .collect();
        out.sort_by_key(|e| e.0);
        out
    }

    fn lexical_score(&self, word: &str, tag: u32) -> Option<f64> {
        self.lexical_scores(word).into_iter().find(|e| e.0 == tag).map(|e| e.1)
    }

    /// log10 probability of a complete tree, computed by walking its
    /// grammar form. `None` if the tree uses anything the model lacks.
    pub fn tree_log10_prob(&self, tree: &Tree) -> Option<f64> {
        let bin = binarize(tree);
        let root = self.label_id(bin.label())?;
        let root_p = self.root_rules.iter().find(|r| r.0 == root)?.1;
        Some(root_p + self.subtree_log10_prob(&bin)?)
    }

    fn subtree_log10_prob(&self, tree: &Tree) -> Option<f64> {
        let lhs = self.label_id(tree.label())?;
        if tree.is_preterminal() {
            return self.lexical_score(tree.children()[0].label(), lhs);
        }
        let [l, r] = tree.children() else { return None };
        let key = (lhs, self.label_id(l.label())?, self.label_id(r.label())?);
        let rule = &self.binary[*self.rule_index.get(&key)? as usize];
        Some(rule.log10_prob + self.subtree_log10_prob(l)? + self.subtree_log10_prob(r)?)
    }

    /// Highest-probability tree for `sentence`.
    pub fn parse_sentence(&self, sentence: &[String]) -> Result<ParseOutcome, GrammarError> {
        if sentence.is_empty() {
            return Err(GrammarError::EmptySentence);
        }
        match self.viterbi(sentence) {
            Some((bin, score)) => Ok(ParseOutcome {
                tree: debinarize(&bin)?,
                log10_prob: Some(score),
                fallback: false,
            }),
            None => Ok(ParseOutcome {
                tree: self.fallback_tree(sentence),
                log10_prob: None,
                fallback: true,
            }),
        }
    }

    fn fallback_tree(&self, sentence: &[String]) -> Tree {
        let mut pts: Vec<Tree> = sentence
            .iter()
            .map(|w| {
                let best = self
                    .lexical_scores(w)
                    .into_iter()
                    .fold(None::<(u32, f64)>, |b, e| match b {
                        Some(bb) if bb.1 >= e.1 => Some(bb),
                        _ => Some(e),
                    });
                let tag = best.map_or(FALLBACK_LABEL, |(t, _)| self.label(t));
                // Composite preterminals keep only their innermost tag.
                let tag = tag.rsplit(UNARY_JOIN).next().unwrap();
                Tree::preterminal(tag, w.clone())
            })
            .collect();
        let body = if pts.len() == 1 {
            pts.pop().unwrap()
        } else {
            let mut acc = pts.pop().unwrap();
            while let Some(pt) = pts.pop() {
                acc = Tree::node(FALLBACK_LABEL, vec![pt, acc]);
            }
            acc
        };
        Tree::node(self.fallback_root.clone(), vec![body])
    }

    /// Persisted form: header, rules as `lhs rhs... log10prob` lines, the
    /// preterminal labels and rare words one per line, then lexicon and
    /// signature sections of `tag word log10prob` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{FORMAT_HEADER}").unwrap();
        writeln!(out, "start {START}").unwrap();
        writeln!(out, "fallback-root {}", self.fallback_root).unwrap();
        writeln!(out, "rules {}", self.root_rules.len() + self.binary.len()).unwrap();
        for &(l, p) in &self.root_rules {
            writeln!(out, "{START} {} {p}", self.label(l)).unwrap();
        }
        for r in &self.binary {
            writeln!(
                out,
                "{} {} {} {}",
                self.label(r.lhs),
                self.label(r.left),
                self.label(r.right),
                r.log10_prob
            )
            .unwrap();
        }
        writeln!(out, "preterminals {}", self.preterminals.len()).unwrap();
        for &p in &self.preterminals {
            writeln!(out, "{}", self.label(p)).unwrap();
        }
        writeln!(out, "rare {}", self.rare.len()).unwrap();
        for w in &self.rare {
            writeln!(out, "{w}").unwrap();
        }
        for (name, table) in [("lexicon", &self.lexicon), ("signatures", &self.signatures)] {
            let mut lines: Vec<(u32, &str, f64)> = table
                .iter()
                .flat_map(|(w, v)| v.iter().map(move |&(t, p)| (t, w.as_str(), p)))
                .collect();
            lines.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
            writeln!(out, "{name} {}", lines.len()).unwrap();
            for (t, w, p) in lines {
                writeln!(out, "{} {w} {p}", self.label(t)).unwrap();
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<PcfgModel, GrammarError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let err = |line: usize, message: &str| GrammarError::ModelFormat {
            line,
            message: message.to_string(),
        };
        let mut next = |expect: &str| -> Result<(usize, Vec<String>), GrammarError> {
            let (n, l) = lines.next().ok_or_else(|| err(0, &format!("missing {expect}")))?;
            Ok((n, l.split_whitespace().map(str::to_string).collect()))
        };
        let (n, header) = next("header")?;
        if header.join(" ") != FORMAT_HEADER {
            return Err(err(n, "unsupported header"));
        }
        let (n, start) = next("start")?;
        if start != ["start", START] {
            return Err(err(n, "bad start line"));
        }
        let (n, fb) = next("fallback-root")?;
        let fallback_root = match fb.as_slice() {
            [k, v] if k == "fallback-root" => v.clone(),
            _ => return Err(err(n, "bad fallback-root line")),
        };
        let section = |fields: &[String], n: usize, name: &str| -> Result<usize, GrammarError> {
            match fields {
                [k, c] if k == name => c.parse().map_err(|_| err(n, "bad section count")),
                _ => Err(err(n, &format!("expected {name} section"))),
            }
        };
        let prob = |s: &str, n: usize| -> Result<f64, GrammarError> {
            s.parse::<f64>().map_err(|_| err(n, "bad probability"))
        };

        let (n, f) = next("rules")?;
        let rule_count = section(&f, n, "rules")?;
        let mut raw_rules = Vec::with_capacity(rule_count);
        for _ in 0..rule_count {
            let (n, f) = next("rule")?;
            match f.as_slice() {
                [lhs, rhs, p] if lhs == START => raw_rules.push((None, rhs.clone(), None, prob(p, n)?)),
                [lhs, l, r, p] => raw_rules.push((Some(lhs.clone()), l.clone(), Some(r.clone()), prob(p, n)?)),
                _ => return Err(err(n, "bad rule line")),
            }
        }
        let mut lists = Vec::new();
        for name in ["preterminals", "rare"] {
            let (n, f) = next(name)?;
            let count = section(&f, n, name)?;
            let mut items = Vec::with_capacity(count);
            for _ in 0..count {
                let (n, f) = next("item")?;
                match f.as_slice() {
                    [x] => items.push(x.clone()),
                    _ => return Err(err(n, &format!("bad {name} line"))),
                }
            }
            lists.push(items);
        }
        let rare: BTreeSet<String> = lists.pop().unwrap().into_iter().collect();
        let preterminal_labels = lists.pop().unwrap();
        let mut tables = Vec::new();
        for name in ["lexicon", "signatures"] {
            let (n, f) = next(name)?;
            let count = section(&f, n, name)?;
            let mut entries = Vec::with_capacity(count);
            for _ in 0..count {
                let (n, f) = next("entry")?;
                match f.as_slice() {
                    [t, w, p] => entries.push((t.clone(), w.clone(), prob(p, n)?)),
                    _ => return Err(err(n, "bad lexical line")),
                }
            }
            tables.push(entries);
        }

        let mut label_set = BTreeSet::new();
        for (lhs, l, r, _) in &raw_rules {
            label_set.extend(lhs.iter().cloned());
            label_set.insert(l.clone());
            label_set.extend(r.iter().cloned());
        }
        for (t, _, _) in tables.iter().flatten() {
            label_set.insert(t.clone());
        }
        label_set.extend(preterminal_labels.iter().cloned());
        let labels: Vec<String> = label_set.into_iter().collect();
        let ids: HashMap<&str, u32> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i as u32)).collect();

        let mut root_rules = Vec::new();
        let mut binary = Vec::new();
        for (lhs, l, r, p) in raw_rules {
            match (lhs, r) {
                (Some(lhs), Some(r)) => binary.push(BinaryRule {
                    lhs: ids[lhs.as_str()],
                    left: ids[l.as_str()],
                    right: ids[r.as_str()],
                    log10_prob: p,
                }),
                _ => root_rules.push((ids[l.as_str()], p)),
            }
        }
        root_rules.sort_by_key(|r| r.0);
        let mut maps = tables.into_iter().map(|entries| {
            let mut m: BTreeMap<String, Vec<(u32, f64)>> = BTreeMap::new();
            for (t, w, p) in entries {
                m.entry(w).or_default().push((ids[t.as_str()], p));
            }
            m
        });
        let lexicon = maps.next().unwrap();
        let signatures = maps.next().unwrap();
        if !signatures.contains_key(GENERIC_UNKNOWN) {
            return Err(err(0, "signatures section lacks the generic unknown class"));
        }
        let preterminals = preterminal_labels.iter().map(|l| ids[l.as_str()]).collect();
        Ok(PcfgModel::assemble(
            labels,
            root_rules,
            binary,
            lexicon,
            signatures,
            preterminals,
            rare,
            fallback_root,
        ))
    }
}

/// The built-in learner: a smoothed PCFG. Deterministic, so the seed is
/// unused.
#[derive(Debug, Clone, Copy)]
pub struct PcfgLearner {
    pub smoothing: f64,
}

impl Default for PcfgLearner {
    fn default() -> Self {
        PcfgLearner {
            smoothing: DEFAULT_SMOOTHING,
        }
    }
}

impl Learner for PcfgLearner {
    type Model = PcfgModel;

    fn induce(&self, corpus: &Corpus, _seed: u64) -> Result<PcfgModel, GrammarError> {
        PcfgModel::induce(corpus, self.smoothing)
    }
}

impl ParserModel for PcfgModel {
    fn parse(&self, sentence: &[String]) -> Result<ParseOutcome, GrammarError> {
        self.parse_sentence(sentence)
    }

    fn to_text(&self) -> String {
        PcfgModel::to_text(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::parse_bracketed;

    fn corpus(lines: &[&str]) -> Corpus {
        Corpus::from_trees(lines.iter().map(|l| parse_bracketed(l).unwrap().remove(0))).unwrap()
    }

    fn words(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn single_tree_grammar_reproduces_it() {
        let gold = "(TOP (A (B x) (C y)))";
        let model = PcfgModel::induce(&corpus(&[gold]), DEFAULT_SMOOTHING).unwrap();
        let out = model.parse_sentence(&words("x y")).unwrap();
        assert!(!out.fallback);
        assert_eq!(out.tree.to_bracketed(), gold);
    }

    #[test]
    fn relative_frequencies_with_smoothing() {
        let c = corpus(&[
            "(TOP (A (B x) (C y)))",
            "(TOP (A (B z) (C w)))",
            "(TOP (A (C y) (B x)))",
        ]);
        let model = PcfgModel::induce(&c, DEFAULT_SMOOTHING).unwrap();
        let lam = DEFAULT_SMOOTHING;
        let expected = (2.0 + lam) / (3.0 + 2.0 * lam);
        let got = model.rule_prob("TOP+A", "B", "C").unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 2.0 / 3.0).abs() < 1e-3);
        let other = model.rule_prob("TOP+A", "C", "B").unwrap();
        assert!((got + other - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rule_tables_are_normalized() {
        let c = corpus(&[
            "(TOP (S (NP (D the) (N dog)) (VP (V ran))))",
            "(TOP (S (NP (D a) (A big) (N cat)) (VP (V sat) (PP (P on) (NP (N mats))))))",
            "(TOP (S (NP (N Bob)) (VP (V sat))))",
        ]);
        let model = PcfgModel::induce(&c, DEFAULT_SMOOTHING).unwrap();
        let mut sums: BTreeMap<u32, f64> = BTreeMap::new();
        for r in model.binary_rules() {
            assert!(r.log10_prob <= 0.0);
            *sums.entry(r.lhs).or_default() += 10f64.powf(r.log10_prob);
        }
        for s in sums.values() {
            assert!((s - 1.0).abs() < 1e-9);
        }
        let root: f64 = model.root_rules().iter().map(|r| 10f64.powf(r.1)).sum();
        assert!((root - 1.0).abs() < 1e-9);

        let mut tag_sums: BTreeMap<u32, f64> = BTreeMap::new();
        for v in model.lexicon.values().chain(model.signatures.values()) {
            for &(t, p) in v {
                *tag_sums.entry(t).or_default() += 10f64.powf(p);
            }
        }
        for s in tag_sums.values() {
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn unseen_word_still_parses() {
        let c = corpus(&[
            "(TOP (S (NP (D the) (N dog)) (VP (V barked))))",
            "(TOP (S (NP (D the) (N cat)) (VP (V purred))))",
        ]);
        let model = PcfgModel::induce(&c, DEFAULT_SMOOTHING).unwrap();
        let sentence = words("the zebra barked");
        let out = model.parse_sentence(&sentence).unwrap();
        assert!(!out.fallback);
        assert_eq!(out.tree.words(), sentence);
        assert_eq!(out.tree.to_bracketed(), "(TOP (S (NP (D the) (N zebra)) (VP (V barked))))");
    }

    #[test]
    fn empty_inputs_are_errors() {
        assert_eq!(
            PcfgModel::induce(&Corpus::new(), DEFAULT_SMOOTHING).unwrap_err(),
            GrammarError::EmptyCorpus
        );
        let model = PcfgModel::induce(&corpus(&["(TOP (X a))"]), DEFAULT_SMOOTHING).unwrap();
        assert_eq!(model.parse_sentence(&[]).unwrap_err(), GrammarError::EmptySentence);
    }

    #[test]
    fn reserved_labels_are_rejected() {
        let c = corpus(&["(TOP (A+B (X a)))"]);
        assert!(matches!(
            PcfgModel::induce(&c, DEFAULT_SMOOTHING),
            Err(GrammarError::ReservedLabel(_))
        ));
    }

    #[test]
    fn empty_chart_falls_back() {
        // Only two-word sentences are derivable.
        let model = PcfgModel::induce(&corpus(&["(TOP (S (A a) (B b)))"]), DEFAULT_SMOOTHING).unwrap();
        let sentence = words("a b a");
        let out = model.parse_sentence(&sentence).unwrap();
        assert!(out.fallback);
        assert_eq!(out.log10_prob, None);
        assert_eq!(out.tree.words(), sentence);
        assert_eq!(out.tree.to_bracketed(), "(TOP (JUNK (A a) (JUNK (B b) (A a))))");
    }

    #[test]
    fn signatures() {
        assert_eq!(signature("walked"), "UNK-ed");
        assert_eq!(signature("Paris"), "UNK-C-is");
        assert_eq!(signature("7/8"), "UNK-D-/8");
        assert_eq!(signature("a"), "UNK-a");
    }

    #[test]
    fn text_round_trip_is_exact() {
        let c = corpus(&[
            "(TOP (S (NP (D the) (N dog)) (VP (V ran))))",
            "(TOP (S (NP (D a) (A big) (N cat)) (VP (V sat) (PP (P on) (NP (N mats))))))",
        ]);
        let model = PcfgModel::induce(&c, DEFAULT_SMOOTHING).unwrap();
        let text = model.to_text();
        let back = PcfgModel::from_text(&text).unwrap();
        assert_eq!(back, model);
        assert_eq!(back.to_text(), text);
        assert!(text.starts_with("pcfg-model v1\nstart @ROOT\n"));
        assert!(PcfgModel::from_text("garbage").is_err());
    }

    #[test]
    fn tree_probability_matches_parse_score() {
        let c = corpus(&["(TOP (S (NP (D the) (N dog)) (VP (V ran))))"]);
        let model = PcfgModel::induce(&c, DEFAULT_SMOOTHING).unwrap();
        let out = model.parse_sentence(&words("the dog ran")).unwrap();
        let direct = model.tree_log10_prob(&out.tree).unwrap();
        assert!((direct - out.log10_prob.unwrap()).abs() < 1e-12);
    }
}
