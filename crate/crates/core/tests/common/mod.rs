#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use parse_ensemble::boosting::AgreementStats;
use parse_ensemble::combine::ConstituentSet;
use parse_ensemble::grammar::PcfgModel;
use parse_ensemble::seed::{self, Rng};
use parse_ensemble::treebank::{Constituent, ScoringPolicy, Tree};
use rand::Rng as _;

pub const PHRASES: [&str; 6] = ["S", "NP", "VP", "PP", "SBAR", "X"];
pub const TAGS: [&str; 6] = ["D", "N", "V", "P", "PU", "CD"];
pub const WORDS: [&str; 8] = ["the", "dog", "saw", "a", "cat", ",", "7/8", "in"];

pub fn rng(seed: u64) -> Rng {
    seed::rng(seed)
}

pub fn random_words(rng: &mut Rng, n: usize) -> Vec<String> {
    (0..n).map(|_| WORDS[rng.random_range(0..WORDS.len())].to_string()).collect()
}

fn random_span(rng: &mut Rng, words: &[String], depth: usize) -> Tree {
    let tree = if words.len() == 1 {
        Tree::preterminal(TAGS[rng.random_range(0..TAGS.len())], words[0].clone())
    } else {
        let parts = rng.random_range(2..=words.len().min(4));
        let mut cuts: BTreeSet<usize> = BTreeSet::new();
        while cuts.len() < parts - 1 {
            cuts.insert(rng.random_range(1..words.len()));
        }
        let mut bounds = vec![0];
        bounds.extend(cuts);
        bounds.push(words.len());
        let children = bounds
            .windows(2)
            .map(|w| random_span(rng, &words[w[0]..w[1]], depth + 1))
            .collect();
        Tree::node(PHRASES[rng.random_range(0..PHRASES.len())], children)
    };
    if depth > 0 && rng.random_bool(0.15) {
        Tree::node(PHRASES[rng.random_range(0..PHRASES.len())], vec![tree])
    } else {
        tree
    }
}

/// A random tree over `words`, usually under a TOP root.
pub fn random_tree_over(rng: &mut Rng, words: &[String]) -> Tree {
    let body = random_span(rng, words, 1);
    if rng.random_bool(0.8) {
        Tree::node("TOP", vec![body])
    } else {
        body
    }
}

pub fn random_tree(rng: &mut Rng, max_words: usize) -> Tree {
    let n = rng.random_range(1..=max_words);
    let words = random_words(rng, n);
    random_tree_over(rng, &words)
}

/// Spans by walking the tree with a word counter; punctuation
/// preterminals are dropped and nodes left without words vanish.
pub fn oracle_constituents(tree: &Tree, policy: &ScoringPolicy) -> BTreeSet<(String, usize, usize)> {
    fn walk(
        t: &Tree,
        root: bool,
        at: &mut usize,
        p: &ScoringPolicy,
        out: &mut BTreeSet<(String, usize, usize)>,
    ) {
        let Tree::Node { label, children } = t else {
            *at += 1;
            return;
        };
        let preterminal = children.len() == 1 && matches!(children[0], Tree::Leaf(_));
        if preterminal && p.punctuation.contains(label) {
            return;
        }
        let start = *at;
        for c in children {
            walk(c, false, at, p, out);
        }
        if *at == start {
            return;
        }
        if root && p.root_label.as_deref() == Some(label) {
            return;
        }
        if preterminal && !p.count_preterminals {
            return;
        }
        out.insert((label.clone(), start, *at));
    }
    let mut out = BTreeSet::new();
    walk(tree, true, &mut 0, policy, &mut out);
    out
}

/// (a, b, c) by set intersection and differences.
pub fn oracle_counts(gold: &Tree, hyp: &Tree, policy: &ScoringPolicy) -> (usize, usize, usize) {
    let g = oracle_constituents(gold, policy);
    let h = oracle_constituents(hyp, policy);
    let a = g.intersection(&h).count();
    (a, h.difference(&g).count(), g.difference(&h).count())
}

pub fn crossing(a: &Constituent, b: &Constituent) -> bool {
    (a.start < b.start && b.start < a.end && a.end < b.end) || (b.start < a.start && a.start < b.end && b.end < a.end)
}

pub fn has_crossing(set: &ConstituentSet) -> bool {
    let v: Vec<&Constituent> = set.iter().collect();
    (0..v.len()).any(|i| (i + 1..v.len()).any(|j| crossing(v[i], v[j])))
}

/// Non-crossing constituent set of a random tree over `n` words, root
/// and preterminals excluded.
pub fn random_member_set(rng: &mut Rng, n: usize) -> ConstituentSet {
    let words = random_words(rng, n);
    random_tree_over(rng, &words).constituents(&ScoringPolicy::default())
}

pub fn random_stats(rng: &mut Rng) -> AgreementStats {
    let union = rng.random_range(0..12);
    let agreements = if union == 0 { 0 } else { rng.random_range(0..=union) };
    AgreementStats {
        union,
        agreements,
        disagreements: union - agreements,
    }
}

pub fn random_distribution(rng: &mut Rng, m: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..m).map(|_| rng.random_range(0.01..1.0)).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / sum).collect()
}

/// The mixing coefficient written as two nested sums over entries and
/// their union constituents: Σ_i Σ_c D(i)/|T_i|·[c disagrees] over the
/// same sum for agreements. `None` when nothing agrees.
pub fn literal_alpha(stats: &[AgreementStats], d: &[f64]) -> Option<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for (s, &w) in stats.iter().zip(d) {
        for c in 0..s.union {
            let share = w / s.union as f64;
            if c < s.agreements {
                den += share;
            } else {
                num += share;
            }
        }
    }
    (den > 0.0).then(|| num / den)
}

/// Every derivation of every span, listed without any max-merging, then
/// the best complete derivation's log10 score through the start rules.
pub fn brute_force_best(model: &PcfgModel, words: &[String]) -> Option<f64> {
    let n = words.len();
    let mut cells: HashMap<(usize, usize), Vec<(u32, f64)>> = HashMap::new();
    for (i, w) in words.iter().enumerate() {
        cells.insert((i, i + 1), model.lexical_scores(w));
    }
    for len in 2..=n {
        for i in 0..=n - len {
            let j = i + len;
            let mut all = Vec::new();
            for k in i + 1..j {
                for &(l, sl) in &cells[&(i, k)] {
                    for &(r, sr) in &cells[&(k, j)] {
                        for rule in model.binary_rules().iter().filter(|x| x.left == l && x.right == r) {
                            all.push((rule.lhs, rule.log10_prob + sl + sr));
                        }
                    }
                }
            }
            cells.insert((i, j), all);
        }
    }
    let roots: HashMap<u32, f64> = model.root_rules().iter().copied().collect();
    cells[&(0, n)]
        .iter()
        .filter_map(|&(label, s)| roots.get(&label).map(|r| r + s))
        .fold(None, |best: Option<f64>, s| Some(best.map_or(s, |b| b.max(s))))
}
