//! Exact Viterbi decoding over the binarized grammar.
//!
//! Ties between equal-scoring derivations of one chart item go to the lower
//! (rule index, split point) pair; rule indices follow the lexicographically
//! sorted rule table.

use super::pcfg::PcfgModel;
use crate::treebank::Tree;

const NONE: u32 = u32::MAX;
const LEXICAL: u32 = u32::MAX - 1;

#[derive(Clone, Copy)]
struct Back {
    rule: u32,
    split: u32,
}

struct Chart {
    n: usize,
    labels: usize,
    score: Vec<f64>,
    back: Vec<Back>,
    active: Vec<Vec<u32>>,
}

impl Chart {
    fn new(n: usize, labels: usize) -> Self {
        let cells = (n + 1) * (n + 1);
        Chart {
            n,
            labels,
            score: vec![f64::NEG_INFINITY; cells * labels],
            back: vec![Back { rule: NONE, split: 0 }; cells * labels],
            active: vec![Vec::new(); cells],
        }
    }

    #[inline]
    fn cell(&self, i: usize, j: usize) -> usize {
        i * (self.n + 1) + j
    }

    #[inline]
    fn slot(&self, cell: usize, label: u32) -> usize {
        cell * self.labels + label as usize
    }
}

impl PcfgModel {
    /// Best binarized tree and its log10 probability, or `None` when no
    /// complete derivation exists.
    pub(super) fn viterbi(&self, words: &[String]) -> Option<(Tree, f64)> {
        let n = words.len();
        let mut chart = Chart::new(n, self.labels.len());

        for (i, w) in words.iter().enumerate() {
            let cell = chart.cell(i, i + 1);
            for (tag, p) in self.lexical_scores(w) {
                let s = chart.slot(cell, tag);
                chart.score[s] = p;
                chart.back[s] = Back { rule: LEXICAL, split: 0 };
                chart.active[cell].push(tag);
            }
        }

        for len in 2..=n {
            for i in 0..=n - len {
                let j = i + len;
                let cell = chart.cell(i, j);
                for k in i + 1..j {
                    let left = chart.cell(i, k);
                    let right = chart.cell(k, j);
                    for li in 0..chart.active[left].len() {
                        let b = chart.active[left][li];
                        let left_score = chart.score[chart.slot(left, b)];
                        for &r in &self.by_left[b as usize] {
                            let rule = &self.binary[r as usize];
                            let right_score = chart.score[chart.slot(right, rule.right)];
                            if right_score == f64::NEG_INFINITY {
                                continue;
                            }
                            let cand = left_score + right_score + rule.log10_prob;
                            let s = chart.slot(cell, rule.lhs);
                            let cur = chart.score[s];
                            let old = chart.back[s];
                            let better = cand > cur
                                || (cand == cur && (r, k as u32) < (old.rule, old.split));
                            if better {
                                if old.rule == NONE {
                                    chart.active[cell].push(rule.lhs);
                                }
                                chart.score[s] = cand;
                                chart.back[s] = Back {
                                    rule: r,
                                    split: k as u32,
                                };
                            }
                        }
                    }
                }
            }
        }

        let top = chart.cell(0, n);
        let mut best: Option<(u32, f64)> = None;
        for &(label, p) in &self.root_rules {
            let s = chart.score[chart.slot(top, label)];
            if s == f64::NEG_INFINITY {
                continue;
            }
            let cand = s + p;
            if best.is_none_or(|(_, b)| cand > b) {
                best = Some((label, cand));
            }
        }
        let (root, score) = best?;
        Some((self.build(&chart, words, 0, n, root), score))
    }

    fn build(&self, chart: &Chart, words: &[String], i: usize, j: usize, label: u32) -> Tree {
        let back = chart.back[chart.slot(chart.cell(i, j), label)];
        let name = self.labels[label as usize].clone();
        if back.rule == LEXICAL {
            return Tree::preterminal(name, words[i].clone());
        }
        let rule = &self.binary[back.rule as usize];
        let k = back.split as usize;
        Tree::node(
            name,
            vec![
                self.build(chart, words, i, k, rule.left),
                self.build(chart, words, k, j, rule.right),
            ],
        )
    }
}
