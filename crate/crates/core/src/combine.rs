//! Constituent voting and reconstruction of a tree from the winners.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::treebank::{Constituent, ScoringPolicy, Tree};

pub type ConstituentSet = BTreeSet<Constituent>;

/// Relative slack on the majority threshold so that float summation order
/// cannot turn an exact tie into a win.
const TIE_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CombineError {
    #[error("no hypotheses to combine")]
    NoHypotheses,
    #[error("{sets} hypothesis sets but {weights} weights")]
    WeightCount { sets: usize, weights: usize },
    #[error("member {index} has non-positive weight {weight}")]
    BadWeight { index: usize, weight: f64 },
    #[error("winning constituents {0} and {1} cross")]
    Crossing(Constituent, Constituent),
    #[error("constituent {0} lies outside a sentence of {1} words")]
    OutOfRange(Constituent, usize),
    #[error("member {index} hypothesis has {got} words, expected {expected}")]
    MemberLength { index: usize, got: usize, expected: usize },
}

/// Accumulated vote mass per constituent. Each member contributes its
/// weight at most once per distinct constituent.
#[derive(Debug, Clone, Default)]
pub struct VoteTally {
    mass: BTreeMap<Constituent, f64>,
    first_seen: BTreeMap<Constituent, usize>,
    total: f64,
}

impl VoteTally {
    pub fn new(sets: &[ConstituentSet], weights: &[f64]) -> Result<Self, CombineError> {
        let lists: Vec<Vec<Constituent>> = sets.iter().map(|s| s.iter().cloned().collect()).collect();
        VoteTally::from_lists(&lists, weights)
    }

    /// Like [`VoteTally::new`], with first appearance taken from the order
    /// of each member's list (pre-order for tree-derived lists).
    pub fn from_lists(lists: &[Vec<Constituent>], weights: &[f64]) -> Result<Self, CombineError> {
        if lists.is_empty() {
            return Err(CombineError::NoHypotheses);
        }
        if lists.len() != weights.len() {
            return Err(CombineError::WeightCount {
                sets: lists.len(),
                weights: weights.len(),
            });
        }
        let mut tally = VoteTally::default();
        let mut order = 0;
        for (index, (list, &w)) in lists.iter().zip(weights).enumerate() {
            if !(w > 0.0 && w.is_finite()) {
                return Err(CombineError::BadWeight { index, weight: w });
            }
            tally.total += w;
            let mut seen = BTreeSet::new();
            for c in list {
                if !seen.insert(c) {
                    continue;
                }
                *tally.mass.entry(c.clone()).or_default() += w;
                tally.first_seen.entry(c.clone()).or_insert_with(|| {
                    order += 1;
                    order
                });
            }
        }
        Ok(tally)
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn mass(&self, c: &Constituent) -> f64 {
        self.mass.get(c).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Constituent, f64)> {
        self.mass.iter().map(|(c, &m)| (c, m))
    }

    /// Constituents holding strictly more than half of the total mass.
    pub fn winners(&self) -> ConstituentSet {
        let half = 0.5 * self.total;
        self.mass
            .iter()
            .filter(|(_, &m)| m - half > TIE_EPS * self.total)
            .map(|(c, _)| c.clone())
            .collect()
    }

    /// Order key for nesting equal-span winners: more mass outside, then
    /// earlier first appearance.
    fn nesting_key(&self, c: &Constituent) -> (f64, usize) {
        (-self.mass(c), self.first_seen.get(c).copied().unwrap_or(usize::MAX))
    }
}

/// Constituents found in strictly more than half of the sets.
pub fn vote_unweighted(sets: &[ConstituentSet]) -> Result<ConstituentSet, CombineError> {
    if sets.is_empty() {
        return Err(CombineError::NoHypotheses);
    }
    let mut counts: BTreeMap<&Constituent, usize> = BTreeMap::new();
    for set in sets {
        for c in set {
            *counts.entry(c).or_default() += 1;
        }
    }
    Ok(counts
        .into_iter()
        .filter(|&(_, n)| 2 * n > sets.len())
        .map(|(c, _)| c.clone())
        .collect())
}

/// Constituents whose summed member weight exceeds half the total weight.
pub fn vote_weighted(sets: &[ConstituentSet], weights: &[f64]) -> Result<ConstituentSet, CombineError> {
    Ok(VoteTally::new(sets, weights)?.winners())
}

pub fn find_crossing(set: &ConstituentSet) -> Option<(Constituent, Constituent)> {
    let items: Vec<&Constituent> = set.iter().collect();
    for (i, a) in items.iter().enumerate() {
        for b in &items[i + 1..] {
            if a.crosses(b) {
                return Some(((*a).clone(), (*b).clone()));
            }
        }
    }
    None
}

/// Voting ignores punctuation deletion so spans index the real words.
pub fn voting_policy(policy: &ScoringPolicy) -> ScoringPolicy {
    ScoringPolicy {
        punctuation: BTreeSet::new(),
        ..policy.clone()
    }
}

/// Per-word preterminal by weighted plurality over the members; ties go to
/// the tag proposed by the lowest-index member.
pub fn vote_preterminals(
    members: &[Tree],
    weights: &[f64],
    n: usize,
) -> Result<Vec<String>, CombineError> {
    let member_tags: Vec<Vec<String>> = members.iter().map(Tree::tags).collect();
    for (index, tags) in member_tags.iter().enumerate() {
        if tags.len() != n {
            return Err(CombineError::MemberLength {
                index,
                got: tags.len(),
                expected: n,
            });
        }
    }
    Ok((0..n)
        .map(|i| {
            let mut votes: Vec<(&str, f64, usize)> = Vec::new();
            for (m, tags) in member_tags.iter().enumerate() {
                let w = weights.get(m).copied().unwrap_or(1.0);
                match votes.iter_mut().find(|v| v.0 == tags[i]) {
                    Some(v) => v.1 += w,
                    None => votes.push((&tags[i], w, m)),
                }
            }
            votes
                .iter()
                .fold(None::<&(&str, f64, usize)>, |best, v| match best {
                    Some(b) if b.1 > v.1 || (b.1 == v.1 && b.2 < v.2) => Some(b),
                    _ => Some(v),
                })
                .map(|v| v.0.to_string())
                .unwrap_or_default()
        })
        .collect())
}

/// Builds a tree containing every winning constituent. The root carries
/// `root_label`; preterminals come from [`vote_preterminals`]; equal-span
/// winners nest by descending mass in `tally`, then first appearance.
pub fn build_tree(
    winners: &ConstituentSet,
    sentence: &[String],
    root_label: &str,
    tags: &[String],
    tally: Option<&VoteTally>,
) -> Result<Tree, CombineError> {
    let n = sentence.len();
    if let Some((a, b)) = find_crossing(winners) {
        return Err(CombineError::Crossing(a, b));
    }
    if tags.len() != n {
        return Err(CombineError::MemberLength {
            index: 0,
            got: tags.len(),
            expected: n,
        });
    }
    let mut items: Vec<&Constituent> = Vec::with_capacity(winners.len());
    for c in winners {
        if c.end > n {
            return Err(CombineError::OutOfRange(c.clone(), n));
        }
        let is_root = c.start == 0 && c.end == n && c.label == root_label;
        let is_tag = c.end - c.start == 1 && c.label == tags[c.start];
        if !is_root && !is_tag {
            items.push(c);
        }
    }
    let empty = VoteTally::default();
    let tally = tally.unwrap_or(&empty);
    items.sort_by(|a, b| {
        (a.start, std::cmp::Reverse(a.end))
            .cmp(&(b.start, std::cmp::Reverse(b.end)))
            .then_with(|| {
                let (ma, fa) = tally.nesting_key(a);
                let (mb, fb) = tally.nesting_key(b);
                ma.total_cmp(&mb).then(fa.cmp(&fb))
            })
            .then_with(|| a.label.cmp(&b.label))
    });
    let mut next = 0;
    let children = build_span(0, n, &items, &mut next, sentence, tags);
    Ok(Tree::node(root_label, children))
}

fn build_span(
    lo: usize,
    hi: usize,
    items: &[&Constituent],
    next: &mut usize,
    sentence: &[String],
    tags: &[String],
) -> Vec<Tree> {
    let mut out = Vec::new();
    let mut pos = lo;
    while pos < hi {
        match items.get(*next) {
            Some(c) if c.start == pos && c.end <= hi => {
                *next += 1;
                let inner = build_span(c.start, c.end, items, next, sentence, tags);
                out.push(Tree::node(c.label.clone(), inner));
                pos = c.end;
            }
            _ => {
                out.push(Tree::preterminal(tags[pos].clone(), sentence[pos].clone()));
                pos += 1;
            }
        }
    }
    out
}

/// Votes over member parses of one sentence and rebuilds a tree. Equal
/// weights reduce to the unweighted scheme; unanimous members yield their
/// common tree unchanged.
pub fn combine_trees(
    members: &[Tree],
    weights: Option<&[f64]>,
    policy: &ScoringPolicy,
) -> Result<Tree, CombineError> {
    let first = members.first().ok_or(CombineError::NoHypotheses)?;
    let ones = vec![1.0; members.len()];
    let weights = weights.unwrap_or(&ones);
    if weights.len() != members.len() {
        return Err(CombineError::WeightCount {
            sets: members.len(),
            weights: weights.len(),
        });
    }
    if let Some((index, &weight)) = weights.iter().enumerate().find(|(_, &w)| !(w > 0.0 && w.is_finite())) {
        return Err(CombineError::BadWeight { index, weight });
    }
    if members.iter().all(|t| t == first) {
        return Ok(first.clone());
    }
    let sentence = first.words();
    let vp = voting_policy(policy);
    let lists: Vec<Vec<Constituent>> = members.iter().map(|t| t.constituent_list(&vp)).collect();
    let tally = VoteTally::from_lists(&lists, weights)?;
    let winners = if weights.iter().all(|&w| w == 1.0) {
        let sets: Vec<ConstituentSet> = lists.iter().map(|l| l.iter().cloned().collect()).collect();
        vote_unweighted(&sets)?
    } else {
        tally.winners()
    };
    let tags = vote_preterminals(members, weights, sentence.len())?;
    build_tree(&winners, &sentence, policy.root_label_or_default(), &tags, Some(&tally))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::parse_bracketed;

    fn c(label: &str, s: usize, e: usize) -> Constituent {
        Constituent::new(label, s, e)
    }

    fn set(items: &[(&str, usize, usize)]) -> ConstituentSet {
        items.iter().map(|&(l, s, e)| c(l, s, e)).collect()
    }

    fn three_members() -> Vec<ConstituentSet> {
        vec![
            set(&[("S", 0, 4), ("NP", 0, 2), ("VP", 2, 4)]),
            set(&[("S", 0, 4), ("NP", 0, 1), ("VP", 1, 4)]),
            set(&[("S", 0, 4), ("NP", 0, 2), ("VP", 2, 4)]),
        ]
    }

    fn words(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("w{i}")).collect()
    }

    #[test]
    fn single_set_is_returned() {
        let s = set(&[("S", 0, 3), ("NP", 0, 1)]);
        assert_eq!(vote_unweighted(std::slice::from_ref(&s)).unwrap(), s);
    }

    #[test]
    fn majority_of_three() {
        let got = vote_unweighted(&three_members()).unwrap();
        assert_eq!(got, set(&[("S", 0, 4), ("NP", 0, 2), ("VP", 2, 4)]));
    }

    #[test]
    fn two_members_need_both() {
        let a = set(&[("S", 0, 2), ("A", 0, 1)]);
        let b = set(&[("S", 0, 2), ("B", 1, 2)]);
        assert_eq!(vote_unweighted(&[a, b]).unwrap(), set(&[("S", 0, 2)]));
        assert_eq!(vote_unweighted(&[]).unwrap_err(), CombineError::NoHypotheses);
    }

    #[test]
    fn weighted_threshold() {
        let sets = vec![set(&[("X", 0, 2)]), set(&[("Y", 0, 2)]), set(&[("Y", 0, 2)])];
        let got = vote_weighted(&sets, &[0.7, 0.2, 0.1]).unwrap();
        assert_eq!(got, set(&[("X", 0, 2)]));

        let members = three_members();
        let got = vote_weighted(&members, &[0.1, 1.0, 0.1]).unwrap();
        assert_eq!(got, members[1]);
    }

    #[test]
    fn equal_weights_match_unweighted() {
        let members = three_members();
        for w in [0.1, 1.0, 3.7] {
            assert_eq!(
                vote_weighted(&members, &[w; 3]).unwrap(),
                vote_unweighted(&members).unwrap()
            );
        }
        let four: Vec<ConstituentSet> = members.iter().chain(members.iter().take(1)).cloned().collect();
        assert_eq!(
            vote_weighted(&four, &[0.1; 4]).unwrap(),
            vote_unweighted(&four).unwrap()
        );
    }

    #[test]
    fn weights_must_be_positive() {
        let members = three_members();
        assert!(matches!(
            vote_weighted(&members, &[1.0, 0.0, 1.0]),
            Err(CombineError::BadWeight { index: 1, .. })
        ));
        assert!(matches!(
            vote_weighted(&members, &[1.0, -2.0, 1.0]),
            Err(CombineError::BadWeight { index: 1, .. })
        ));
        assert!(matches!(
            vote_weighted(&members, &[1.0]),
            Err(CombineError::WeightCount { .. })
        ));
    }

    #[test]
    fn builds_majority_tree() {
        let winners = vote_unweighted(&three_members()).unwrap();
        let tags: Vec<String> = ["D", "N", "V", "N"].iter().map(|s| s.to_string()).collect();
        let tree = build_tree(&winners, &words(4), "TOP", &tags, None).unwrap();
        assert_eq!(
            tree.to_bracketed(),
            "(TOP (S (NP (D w0) (N w1)) (VP (V w2) (N w3))))"
        );
        let back = tree.constituents(&ScoringPolicy::default());
        assert!(winners.is_subset(&back));
    }

    #[test]
    fn empty_winners_give_flat_tree() {
        let tags: Vec<String> = ["A", "B"].iter().map(|s| s.to_string()).collect();
        let tree = build_tree(&ConstituentSet::new(), &words(2), "TOP", &tags, None).unwrap();
        assert_eq!(tree.to_bracketed(), "(TOP (A w0) (B w1))");
    }

    #[test]
    fn root_is_not_duplicated() {
        let tags: Vec<String> = ["A", "B"].iter().map(|s| s.to_string()).collect();
        let winners = set(&[("TOP", 0, 2), ("S", 0, 2)]);
        let tree = build_tree(&winners, &words(2), "TOP", &tags, None).unwrap();
        assert_eq!(tree.to_bracketed(), "(TOP (S (A w0) (B w1)))");
    }

    #[test]
    fn equal_spans_nest_by_mass() {
        let sets = vec![
            set(&[("VP", 0, 2)]),
            set(&[("S", 0, 2), ("VP", 0, 2)]),
            set(&[("S", 0, 2), ("VP", 0, 2)]),
        ];
        let tally = VoteTally::new(&sets, &[1.0; 3]).unwrap();
        let winners = tally.winners();
        let tags: Vec<String> = ["A", "B"].iter().map(|s| s.to_string()).collect();
        let tree = build_tree(&winners, &words(2), "TOP", &tags, Some(&tally)).unwrap();
        assert_eq!(tree.to_bracketed(), "(TOP (VP (S (A w0) (B w1))))");
    }

    #[test]
    fn crossing_input_is_rejected() {
        let tags: Vec<String> = ["A", "B", "C"].iter().map(|s| s.to_string()).collect();
        let winners = set(&[("X", 0, 2), ("Y", 1, 3)]);
        assert!(matches!(
            build_tree(&winners, &words(3), "TOP", &tags, None),
            Err(CombineError::Crossing(..))
        ));
    }

    #[test]
    fn preterminal_plurality_and_ties() {
        let members: Vec<Tree> = [
            "(TOP (S (A x) (B y)))",
            "(TOP (S (C x) (D y)))",
            "(TOP (S (C x) (B y)))",
            "(TOP (S (A x) (D y)))",
        ]
        .iter()
        .map(|s| parse_bracketed(s).unwrap().remove(0))
        .collect();
        // Two votes each everywhere: the first member's tags win.
        assert_eq!(vote_preterminals(&members, &[1.0; 4], 2).unwrap(), vec!["A", "B"]);
        assert_eq!(
            vote_preterminals(&members, &[1.0, 2.0, 1.0, 1.0], 2).unwrap(),
            vec!["C", "D"]
        );
    }

    #[test]
    fn combine_identical_trees() {
        let t = parse_bracketed("(TOP (S (NP (D a) (N b)) (VP (V c))))").unwrap().remove(0);
        let out = combine_trees(&[t.clone(), t.clone(), t.clone()], None, &ScoringPolicy::default()).unwrap();
        assert_eq!(out, t);
        let out = combine_trees(&[t.clone(), t.clone()], Some(&[0.3, 2.0]), &ScoringPolicy::default()).unwrap();
        assert_eq!(out, t);
    }
}
