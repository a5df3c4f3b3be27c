//! Boosting with constituent accuracy: each round trains on a resample
//! drawn from the current distribution, scores the new parser against the
//! original corpus, and shifts weight toward the sentences it got wrong.

use std::fmt::Write as _;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensemble::{combine_prefix, parse_corpus, prefix_curve, CorpusParses, EnsembleCurve, EnsembleError};
use crate::eval::{score_pair, EvalError};
use crate::grammar::{GrammarError, Learner, ParserModel};
use crate::seed::{self, stream, Rng};
use crate::treebank::{parse_bracketed, Corpus, ScoringPolicy, Tree};

pub const ALPHA_MIN: f64 = 1e-6;
pub const ALPHA_MAX: f64 = 1.0 - 1e-6;
const SUM_TOLERANCE: f64 = 1e-9;
/// Decimal places for every number in the trace file.
pub const TRACE_DECIMALS: usize = 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoostError {
    #[error("invalid distribution: {0}")]
    BadDistribution(String),
    #[error("distribution has {dist} weights for {corpus} entries")]
    SizeMismatch { dist: usize, corpus: usize },
    #[error("rounds must be at least 1")]
    NoRounds,
    #[error("round {round} is unboostable: the parser agrees with no gold constituent")]
    Unboostable { round: usize, trace: Box<BoostTrace> },
    #[error("no agreements anywhere: alpha is undefined")]
    ZeroDenominator,
    #[error("round {round}: {source}")]
    Learner {
        round: usize,
        #[source]
        source: GrammarError,
    },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error("trace file, line {line}: {message}")]
    TraceFormat { line: usize, message: String },
}

/// Per-entry importance weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution(Vec<f64>);

impl Distribution {
    pub fn uniform(m: usize) -> Result<Self, BoostError> {
        if m == 0 {
            return Err(BoostError::BadDistribution("no entries".into()));
        }
        Ok(Distribution(vec![1.0 / m as f64; m]))
    }

    pub fn new(weights: Vec<f64>) -> Result<Self, BoostError> {
        if weights.is_empty() {
            return Err(BoostError::BadDistribution("no entries".into()));
        }
        if let Some((i, w)) = weights.iter().enumerate().find(|(_, w)| !(**w >= 0.0 && w.is_finite())) {
            return Err(BoostError::BadDistribution(format!("weight {i} is {w}")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(BoostError::BadDistribution(format!("weights sum to {sum}")));
        }
        Ok(Distribution(weights))
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }
}

/// `m` entries drawn independently from `dist`.
pub fn weighted_resample(corpus: &Corpus, dist: &Distribution, rng: &mut Rng) -> Result<Corpus, BoostError> {
    if dist.len() != corpus.len() {
        return Err(BoostError::SizeMismatch {
            dist: dist.len(),
            corpus: corpus.len(),
        });
    }
    let index = WeightedIndex::new(dist.weights()).map_err(|e| BoostError::BadDistribution(e.to_string()))?;
    Ok((0..corpus.len())
        .map(|_| corpus.entries[index.sample(rng)].clone())
        .collect())
}

/// Size of the gold/hypothesis constituent union, with how many of those
/// constituents the two trees share and how many only one of them has.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AgreementStats {
    pub union: usize,
    pub agreements: usize,
    pub disagreements: usize,
}

pub fn agreement_stats(gold: &Tree, hyp: &Tree, policy: &ScoringPolicy) -> Result<AgreementStats, EvalError> {
    let c = score_pair(gold, hyp, policy)?;
    Ok(AgreementStats {
        union: c.union(),
        agreements: c.a,
        disagreements: c.b + c.c,
    })
}

/// How a round's mixing coefficient is computed. Only constituent
/// accuracy is implemented.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaRule {
    #[default]
    ConstituentAccuracy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alpha {
    pub raw: f64,
    pub value: f64,
    pub clamped: bool,
}

/// Weighted disagreements over weighted agreements, each entry scaled by
/// D(i)/|T(s_i)|. Entries with an empty union are skipped.
pub fn compute_alpha_ca(stats: &[AgreementStats], dist: &Distribution) -> Result<Alpha, BoostError> {
    if stats.len() != dist.len() {
        return Err(BoostError::SizeMismatch {
            dist: dist.len(),
            corpus: stats.len(),
        });
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (s, &d) in stats.iter().zip(dist.weights()) {
        if s.union == 0 {
            continue;
        }
        let scale = d / s.union as f64;
        num += scale * s.disagreements as f64;
        den += scale * s.agreements as f64;
    }
    if den <= 0.0 {
        return Err(BoostError::ZeroDenominator);
    }
    let raw = num / den;
    let value = raw.clamp(ALPHA_MIN, ALPHA_MAX);
    Ok(Alpha {
        raw,
        value,
        clamped: value != raw,
    })
}

/// u_i = D(i)(α|T| + (1−α)·disagreements), or D(i)·α when |T| = 0;
/// returns u/Z and Z.
pub fn update_distribution(
    dist: &Distribution,
    alpha: f64,
    stats: &[AgreementStats],
) -> Result<(Distribution, f64), BoostError> {
    if stats.len() != dist.len() {
        return Err(BoostError::SizeMismatch {
            dist: dist.len(),
            corpus: stats.len(),
        });
    }
    let u: Vec<f64> = stats
        .iter()
        .zip(dist.weights())
        .map(|(s, &d)| {
            if s.union == 0 {
                d * alpha
            } else {
                d * (alpha * s.union as f64 + (1.0 - alpha) * s.disagreements as f64)
            }
        })
        .collect();
    let z: f64 = u.iter().sum();
    if z.is_nan() || z <= 0.0 {
        return Err(BoostError::BadDistribution(format!("normalizer {z}")));
    }
    Ok((Distribution(u.into_iter().map(|x| x / z).collect()), z))
}

/// Member vote weight derived from a round's α.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VoteWeighting {
    /// ln(1/α): accurate rounds count more.
    #[default]
    LogInverse,
    /// α itself.
    LiteralAlpha,
}

impl VoteWeighting {
    pub fn weight(self, alpha: f64) -> f64 {
        match self {
            VoteWeighting::LogInverse => (1.0 / alpha).ln(),
            VoteWeighting::LiteralAlpha => alpha,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostRound {
    pub t: usize,
    pub alpha: Alpha,
    pub vote_weight: f64,
    pub z: f64,
    pub stats: Vec<AgreementStats>,
    /// D_{t+1}.
    pub next: Distribution,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostTrace {
    /// Gold trees, indexed like the distribution.
    pub gold: Vec<Tree>,
    pub initial: Distribution,
    pub rounds: Vec<BoostRound>,
}

impl BoostTrace {
    /// D_1 through D_{T+1}.
    pub fn distributions(&self) -> Vec<&Distribution> {
        std::iter::once(&self.initial)
            .chain(self.rounds.iter().map(|r| &r.next))
            .collect()
    }

    pub fn final_distribution(&self) -> &Distribution {
        self.rounds.last().map_or(&self.initial, |r| &r.next)
    }

    /// Line-oriented text form. Weights are written in fixed point so the
    /// file is identical across platforms.
    pub fn to_text(&self) -> String {
        let mut out = String::from("boost-trace v1\n");
        writeln!(out, "entries {}", self.gold.len()).unwrap();
        for t in &self.gold {
            writeln!(out, "{t}").unwrap();
        }
        writeln!(out, "rounds {}", self.rounds.len()).unwrap();
        write_dist(&mut out, 1, &self.initial);
        for r in &self.rounds {
            writeln!(
                out,
                "round {} alpha {:.p$} raw {:.p$} clamped {} weight {:.p$} z {:.p$}",
                r.t, r.alpha.value, r.alpha.raw, r.alpha.clamped as u8, r.vote_weight, r.z,
                p = TRACE_DECIMALS
            )
            .unwrap();
            let stats: Vec<String> = r
                .stats
                .iter()
                .map(|s| format!("{}/{}/{}", s.union, s.agreements, s.disagreements))
                .collect();
            writeln!(out, "stats {}", stats.join(" ")).unwrap();
            write_dist(&mut out, r.t + 1, &r.next);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<BoostTrace, BoostError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| {
            lines.next().ok_or_else(|| BoostError::TraceFormat {
                line: 0,
                message: format!("missing {what}"),
            })
        };
        let bad = |line: usize, message: &str| BoostError::TraceFormat {
            line,
            message: message.to_string(),
        };
        let (n, header) = next("header")?;
        if header != "boost-trace v1" {
            return Err(bad(n, "not a boost trace"));
        }
        let (n, l) = next("entry count")?;
        let m: usize = field(l, "entries").ok_or_else(|| bad(n, "expected `entries N`"))?;
        let mut gold = Vec::with_capacity(m);
        for _ in 0..m {
            let (n, l) = next("gold tree")?;
            let mut trees = parse_bracketed(l).map_err(|e| bad(n, &e.to_string()))?;
            if trees.len() != 1 {
                return Err(bad(n, "expected one tree"));
            }
            gold.push(trees.remove(0));
        }
        let (n, l) = next("round count")?;
        let count: usize = field(l, "rounds").ok_or_else(|| bad(n, "expected `rounds N`"))?;
        let (n, l) = next("initial distribution")?;
        let initial = read_dist(l, 1, m).ok_or_else(|| bad(n, "malformed distribution"))?;
        let mut rounds = Vec::with_capacity(count);
        for t in 1..=count {
            let (n, l) = next("round")?;
            let tok: Vec<&str> = l.split_whitespace().collect();
            let num = |i: usize| tok.get(i).and_then(|s| s.parse::<f64>().ok());
            if tok.len() != 12 || tok[0] != "round" || tok[1] != t.to_string() {
                return Err(bad(n, "malformed round record"));
            }
            let (Some(value), Some(raw), Some(weight), Some(z)) = (num(3), num(5), num(9), num(11)) else {
                return Err(bad(n, "malformed round record"));
            };
            let (n, l) = next("stats")?;
            let stats = l
                .strip_prefix("stats")
                .and_then(|rest| {
                    rest.split_whitespace()
                        .map(|s| {
                            let v: Vec<usize> = s.split('/').filter_map(|x| x.parse().ok()).collect();
                            (v.len() == 3).then(|| AgreementStats {
                                union: v[0],
                                agreements: v[1],
                                disagreements: v[2],
                            })
                        })
                        .collect::<Option<Vec<_>>>()
                })
                .filter(|s| s.len() == m)
                .ok_or_else(|| bad(n, "malformed stats"))?;
            let (n, l) = next("distribution")?;
            let dist = read_dist(l, t + 1, m).ok_or_else(|| bad(n, "malformed distribution"))?;
            rounds.push(BoostRound {
                t,
                alpha: Alpha {
                    raw,
                    value,
                    clamped: tok[7] == "1",
                },
                vote_weight: weight,
                z,
                stats,
                next: dist,
            });
        }
        Ok(BoostTrace { gold, initial, rounds })
    }

    /// One row per round: t, alpha, raw alpha, clamp flag, vote weight,
    /// normalizer and the largest weight in D_{t+1}.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,alpha,alpha_raw,clamped,vote_weight,z,max_weight\n");
        for r in &self.rounds {
            writeln!(
                out,
                "{},{:.12},{:.12},{},{:.12},{:.12},{:.12}",
                r.t,
                r.alpha.value,
                r.alpha.raw,
                r.alpha.clamped as u8,
                r.vote_weight,
                r.z,
                r.next.max()
            )
            .unwrap();
        }
        out
    }
}

fn field<T: std::str::FromStr>(line: &str, key: &str) -> Option<T> {
    let (k, v) = line.split_once(' ')?;
    (k == key).then(|| v.trim().parse().ok()).flatten()
}

fn write_dist(out: &mut String, t: usize, d: &Distribution) {
    write!(out, "D {t}").unwrap();
    for w in d.weights() {
        write!(out, " {w:.TRACE_DECIMALS$}").unwrap();
    }
    out.push('\n');
}

fn read_dist(line: &str, t: usize, m: usize) -> Option<Distribution> {
    let mut tok = line.split_whitespace();
    if tok.next()? != "D" || tok.next()? != t.to_string() {
        return None;
    }
    let w: Vec<f64> = tok.map(|s| s.parse().ok()).collect::<Option<_>>()?;
    (w.len() == m).then(|| Distribution::new(w).ok()).flatten()
}

#[derive(Debug, Clone)]
pub struct BoostMember<M> {
    pub model: M,
    pub seed: u64,
    pub alpha: f64,
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct BoostEnsemble<M> {
    pub members: Vec<BoostMember<M>>,
    pub trace: BoostTrace,
    /// Each member's parses of the training corpus, kept from the rounds.
    pub train_parses: Vec<CorpusParses>,
    pub master_seed: u64,
    pub voting: VoteWeighting,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BoostOptions {
    pub alpha_rule: AlphaRule,
    pub voting: VoteWeighting,
}

/// Runs `rounds` rounds. Round `t` resamples with the boost-resample
/// stream and induces with the boost-member stream, both at index `t−1`.
/// Statistics come from parsing every entry of `corpus`, not the
/// resample. An unboostable round stops the run and returns the trace so
/// far inside the error.
pub fn boost<L: Learner>(
    corpus: &Corpus,
    rounds: usize,
    learner: &L,
    master_seed: u64,
    policy: &ScoringPolicy,
    options: BoostOptions,
) -> Result<BoostEnsemble<L::Model>, BoostError> {
    if rounds == 0 {
        return Err(BoostError::NoRounds);
    }
    let initial = Distribution::uniform(corpus.len())?;
    let mut trace = BoostTrace {
        gold: corpus.trees().cloned().collect(),
        initial: initial.clone(),
        rounds: Vec::with_capacity(rounds),
    };
    let mut members = Vec::with_capacity(rounds);
    let mut train_parses = Vec::with_capacity(rounds);
    let mut dist = initial;
    for t in 1..=rounds {
        let index = (t - 1) as u64;
        let mut rng = seed::stream_rng(master_seed, stream::BOOST_RESAMPLE, index);
        let sample = weighted_resample(corpus, &dist, &mut rng)?;
        let member_seed = seed::derive(master_seed, stream::BOOST_MEMBER, index);
        let model = learner
            .induce(&sample, member_seed)
            .map_err(|source| BoostError::Learner { round: t, source })?;
        let parses = parse_corpus(&model, corpus).map_err(|source| BoostError::Learner { round: t, source })?;
        let stats = corpus
            .entries
            .par_iter()
            .zip(&parses.trees)
            .map(|(e, h)| agreement_stats(&e.gold, h, policy))
            .collect::<Result<Vec<_>, _>>()?;
        let alpha = match options.alpha_rule {
            AlphaRule::ConstituentAccuracy => compute_alpha_ca(&stats, &dist),
        };
        let alpha = match alpha {
            Err(BoostError::ZeroDenominator) => {
                return Err(BoostError::Unboostable {
                    round: t,
                    trace: Box::new(trace),
                })
            }
            other => other?,
        };
        let (next, z) = update_distribution(&dist, alpha.value, &stats)?;
        let weight = options.voting.weight(alpha.value);
        trace.rounds.push(BoostRound {
            t,
            alpha,
            vote_weight: weight,
            z,
            stats,
            next: next.clone(),
        });
        members.push(BoostMember {
            model,
            seed: member_seed,
            alpha: alpha.value,
            weight,
        });
        train_parses.push(parses);
        dist = next;
    }
    Ok(BoostEnsemble {
        members,
        trace,
        train_parses,
        master_seed,
        voting: options.voting,
    })
}

impl<M: ParserModel> BoostEnsemble<M> {
    pub fn weights(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.weight).collect()
    }

    /// Weighted vote of the first `prefix` members over one sentence.
    pub fn predict_prefix(&self, sentence: &[String], prefix: usize, policy: &ScoringPolicy) -> Result<Tree, BoostError> {
        if prefix == 0 || prefix > self.members.len() {
            return Err(EnsembleError::Prefix {
                prefix,
                members: self.members.len(),
            }
            .into());
        }
        let parses = self.members[..prefix]
            .iter()
            .enumerate()
            .map(|(member, m)| {
                m.model
                    .parse(sentence)
                    .map(|o| CorpusParses {
                        fallbacks: if o.fallback { vec![0] } else { vec![] },
                        trees: vec![o.tree],
                    })
                    .map_err(|source| EnsembleError::Parse { member, source })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(combine_prefix(&parses, Some(&self.weights()), prefix, policy)?.remove(0))
    }

    pub fn predict(&self, sentence: &[String], policy: &ScoringPolicy) -> Result<Tree, BoostError> {
        self.predict_prefix(sentence, self.members.len(), policy)
    }

    /// Prefix table over rounds; the training side reuses the parses made
    /// during boosting.
    pub fn evaluate_curve(&self, train: &Corpus, test: &Corpus, policy: &ScoringPolicy) -> Result<EnsembleCurve, BoostError> {
        let models: Vec<&M> = self.members.iter().map(|m| &m.model).collect();
        let te = crate::ensemble::parse_with_members(&models, test)?;
        let w = self.weights();
        Ok(prefix_curve(&self.train_parses, &te, Some(&w), train, test, policy)?)
    }
}
