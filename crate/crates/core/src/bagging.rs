//! Bagging: one parser per bootstrap replicate, combined by unweighted
//! constituent voting.

use rand::Rng as _;
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ensemble::{combine_prefix, parse_with_members, prefix_curve, CorpusParses, EnsembleCurve, EnsembleError};
use crate::grammar::{GrammarError, Learner, ParserModel};
use crate::seed::{self, stream, Rng};
use crate::treebank::{Corpus, ScoringPolicy, Tree};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BagError {
    #[error("cannot resample an empty corpus")]
    EmptyCorpus,
    #[error("ensemble size must be at least 1")]
    NoMembers,
    #[error("replicate {index}: {source}")]
    Learner {
        index: usize,
        #[source]
        source: GrammarError,
    },
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
}

/// `m` indices drawn uniformly with replacement.
pub fn bootstrap_indices(m: usize, rng: &mut Rng) -> Vec<usize> {
    (0..m).map(|_| rng.random_range(0..m)).collect()
}

pub fn bootstrap_replicate(corpus: &Corpus, rng: &mut Rng) -> Result<Corpus, BagError> {
    if corpus.is_empty() {
        return Err(BagError::EmptyCorpus);
    }
    Ok(bootstrap_indices(corpus.len(), rng)
        .into_iter()
        .map(|i| corpus.entries[i].clone())
        .collect())
}

#[derive(Debug, Clone)]
pub struct BagMember<M> {
    pub model: M,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct BagEnsemble<M> {
    pub members: Vec<BagMember<M>>,
    pub corpus_fingerprint: String,
    pub k: usize,
    pub master_seed: u64,
}

/// Trains `k` members in parallel. Member `i` resamples with the
/// bag-replicate stream and induces with the bag-member stream, both at
/// index `i`, so the result does not depend on scheduling.
pub fn train_bagged<L: Learner>(
    corpus: &Corpus,
    k: usize,
    learner: &L,
    master_seed: u64,
) -> Result<BagEnsemble<L::Model>, BagError>
where
    L::Model: Send,
{
    if k == 0 {
        return Err(BagError::NoMembers);
    }
    if corpus.is_empty() {
        return Err(BagError::EmptyCorpus);
    }
    let members = (0..k)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed::stream_rng(master_seed, stream::BAG_REPLICATE, i as u64);
            let replicate = bootstrap_replicate(corpus, &mut rng)?;
            let member_seed = seed::derive(master_seed, stream::BAG_MEMBER, i as u64);
            let model = learner
                .induce(&replicate, member_seed)
                .map_err(|source| BagError::Learner { index: i, source })?;
            Ok(BagMember {
                model,
                seed: member_seed,
            })
        })
        .collect::<Result<Vec<_>, BagError>>()?;
    Ok(BagEnsemble {
        members,
        corpus_fingerprint: corpus.fingerprint(),
        k,
        master_seed,
    })
}

impl<M: ParserModel> BagEnsemble<M> {
    pub fn models(&self) -> Vec<&M> {
        self.members.iter().map(|m| &m.model).collect()
    }

    /// Hash of the parameters and every member's serialized model.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("bag k={} seed={} corpus={}\n", self.k, self.master_seed, self.corpus_fingerprint));
        for m in &self.members {
            h.update(format!("member seed={}\n", m.seed));
            h.update(m.model.to_text());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn parse_corpus(&self, corpus: &Corpus) -> Result<Vec<CorpusParses>, BagError> {
        Ok(parse_with_members(&self.models(), corpus)?)
    }

    /// Combined parse of one sentence by the first `prefix` members.
    pub fn predict(&self, sentence: &[String], prefix: usize, policy: &ScoringPolicy) -> Result<Tree, BagError> {
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
        Ok(combine_prefix(&parses, None, prefix, policy)?.remove(0))
    }

    /// Scores every prefix of the ensemble on both corpora.
    pub fn evaluate_curve(&self, train: &Corpus, test: &Corpus, policy: &ScoringPolicy) -> Result<EnsembleCurve, BagError> {
        let tr = self.parse_corpus(train)?;
        let te = self.parse_corpus(test)?;
        Ok(prefix_curve(&tr, &te, None, train, test, policy)?)
    }
}
