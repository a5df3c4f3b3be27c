//! One PASS/FAIL line per acceptance criterion. Exits non-zero if any
//! criterion fails.

mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::Instant;

use parse_ensemble::bagging::train_bagged;
use parse_ensemble::boosting::{
    boost, compute_alpha_ca, AgreementStats, BoostEnsemble, BoostError, BoostOptions, BoostTrace, Distribution,
};
use parse_ensemble::combine::{vote_unweighted, vote_weighted};
use parse_ensemble::eval::{f_measure, score_pair};
use parse_ensemble::experiments::learning_curve;
use parse_ensemble::experiments::synth::{default_grammar, synth_corpus, SynthCorpus, SynthOptions};
use parse_ensemble::grammar::{Learner, ParserModel, PcfgLearner, PcfgModel};
use parse_ensemble::qc::{memorization_test, memorize_jointly, rank_inconsistencies, trim_corpus, DEFAULT_REPLICATION};
use parse_ensemble::treebank::{parse_bracketed, Corpus, Entry, ScoringPolicy};
use rand::Rng as _;

use common::*;

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn split(all: &Corpus, at: usize) -> (Corpus, Corpus) {
    (
        Corpus { entries: all.entries[..at].to_vec() },
        Corpus { entries: all.entries[at..].to_vec() },
    )
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 { xs[n / 2] } else { (xs[n / 2 - 1] + xs[n / 2]) / 2.0 }
}

fn metric_fidelity() -> Outcome {
    let a = f_measure(69.90, 54.19);
    let b = f_measure(87.99, 87.87);
    outcome(
        (a - 61.05).abs() <= 0.01 && (b - 87.93).abs() <= 0.01,
        format!("F(69.90, 54.19) = {a:.4}, F(87.99, 87.87) = {b:.4}"),
    )
}

fn alpha_oracle() -> Outcome {
    let mut r = rng(2024);
    let mut worst: f64 = 0.0;
    let mut agree = true;
    for _ in 0..1000 {
        let m = r.random_range(1..=20);
        let stats: Vec<AgreementStats> = (0..m).map(|_| random_stats(&mut r)).collect();
        let d = random_distribution(&mut r, m);
        let got = compute_alpha_ca(&stats, &Distribution::new(d.clone()).unwrap());
        match (got, literal_alpha(&stats, &d)) {
            (Ok(a), Some(want)) => worst = worst.max((a.raw - want).abs() / want.max(1.0)),
            (Err(BoostError::ZeroDenominator), None) => {}
            _ => agree = false,
        }
    }
    let stats = [
        AgreementStats { union: 4, agreements: 3, disagreements: 1 },
        AgreementStats { union: 5, agreements: 5, disagreements: 0 },
    ];
    let example = compute_alpha_ca(&stats, &Distribution::new(vec![0.5, 0.5]).unwrap()).unwrap().raw;
    outcome(
        agree && worst <= 1e-12 && example == 1.0 / 7.0,
        format!("max deviation {worst:.1e} over 1000 instances; worked example {example:.17}"),
    )
}

fn boost_runs(learner: &PcfgLearner, policy: &ScoringPolicy) -> Vec<(SynthCorpus, BoostEnsemble<PcfgModel>)> {
    SEEDS
        .iter()
        .map(|&seed| {
            let s = synth_corpus(&default_grammar(), 2000, SynthOptions { noise: 0.05, ..Default::default() }, seed).unwrap();
            let b = boost(&s.corpus, 15, learner, seed, policy, BoostOptions::default()).unwrap();
            (s, b)
        })
        .collect()
}

fn distribution_hygiene(runs: &[(SynthCorpus, BoostEnsemble<PcfgModel>)]) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut negative = false;
    let mut count = 0;
    for (_, b) in runs {
        for d in b.trace.distributions() {
            worst = worst.max((d.weights().iter().sum::<f64>() - 1.0).abs());
            negative |= d.weights().iter().any(|&w| w < 0.0);
            count += 1;
        }
    }
    outcome(
        worst <= 1e-9 && !negative && count == 16 * runs.len(),
        format!("{count} distributions, max |sum - 1| = {worst:.1e}, negative entries: {negative}"),
    )
}

fn non_crossing_votes() -> Outcome {
    let mut r = rng(77);
    let mut crossings = 0;
    for _ in 0..1000 {
        let k = r.random_range(2..=9);
        let n = r.random_range(1..=12);
        let sets: Vec<_> = (0..k).map(|_| random_member_set(&mut r, n)).collect();
        let weights: Vec<f64> = (0..k).map(|_| r.random_range(0.01..1.0)).collect();
        crossings += has_crossing(&vote_weighted(&sets, &weights).unwrap()) as usize;
        crossings += has_crossing(&vote_unweighted(&sets).unwrap()) as usize;
    }
    outcome(crossings == 0, format!("1000 ensembles, {crossings} outputs with a crossing pair"))
}

fn bagging_direction(learner: &PcfgLearner, policy: &ScoringPolicy) -> Outcome {
    let mut gains = Vec::new();
    let mut parts = Vec::new();
    for seed in SEEDS {
        let all = synth_corpus(&default_grammar(), 2500, SynthOptions::default(), seed).unwrap().corpus;
        let (train, test) = split(&all, 2000);
        let bag = train_bagged(&train, 15, learner, seed).unwrap();
        let curve = bag.evaluate_curve(&train, &test, policy).unwrap();
        let initial = curve.row("Initial").unwrap().test.f;
        let last = curve.rows.last().unwrap().test.f;
        gains.push(last - initial);
        parts.push(format!("{initial:.2}->{last:.2}"));
    }
    let wins = gains.iter().filter(|&&g| g >= 0.0).count();
    let med = median(gains);
    outcome(
        wins >= 4 && med > 0.0,
        format!("Final >= Initial in {wins}/5 seeds, median gain {med:.3} ({})", parts.join(", ")),
    )
}

fn boosting_skew(runs: &[(SynthCorpus, BoostEnsemble<PcfgModel>)]) -> Outcome {
    let mut grew = 0;
    let mut parts = Vec::new();
    for (_, b) in runs {
        let d = b.trace.distributions();
        let (d2, d15) = (d[1].max(), d[15].max());
        grew += (d15 > d2) as usize;
        parts.push(format!("{d2:.2e}->{d15:.2e}"));
    }
    outcome(grew >= 4, format!("max D_15 > max D_2 in {grew}/5 seeds ({})", parts.join(", ")))
}

fn inconsistency_mining(runs: &[(SynthCorpus, BoostEnsemble<PcfgModel>)]) -> Outcome {
    let mut hits = 0;
    let mut planted = 0;
    let mut parts = Vec::new();
    for (s, b) in runs {
        let ten = BoostTrace { rounds: b.trace.rounds[..10].to_vec(), ..b.trace.clone() };
        let top = rank_inconsistencies(&ten, s.corpus.len() / 10);
        let h = s.planted.iter().filter(|i| top.iter().any(|r| r.index == **i)).count();
        parts.push(format!("{h}/{}", s.planted.len()));
        hits += h;
        planted += s.planted.len();
    }
    let frac = hits as f64 / planted as f64;
    outcome(
        frac >= 0.6,
        format!("{:.1}% of planted entries in the top 10% after 10 rounds (per seed {})", 100.0 * frac, parts.join(", ")),
    )
}

fn entry(text: &str) -> Entry {
    Entry::new(parse_bracketed(text).unwrap().remove(0)).unwrap()
}

fn memorization(learner: &PcfgLearner, policy: &ScoringPolicy) -> Outcome {
    let pair = [
        entry("(TOP (S (NP (D x) (N y)) (V z)))"),
        entry("(TOP (S (D x) (VP (N y) (V z))))"),
    ];
    let alone = pair
        .iter()
        .all(|e| memorization_test(e, learner, DEFAULT_REPLICATION, policy).unwrap().passed());
    let jointly = memorize_jointly(&pair, learner, DEFAULT_REPLICATION, policy).unwrap();
    let joint_ok = jointly.iter().all(|m| m.passed());

    let mut entries = synth_corpus(&default_grammar(), 48, SynthOptions::default(), 8).unwrap().corpus.entries;
    let planted = [7, 31];
    entries.insert(planted[0], entry("(TOP (S (T (P a) (Q a)) (T (P a) (Q a)) (T (Q a) (P a))))"));
    entries.insert(planted[1], entry("(TOP (S (U (R b) (W b)) (U (W b) (R b)) (U (W b) (R b))))"));
    let fixture = Corpus { entries };
    let trim = trim_corpus(&fixture, learner, DEFAULT_REPLICATION, policy).unwrap();
    let removed: Vec<usize> = trim.removed.iter().map(|r| r.index).collect();
    outcome(
        alone && !joint_ok && removed == planted && fixture.len() == 50,
        format!(
            "pair alone: {alone}, jointly: {joint_ok}; trim removed {removed:?} of {} (planted {planted:?})",
            fixture.len()
        ),
    )
}

fn learning_curve_shape(learner: &PcfgLearner, policy: &ScoringPolicy) -> Outcome {
    let sizes = [50, 200, 800, 3200];
    let mut monotone = 0;
    let mut concave = 0;
    let mut parts = Vec::new();
    for seed in SEEDS {
        let all = synth_corpus(&default_grammar(), 3200 + 2000, SynthOptions::default(), seed).unwrap().corpus;
        let (train, test) = split(&all, 3200);
        let rows = learning_curve(&train, &test, &sizes, learner, seed, policy).unwrap();
        let f: Vec<f64> = rows.iter().map(|r| r.test.f).collect();
        let diffs: Vec<f64> = f.windows(2).map(|w| w[1] - w[0]).collect();
        monotone += diffs.iter().all(|&d| d >= 0.0) as usize;
        concave += diffs.windows(2).all(|w| w[1] <= w[0]) as usize;
        parts.push(f.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join("/"));
    }
    outcome(
        monotone >= 4 && concave >= 3,
        format!(
            "non-decreasing in {monotone}/5, differences non-increasing in {concave}/5 (test F at {sizes:?}: {})",
            parts.join(", ")
        ),
    )
}

fn tree_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism(learner: &PcfgLearner, policy: &ScoringPolicy, runs: &[(SynthCorpus, BoostEnsemble<PcfgModel>)]) -> Outcome {
    let all = synth_corpus(&default_grammar(), 2500, SynthOptions::default(), 1).unwrap().corpus;
    let (train, test) = split(&all, 2000);
    let a = train_bagged(&train, 15, learner, 1).unwrap();
    let b = train_bagged(&train, 15, learner, 1).unwrap();
    let bag_same = a.fingerprint() == b.fingerprint()
        && a.evaluate_curve(&train, &test, policy).unwrap() == b.evaluate_curve(&train, &test, policy).unwrap();
    let (s, first) = &runs[0];
    let again = boost(&s.corpus, 15, learner, SEEDS[0], policy, BoostOptions::default()).unwrap();
    let boost_same = again.trace.to_text() == first.trace.to_text()
        && again.members.iter().zip(&first.members).all(|(x, y)| x.model.to_text() == y.model.to_text());

    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("train.txt"), Corpus { entries: train.entries[..400].to_vec() }.to_lines()).unwrap();
    fs::write(d.join("test.txt"), Corpus { entries: test.entries[..100].to_vec() }.to_lines()).unwrap();
    let commands: [&[&str]; 5] = [
        &["bag", "--train", "train.txt", "--test", "test.txt", "--k", "5"],
        &["boost", "--train", "train.txt", "--test", "test.txt", "--rounds", "5"],
        &["learning-curve", "--train", "train.txt", "--test", "test.txt", "--sizes", "50,400"],
        &["synth", "--sentences", "300", "--noise", "0.05"],
        &["trim", "--train", "test.txt", "--out-stable", "stable.txt", "--out-removed", "removed.txt"],
    ];
    let mut cli_same = 0;
    for (i, args) in commands.iter().enumerate() {
        let outputs: Vec<_> = (0..2)
            .map(|rep| {
                let out = d.join(format!("run{i}-{rep}"));
                let mut cmd = Command::new(env!("CARGO_BIN_EXE_ensemble"));
                cmd.current_dir(d).args(["--seed", "9", "--out-dir"]).arg(&out).args(*args).stdout(Stdio::null());
                let ok = cmd.status().unwrap().success();
                if args[0] == "trim" {
                    let files = ["stable.txt", "removed.txt"].map(|f| fs::read(d.join(f)).unwrap_or_default());
                    (ok, vec![("trim".to_string(), files.concat())])
                } else {
                    (ok, tree_files(&out))
                }
            })
            .collect();
        cli_same += (outputs.iter().all(|(ok, _)| *ok) && !outputs[0].1.is_empty() && outputs[0].1 == outputs[1].1) as usize;
    }
    outcome(
        bag_same && boost_same && cli_same == commands.len(),
        format!(
            "bag rerun identical: {bag_same}, boost rerun identical: {boost_same}, CLI output directories identical: {cli_same}/{}",
            commands.len()
        ),
    )
}

fn round_trips() -> Outcome {
    let mut r = rng(311);
    let mut trees_ok = 0;
    for _ in 0..500 {
        let t = random_tree(&mut r, 12);
        trees_ok += (parse_bracketed(&t.to_bracketed()).unwrap() == vec![t]) as usize;
    }
    let mut pairs_ok = 0;
    for _ in 0..1000 {
        let n = r.random_range(1..=10);
        let words = random_words(&mut r, n);
        let gold = random_tree_over(&mut r, &words);
        let hyp = random_tree_over(&mut r, &words);
        let p = ScoringPolicy::default();
        let got = score_pair(&gold, &hyp, &p).unwrap();
        pairs_ok += ((got.a, got.b, got.c) == oracle_counts(&gold, &hyp, &p)) as usize;
    }
    let g = default_grammar();
    let model = PcfgLearner::default()
        .induce(&synth_corpus(&g, 150, SynthOptions::default(), 5).unwrap().corpus, 0)
        .unwrap();
    let pool = synth_corpus(&g, 4000, SynthOptions::default(), 6).unwrap().corpus;
    let mut chart_ok = 0;
    let mut worst: f64 = 0.0;
    let sentences = pool.entries.iter().map(|e| &e.sentence).filter(|s| s.len() <= 6).take(200);
    for s in sentences {
        let parsed = model.parse(s).unwrap();
        match (parsed.log10_prob, brute_force_best(&model, s)) {
            (Some(got), Some(want)) => {
                worst = worst.max((got - want).abs());
                chart_ok += ((got - want).abs() <= 1e-12) as usize;
            }
            (None, None) => chart_ok += parsed.fallback as usize,
            _ => {}
        }
    }
    outcome(
        trees_ok == 500 && pairs_ok == 1000 && chart_ok == 200,
        format!("trees {trees_ok}/500, score pairs {pairs_ok}/1000, chart {chart_ok}/200 (max log10 gap {worst:.1e})"),
    )
}

fn report(n: usize, name: &str, started: Instant, o: &Outcome, failures: &mut usize) {
    if !o.pass {
        *failures += 1;
    }
    println!(
        "{} criterion {n:>2} {name}: {} [{:.1}s]",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail,
        started.elapsed().as_secs_f64()
    );
}

fn main() {
    let learner = PcfgLearner::default();
    let policy = ScoringPolicy::default();
    let mut failures = 0;

    let t = Instant::now();
    report(1, "metric fidelity", t, &metric_fidelity(), &mut failures);
    let t = Instant::now();
    report(2, "alpha oracle", t, &alpha_oracle(), &mut failures);

    let t = Instant::now();
    let runs = boost_runs(&learner, &policy);
    let shared = t.elapsed().as_secs_f64();
    println!("     ran 5 boosting runs for criteria 3, 6 and 7 in {shared:.1}s");
    report(3, "distribution hygiene", Instant::now(), &distribution_hygiene(&runs), &mut failures);
    let t = Instant::now();
    report(4, "non-crossing voting", t, &non_crossing_votes(), &mut failures);
    let t = Instant::now();
    report(5, "bagging direction", t, &bagging_direction(&learner, &policy), &mut failures);
    report(6, "boosting skew", Instant::now(), &boosting_skew(&runs), &mut failures);
    report(7, "inconsistency mining", Instant::now(), &inconsistency_mining(&runs), &mut failures);
    let t = Instant::now();
    report(8, "memorization and trim", t, &memorization(&learner, &policy), &mut failures);
    let t = Instant::now();
    report(9, "learning-curve shape", t, &learning_curve_shape(&learner, &policy), &mut failures);
    let t = Instant::now();
    report(10, "determinism", t, &determinism(&learner, &policy, &runs), &mut failures);
    let t = Instant::now();
    report(11, "round trips and oracles", t, &round_trips(), &mut failures);

    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
    println!("all 11 criteria passed");
}
