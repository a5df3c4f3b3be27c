//! `ensemble`: bagging, boosting and treebank checks from the command line.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use parse_ensemble::bagging::train_bagged;
use parse_ensemble::boosting::{boost, BoostError, BoostOptions, BoostTrace, VoteWeighting};
use parse_ensemble::combine::combine_trees;
use parse_ensemble::eval::{score_corpus, ScoreReport};
use parse_ensemble::experiments::synth::{default_grammar, synth_corpus, GeneratorGrammar, SynthOptions};
use parse_ensemble::experiments::{
    default_sizes, learning_curve, learning_curve_csv, learning_curve_table, prepare_out_dir, Report, RunConfig,
};
use parse_ensemble::grammar::{Learner, ParserModel, PcfgLearner, PcfgModel};
use parse_ensemble::qc::{curves_csv, ranking_report, rank_inconsistencies, trim_corpus, weight_rank_curves, Memorization};
use parse_ensemble::treebank::{Corpus, ScoringPolicy, Tree, TreebankError};

#[derive(Parser, Debug)]
#[command(name = "ensemble", version, about = "Parser ensembles and treebank quality control")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Master seed; every random stream is derived from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Root label excluded from scoring, or "none" to count the root.
    #[arg(long, global = true, default_value = "TOP")]
    policy_root: String,
    /// Count preterminal nodes as constituents.
    #[arg(long, global = true)]
    policy_count_preterminals: bool,
    /// Comma-separated punctuation tags, deleted before scoring.
    #[arg(long, global = true, value_delimiter = ',')]
    punct_set: Vec<String>,
    /// Also write machine-readable CSV to this path.
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    /// Output directory for runs that write several files.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Corpus file checks.
    Corpus {
        #[command(subcommand)]
        action: CorpusAction,
    },
    /// Learn a PCFG from a corpus.
    Induce {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse one whitespace-tokenized sentence per line.
    Parse {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Write trees here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score hypotheses against gold trees.
    Eval {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        hyp: PathBuf,
    },
    /// Combine parallel parse files line by line.
    Vote {
        #[arg(long, value_delimiter = ',', required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        weights: Option<Vec<f64>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Bagging: one parser per bootstrap replicate, majority vote.
    Bag {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long, default_value_t = 15)]
        k: usize,
    },
    /// Boosting with constituent-accuracy reweighting.
    Boost {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long, default_value_t = 15)]
        rounds: usize,
        /// Vote with α itself instead of ln(1/α).
        #[arg(long)]
        literal_alpha_vote: bool,
        /// Bins for the weight-rank curves written next to the trace.
        #[arg(long, default_value_t = parse_ensemble::qc::DEFAULT_BINS)]
        bins: usize,
    },
    /// Drop entries the parser cannot memorize alone.
    Trim {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        out_stable: PathBuf,
        #[arg(long)]
        out_removed: PathBuf,
        #[arg(long, default_value_t = parse_ensemble::qc::DEFAULT_REPLICATION)]
        replication: usize,
    },
    /// Most heavily weighted entries of a boosting trace.
    Rank {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, default_value_t = parse_ensemble::qc::DEFAULT_TOP_K)]
        top: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean weight per rank bin for every distribution of a trace.
    Curves {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, default_value_t = parse_ensemble::qc::DEFAULT_BINS)]
        bins: usize,
    },
    /// Accuracy against training-set size.
    LearningCurve {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
    },
    /// Sample a treebank from a generator grammar.
    Synth {
        #[arg(long, default_value_t = 2000)]
        sentences: usize,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Generator file; the built-in grammar when absent.
        #[arg(long)]
        grammar: Option<PathBuf>,
        #[arg(long, default_value_t = 25)]
        max_words: usize,
        /// Write the corpus here instead of into --out-dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum CorpusAction {
    Validate { path: PathBuf },
}

enum Failure {
    Usage(String),
    Data(String),
    Unboostable(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Unboostable(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Unboostable(m) => m,
        }
    }
}

fn data<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Data(e.to_string())
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn policy(g: &Global) -> ScoringPolicy {
    ScoringPolicy {
        root_label: (!g.policy_root.eq_ignore_ascii_case("none")).then(|| g.policy_root.clone()),
        count_preterminals: g.policy_count_preterminals,
        punctuation: g.punct_set.iter().filter(|s| !s.is_empty()).cloned().collect::<BTreeSet<_>>(),
    }
}

fn load(path: &Path) -> Result<Corpus, Failure> {
    Corpus::load(path).map_err(|e| match e {
        TreebankError::Io { .. } => data(e),
        e => Failure::Data(format!("{}: {e}", path.display())),
    })
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Outcome {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Failure::Data(format!("{}: {e}", parent.display())))?;
    }
    fs::write(path, contents).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn out_dir(g: &Global) -> Result<&Path, Failure> {
    let dir = g
        .out_dir
        .as_deref()
        .ok_or_else(|| Failure::Usage("this command needs --out-dir".into()))?;
    prepare_out_dir(dir).map_err(|e| Failure::Data(format!("cannot write to {}: {e}", dir.display())))?;
    Ok(dir)
}

fn report(dir: &Path, config: &RunConfig) -> Result<Report, Failure> {
    Report::create(dir, config).map_err(|e| Failure::Data(format!("{}: {e}", dir.display())))
}

fn put(r: &Report, name: &str, contents: &str) -> Outcome {
    r.write(name, contents)
        .map_err(|e| Failure::Data(format!("{}: {e}", r.dir().join(name).display())))
}

fn show(p: &Path) -> Option<String> {
    Some(p.display().to_string())
}

fn run(cli: Cli) -> Outcome {
    let g = &cli.global;
    let pol = policy(g);
    let learner = PcfgLearner::default();
    match cli.command {
        Command::Corpus {
            action: CorpusAction::Validate { path },
        } => {
            let c = load(&path)?;
            println!("{}: {} trees ok", path.display(), c.len());
            Ok(())
        }
        Command::Induce { train, out } => {
            let c = load(&train)?;
            let model = learner.induce(&c, g.seed).map_err(data)?;
            write(&out, &model.to_text())
        }
        Command::Parse { model, input, out } => {
            let model = PcfgModel::from_text(&read(&model)?).map_err(data)?;
            let mut text = String::new();
            for (n, line) in read(&input)?.lines().enumerate() {
                let words: Vec<String> = line.split_whitespace().map(str::to_string).collect();
                if words.is_empty() {
                    return Err(Failure::Data(format!("{} line {}: empty sentence", input.display(), n + 1)));
                }
                let parsed = model.parse(&words).map_err(data)?;
                if parsed.fallback {
                    eprintln!("warning: line {}: no parse, wrote a fallback tree", n + 1);
                }
                writeln!(text, "{}", parsed.tree).unwrap();
            }
            match out {
                Some(p) => write(&p, &text),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
        Command::Eval { gold, hyp } => {
            let gold = load(&gold)?;
            let hyp = load(&hyp)?;
            let hyps: Vec<Tree> = hyp.trees().cloned().collect();
            let r = score_corpus(&gold, &hyps, &pol).map_err(data)?;
            println!("{:>9} {:>7} {:>7} {:>7} {:>7}", "sentences", "P", "R", "F", "Exact");
            println!("{:>9} {r}", r.sentences);
            if let Some(p) = &g.csv {
                write(p, &format!("sentences,{}\n{},{}\n", ScoreReport::CSV_COLUMNS, r.sentences, r.csv_fields()))?;
            }
            Ok(())
        }
        Command::Vote { inputs, weights, out } => {
            let files = inputs.iter().map(|p| load(p)).collect::<Result<Vec<_>, _>>()?;
            let n = files[0].len();
            if let Some((p, c)) = inputs.iter().zip(&files).find(|(_, c)| c.len() != n) {
                return Err(Failure::Data(format!("{} has {} trees, expected {n}", p.display(), c.len())));
            }
            if let Some(w) = &weights {
                if w.len() != files.len() {
                    return Err(Failure::Usage(format!("{} weights for {} inputs", w.len(), files.len())));
                }
            }
            let mut combined = Corpus::new();
            for i in 0..n {
                let members: Vec<Tree> = files.iter().map(|c| c.entries[i].gold.clone()).collect();
                let tree = combine_trees(&members, weights.as_deref(), &pol)
                    .map_err(|e| Failure::Data(format!("line {}: {e}", i + 1)))?;
                combined.entries.push(parse_ensemble::treebank::Entry::new(tree).map_err(data)?);
            }
            combined.save(&out).map_err(data)
        }
        Command::Bag { train, test, k } => {
            let dir = out_dir(g)?;
            let tr = load(&train)?;
            let te = load(&test)?;
            let mut config = RunConfig::new("bag", g.seed, pol.clone());
            config.train = show(&train);
            config.test = show(&test);
            config.k = Some(k);
            let bag = train_bagged(&tr, k, &learner, g.seed).map_err(data)?;
            let curve = bag.evaluate_curve(&tr, &te, &pol).map_err(data)?;
            let r = report(dir, &config)?;
            for (i, m) in bag.members.iter().enumerate() {
                put(&r, &format!("models/member-{:03}.pcfg", i + 1), &m.model.to_text())?;
            }
            put(&r, "bag_curve.csv", &curve.to_csv())?;
            let table = curve.summary_table();
            put(&r, "summary.txt", &table)?;
            if let Some(p) = &g.csv {
                write(p, &curve.to_csv())?;
            }
            print!("{table}");
            Ok(())
        }
        Command::Boost {
            train,
            test,
            rounds,
            literal_alpha_vote,
            bins,
        } => {
            let dir = out_dir(g)?;
            let tr = load(&train)?;
            let te = test.as_deref().map(load).transpose()?;
            let options = BoostOptions {
                voting: if literal_alpha_vote {
                    VoteWeighting::LiteralAlpha
                } else {
                    VoteWeighting::LogInverse
                },
                ..Default::default()
            };
            let mut config = RunConfig::new("boost", g.seed, pol.clone());
            config.train = show(&train);
            config.test = test.as_deref().and_then(show);
            config.rounds = Some(rounds);
            config.bins = Some(bins);
            config.voting = Some(options.voting);
            config.alpha_rule = Some(options.alpha_rule);
            let result = boost(&tr, rounds, &learner, g.seed, &pol, options);
            let r = report(dir, &config)?;
            let ens = match result {
                Ok(ens) => ens,
                Err(BoostError::Unboostable { round, trace }) => {
                    put(&r, "trace.txt", &trace.to_text())?;
                    put(&r, "trace.csv", &trace.to_csv())?;
                    return Err(Failure::Unboostable(format!(
                        "round {round} is unboostable; partial trace in {}",
                        dir.join("trace.txt").display()
                    )));
                }
                Err(e) => return Err(data(e)),
            };
            for (i, m) in ens.members.iter().enumerate() {
                put(&r, &format!("models/member-{:03}.pcfg", i + 1), &m.model.to_text())?;
            }
            put(&r, "trace.txt", &ens.trace.to_text())?;
            put(&r, "trace.csv", &ens.trace.to_csv())?;
            let rows = weight_rank_curves(&ens.trace, bins).map_err(data)?;
            put(&r, "curves.csv", &curves_csv(&rows))?;
            if let Some(te) = &te {
                let curve = ens.evaluate_curve(&tr, te, &pol).map_err(data)?;
                put(&r, "boost_curve.csv", &curve.to_csv())?;
                let table = curve.summary_table();
                put(&r, "summary.txt", &table)?;
                if let Some(p) = &g.csv {
                    write(p, &curve.to_csv())?;
                }
                print!("{table}");
            } else {
                print!("{}", ens.trace.to_csv());
            }
            Ok(())
        }
        Command::Trim {
            train,
            out_stable,
            out_removed,
            replication,
        } => {
            let c = load(&train)?;
            let result = trim_corpus(&c, &learner, replication, &pol).map_err(|e| Failure::Usage(e.to_string()))?;
            result.stable.save(&out_stable).map_err(data)?;
            result.removed_corpus(&c).save(&out_removed).map_err(data)?;
            println!("kept {} of {}, removed {}", result.stable.len(), c.len(), result.removed.len());
            for r in &result.removed {
                let why = match &r.reason {
                    Memorization::Memorized => "memorized".to_string(),
                    Memorization::NotMemorized => "not memorized".to_string(),
                    Memorization::LearnerFailed(m) => format!("learner failed: {m}"),
                };
                println!("{}\t{}", r.index, why);
            }
            Ok(())
        }
        Command::Rank { trace, top, out } => {
            let t = BoostTrace::from_text(&read(&trace)?).map_err(data)?;
            let text = ranking_report(&rank_inconsistencies(&t, top));
            match out {
                Some(p) => write(&p, &text),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
        Command::Curves { trace, bins } => {
            let t = BoostTrace::from_text(&read(&trace)?).map_err(data)?;
            let rows = weight_rank_curves(&t, bins).map_err(|e| Failure::Usage(e.to_string()))?;
            let csv = curves_csv(&rows);
            match &g.csv {
                Some(p) => write(p, &csv),
                None => {
                    print!("{csv}");
                    Ok(())
                }
            }
        }
        Command::LearningCurve { train, test, sizes } => {
            let dir = out_dir(g)?;
            let tr = load(&train)?;
            let te = load(&test)?;
            let sizes = sizes.unwrap_or_else(|| default_sizes(tr.len()));
            let mut config = RunConfig::new("learning-curve", g.seed, pol.clone());
            config.train = show(&train);
            config.test = show(&test);
            config.sizes = Some(sizes.clone());
            let rows = learning_curve(&tr, &te, &sizes, &learner, g.seed, &pol).map_err(data)?;
            let r = report(dir, &config)?;
            let csv = learning_curve_csv(&rows);
            put(&r, "learning_curve.csv", &csv)?;
            let table = learning_curve_table(&rows);
            put(&r, "summary.txt", &table)?;
            if let Some(p) = &g.csv {
                write(p, &csv)?;
            }
            print!("{table}");
            Ok(())
        }
        Command::Synth {
            sentences,
            noise,
            grammar,
            max_words,
            out,
        } => {
            let gen = match &grammar {
                Some(p) => GeneratorGrammar::parse(&read(p)?).map_err(data)?,
                None => default_grammar(),
            };
            let options = SynthOptions { noise, max_words };
            if let Some(p) = out {
                let s = synth_corpus(&gen, sentences, options, g.seed).map_err(data)?;
                return s.corpus.save(&p).map_err(data);
            }
            let dir = out_dir(g)?;
            let s = synth_corpus(&gen, sentences, options, g.seed).map_err(data)?;
            let mut config = RunConfig::new("synth", g.seed, pol.clone());
            config.sentences = Some(sentences);
            config.noise = Some(noise);
            config.grammar = grammar.as_deref().and_then(show);
            let r = report(dir, &config)?;
            put(&r, "corpus.txt", &s.corpus.to_lines())?;
            let planted: String = s.planted.iter().map(|i| format!("{i}\n")).collect();
            put(&r, "planted.txt", &planted)?;
            println!("{} sentences, {} perturbed", s.corpus.len(), s.planted.len());
            Ok(())
        }
    }
}
