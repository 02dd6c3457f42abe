//! Command-line surface.
//!
//! Exit codes: 0 success, 2 usage errors, 3 data errors, 4 I/O errors.
//! Flags take precedence over the optional `key = value` config file, which
//! takes precedence over built-in defaults.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use crate::clustering::{cluster_recall, pairwise_metrics, single_link, Clustering};
use crate::corpus::read_jsonl_corpus;
use crate::matcher::{self, LinearModel, TrainConfig};
use crate::parser::{
    parse_labeled_sequences, train_tagger, Dictionaries, FeatureExtractor, TaggerModel,
};
use crate::pipeline::{
    job_build_index, job_match, write_corpus_seqfile, write_match_jsonl, MatchOptions,
};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Io(_) => EXIT_IO,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Io(m) => m,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<crate::seqfile::SeqFileError> for CliError {
    fn from(e: crate::seqfile::SeqFileError) -> Self {
        match e {
            crate::seqfile::SeqFileError::Io(io) => CliError::Io(io.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<crate::pipeline::PipelineError> for CliError {
    fn from(e: crate::pipeline::PipelineError) -> Self {
        use crate::mapred::JobError;
        use crate::pipeline::PipelineError as P;
        match e {
            P::Io(io) => CliError::Io(io.to_string()),
            P::Seq(s) => s.into(),
            P::MapFile(crate::mapfile::MapFileError::Io(io)) => CliError::Io(io.to_string()),
            P::MapFile(crate::mapfile::MapFileError::Seq(s)) => s.into(),
            P::Job(JobError::Io(io)) => CliError::Io(io.to_string()),
            P::Job(JobError::Seq(s)) => s.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<crate::parser::TaggerError> for CliError {
    fn from(e: crate::parser::TaggerError) -> Self {
        match e {
            crate::parser::TaggerError::Io(io) => CliError::Io(io.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<crate::matcher::MatchModelError> for CliError {
    fn from(e: crate::matcher::MatchModelError) -> Self {
        match e {
            crate::matcher::MatchModelError::Io(io) => CliError::Io(io.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<crate::parser::DictionaryError> for CliError {
    fn from(e: crate::parser::DictionaryError) -> Self {
        match e {
            crate::parser::DictionaryError::Io { .. } => CliError::Io(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "citmatch",
    version,
    about = "Citation matching: parse references, index author tokens, match citations to metadata records"
)]
pub struct Cli {
    /// Optional key = value config file; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convert a JSON-lines corpus into a document sequence file.
    Ingest {
        /// JSON-lines input, one document record per line.
        #[arg(long)]
        docs: PathBuf,
        /// Output sequence file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the on-disk rotation index over author tokens.
    BuildIndex {
        /// Document sequence file.
        #[arg(long)]
        docs: PathBuf,
        /// Output index directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        /// Scratch directory (removed afterwards when defaulted).
        #[arg(long)]
        scratch: Option<PathBuf>,
        /// Sparse-index sampling interval.
        #[arg(long)]
        index_interval: Option<usize>,
    },
    /// Match every reference of every document against the indexed corpus.
    Match(MatchArgs),
    /// Train the reference parser on labeled token sequences.
    TrainParser {
        /// Labeled input: token<TAB>label lines, blank line between citations.
        #[arg(long)]
        input: PathBuf,
        /// Output model file.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        features: FeatureArgs,
    },
    /// Train the match classifier from a feature/label table.
    TrainMatcher {
        /// Tab-separated training data with a feature-name header.
        #[arg(long)]
        data: PathBuf,
        /// Output model file.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        /// Regularization strength.
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Skip logistic calibration (keep scale 1, offset 0).
        #[arg(long)]
        no_calibration: bool,
    },
    /// Single-link clustering of pairwise scores at a threshold.
    Cluster {
        /// Pair file: itemA<TAB>itemB<TAB>score lines.
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
        /// Optional item list (one id per line) to include singletons.
        #[arg(long)]
        items: Option<PathBuf>,
        /// Output clustering: item<TAB>cluster-id lines.
        #[arg(long)]
        out: PathBuf,
    },
    /// Cluster recall and pairwise precision/recall/F1 of a predicted
    /// clustering against a gold clustering.
    Evaluate {
        /// Predicted clustering file (item<TAB>cluster-id).
        #[arg(long)]
        pred: PathBuf,
        /// Gold clustering file (item<TAB>cluster-id).
        #[arg(long)]
        gold: PathBuf,
    },
}

#[derive(Args, Debug)]
struct MatchArgs {
    /// Document sequence file (citations are extracted from its references).
    #[arg(long)]
    docs: PathBuf,
    /// Rotation-index directory built by build-index.
    #[arg(long)]
    index: PathBuf,
    /// Trained parser model; required unless --parsed-refs.
    #[arg(long)]
    parser_model: Option<PathBuf>,
    /// Trained match classifier.
    #[arg(long)]
    match_model: PathBuf,
    /// Acceptance threshold on the calibrated score; 0 always emits the best
    /// candidate.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Match results as JSON-lines.
    #[arg(long)]
    out: PathBuf,
    /// Also keep the raw result sequence file at this path.
    #[arg(long)]
    results_seq: Option<PathBuf>,
    /// Scratch directory (removed afterwards when defaulted).
    #[arg(long)]
    scratch: Option<PathBuf>,
    /// Verify index retrievals with an exact edit-distance-1 check.
    #[arg(long)]
    exact_verify: bool,
    /// References are pre-parsed citation JSON; skip the tagger.
    #[arg(long)]
    parsed_refs: bool,
    #[command(flatten)]
    features: FeatureArgs,
}

/// Dictionary and word-feature configuration shared by commands that run
/// the feature extractor. Training and tagging must use the same setup.
#[derive(Args, Debug)]
struct FeatureArgs {
    /// Replace or add a named dictionary: --dict name=path (repeatable).
    #[arg(long = "dict", value_name = "NAME=PATH")]
    dicts: Vec<String>,
    /// Replace the specific-word feature list with words from a file.
    #[arg(long)]
    words: Option<PathBuf>,
}

impl FeatureArgs {
    fn build_extractor(&self) -> Result<FeatureExtractor, CliError> {
        let mut dicts = Dictionaries::bundled();
        for spec in &self.dicts {
            let (name, path) = spec.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("--dict expects NAME=PATH, got {spec:?}"))
            })?;
            dicts.load_file(name, Path::new(path))?;
        }
        match &self.words {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                let words: Vec<String> = text
                    .lines()
                    .map(|l| l.trim().to_string())
                    .filter(|l| !l.is_empty())
                    .collect();
                Ok(FeatureExtractor::with_words(dicts, words))
            }
            None => Ok(FeatureExtractor::new(dicts)),
        }
    }
}

/// Values from the optional config file, merged below flags.
#[derive(Debug, Default)]
struct FileConfig {
    values: HashMap<String, String>,
}

impl FileConfig {
    fn load(path: Option<&Path>) -> Result<FileConfig, CliError> {
        let mut values = HashMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    CliError::Data(format!(
                        "{}:{}: expected key = value",
                        path.display(),
                        i + 1
                    ))
                })?;
                values.insert(key.trim().to_string(), value.trim().to_string());
            }
        }
        Ok(FileConfig { values })
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.values.get(key) {
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                CliError::Data(format!("config key {key:?} has invalid value {raw:?}"))
            }),
            None => Ok(None),
        }
    }
}

fn resolve<T: std::str::FromStr>(
    flag: Option<T>,
    config: &FileConfig,
    key: &str,
    default: T,
) -> Result<T, CliError> {
    match flag {
        Some(v) => Ok(v),
        None => Ok(config.get(key)?.unwrap_or(default)),
    }
}

fn require_file(path: &Path, what: &str) -> Result<(), CliError> {
    if !path.is_file() {
        return Err(CliError::Usage(format!(
            "{what} {} does not exist",
            path.display()
        )));
    }
    Ok(())
}

fn require_dir(path: &Path, what: &str) -> Result<(), CliError> {
    if !path.is_dir() {
        return Err(CliError::Usage(format!(
            "{what} {} does not exist",
            path.display()
        )));
    }
    Ok(())
}

fn print_phases(phases: &[(&'static str, Duration)]) {
    for (name, elapsed) in phases {
        println!("{name:<26} {:>9.3} s", elapsed.as_secs_f64());
    }
}

/// Parses arguments and runs; returns the process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let config = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Ingest { docs, out } => cmd_ingest(&docs, &out),
        Command::BuildIndex {
            docs,
            out,
            workers,
            scratch,
            index_interval,
        } => {
            let workers = resolve(workers, &config, "workers", 1)?;
            let interval =
                resolve(index_interval, &config, "index-interval", crate::mapfile::DEFAULT_INDEX_INTERVAL)?;
            let scratch = match scratch {
                Some(s) => Some(s),
                None => config.get::<PathBuf>("scratch")?,
            };
            cmd_build_index(&docs, &out, workers, scratch, interval)
        }
        Command::Match(args) => cmd_match(args, &config),
        Command::TrainParser {
            input,
            out,
            epochs,
            seed,
            features,
        } => {
            let epochs = resolve(epochs, &config, "epochs", 20)?;
            let seed = resolve(seed, &config, "seed", 1)?;
            cmd_train_parser(&input, &out, epochs, seed, &features)
        }
        Command::TrainMatcher {
            data,
            out,
            epochs,
            lambda,
            seed,
            no_calibration,
        } => {
            let epochs = resolve(epochs, &config, "epochs", 20)?;
            let lambda = resolve(lambda, &config, "lambda", 0.01)?;
            let seed = resolve(seed, &config, "seed", 1)?;
            cmd_train_matcher(&data, &out, epochs, lambda, seed, !no_calibration)
        }
        Command::Cluster {
            pairs,
            threshold,
            items,
            out,
        } => {
            let threshold = resolve(threshold, &config, "threshold", 0.5)?;
            cmd_cluster(&pairs, threshold, items.as_deref(), &out)
        }
        Command::Evaluate { pred, gold } => cmd_evaluate(&pred, &gold),
    }
}

fn cmd_ingest(docs: &Path, out: &Path) -> Result<(), CliError> {
    require_file(docs, "input corpus")?;
    let (records, rejected) = read_jsonl_corpus(docs)?;
    let count = write_corpus_seqfile(out, &records)?;
    println!("ingested {count} documents into {}", out.display());
    if !rejected.is_empty() {
        for r in &rejected {
            eprintln!("line {}: rejected: {}", r.line, r.reason);
        }
        return Err(CliError::Data(format!(
            "{} line(s) rejected, {count} ingested",
            rejected.len()
        )));
    }
    Ok(())
}

fn cmd_build_index(
    docs: &Path,
    out: &Path,
    workers: usize,
    scratch: Option<PathBuf>,
    index_interval: usize,
) -> Result<(), CliError> {
    require_file(docs, "document sequence file")?;
    let (scratch, cleanup) = match scratch {
        Some(s) => (s, false),
        None => (out.join("scratch"), true),
    };
    let report = job_build_index(docs, out, &scratch, workers, index_interval)?;
    if cleanup {
        let _ = std::fs::remove_dir_all(&scratch);
    }
    print_phases(&report.phases);
    println!(
        "indexed {} documents: {} distinct author tokens, {} index entries",
        report.documents, report.distinct_tokens, report.index_entries
    );
    Ok(())
}

fn cmd_match(args: MatchArgs, config: &FileConfig) -> Result<(), CliError> {
    require_file(&args.docs, "document sequence file")?;
    require_dir(&args.index, "index directory")?;
    require_file(&args.match_model, "match model")?;
    let parsed_refs = args.parsed_refs
        || config
            .get::<bool>("parsed-refs")?
            .unwrap_or(false);
    let tagger_model = match (&args.parser_model, parsed_refs) {
        (Some(path), _) => {
            require_file(path, "parser model")?;
            Some(TaggerModel::load(path)?)
        }
        (None, true) => None,
        (None, false) => {
            return Err(CliError::Usage(
                "--parser-model is required unless --parsed-refs is set".into(),
            ))
        }
    };
    let threshold = resolve(args.threshold, config, "threshold", 0.5)?;
    let workers = resolve(args.workers, config, "workers", 1)?;
    let exact_verify = args.exact_verify
        || config.get::<bool>("exact-verify")?.unwrap_or(false);

    let model = LinearModel::load(&args.match_model)?;
    let extractor = args.features.build_extractor()?;

    let (scratch, cleanup) = match args.scratch.clone() {
        Some(s) => (s, false),
        None => match config.get::<PathBuf>("scratch")? {
            Some(s) => (s, false),
            None => {
                let dir = std::env::temp_dir().join(format!("citmatch-{}", std::process::id()));
                (dir, true)
            }
        },
    };
    let results_seq = args
        .results_seq
        .clone()
        .unwrap_or_else(|| scratch.join("match-results.seq"));

    let options = MatchOptions {
        threshold,
        workers,
        exact_verify,
        parsed_refs,
    };
    let report = job_match(
        &args.docs,
        &args.index,
        tagger_model.as_ref(),
        &extractor,
        &model,
        &results_seq,
        &scratch,
        &options,
    )?;
    write_match_jsonl(&results_seq, &args.out)?;
    if cleanup {
        let _ = std::fs::remove_dir_all(&scratch);
    }
    print_phases(&report.phases);
    println!(
        "citations processed {}, matched {}, unmatched {}",
        report.citations, report.matched, report.unmatched
    );
    Ok(())
}

fn cmd_train_parser(
    input: &Path,
    out: &Path,
    epochs: usize,
    seed: u64,
    features: &FeatureArgs,
) -> Result<(), CliError> {
    require_file(input, "labeled input")?;
    let text = std::fs::read_to_string(input)?;
    let corpus = parse_labeled_sequences(&text).map_err(CliError::Data)?;
    let extractor = features.build_extractor()?;
    let model = train_tagger(&corpus, epochs, &extractor, seed)?;
    model.save(out)?;
    println!(
        "trained parser on {} sequences ({} features per position) into {}",
        corpus.len(),
        extractor.base_feature_count(),
        out.display()
    );
    Ok(())
}

fn cmd_train_matcher(
    data: &Path,
    out: &Path,
    epochs: usize,
    lambda: f64,
    seed: u64,
    calibrate: bool,
) -> Result<(), CliError> {
    require_file(data, "training data")?;
    let rows = matcher::read_training_tsv(data)?;
    let config = TrainConfig {
        epochs,
        lambda,
        seed,
        calibrate,
    };
    let (model, history) = matcher::train_with_history(&rows, config)?;
    model.save(out)?;
    println!(
        "trained {} matcher on {} rows, final loss {:.6}, into {}",
        model.mode.as_str(),
        rows.len(),
        history.last().copied().unwrap_or(f64::NAN),
        out.display()
    );
    Ok(())
}

fn cmd_cluster(
    pairs: &Path,
    threshold: f64,
    items: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    require_file(pairs, "pair file")?;
    let mut names: Vec<String> = Vec::new();
    if let Some(items) = items {
        require_file(items, "item list")?;
        for line in std::fs::read_to_string(items)?.lines() {
            let line = line.trim();
            if !line.is_empty() {
                names.push(line.to_string());
            }
        }
    }
    let text = std::fs::read_to_string(pairs)?;
    let mut scored: Vec<(String, String, f64)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [a, b, score] = fields.as_slice() else {
            return Err(CliError::Data(format!(
                "{}:{}: expected itemA<TAB>itemB<TAB>score",
                pairs.display(),
                i + 1
            )));
        };
        let score: f64 = score.trim().parse().map_err(|_| {
            CliError::Data(format!("{}:{}: bad score {score:?}", pairs.display(), i + 1))
        })?;
        names.push(a.to_string());
        names.push(b.to_string());
        scored.push((a.to_string(), b.to_string(), score));
    }
    names.sort();
    names.dedup();
    let id_of: HashMap<&str, usize> = names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    let mut edges = Vec::new();
    for (a, b, score) in &scored {
        if *score >= threshold && a != b {
            let (i, j) = (id_of[a.as_str()], id_of[b.as_str()]);
            edges.push((i.min(j), i.max(j)));
        }
    }
    let clustering =
        single_link(names.len(), &edges).map_err(|e| CliError::Data(e.to_string()))?;
    let mut writer = std::io::BufWriter::new(std::fs::File::create(out)?);
    use std::io::Write;
    for (item, &cluster) in clustering.assignment().iter().enumerate() {
        writeln!(writer, "{}\t{}", names[item], names[cluster])?;
    }
    writer.flush()?;
    println!(
        "clustered {} items into {} clusters at threshold {threshold}",
        names.len(),
        clustering.clusters().len()
    );
    Ok(())
}

fn read_clustering_file(path: &Path) -> Result<Vec<(String, String)>, CliError> {
    require_file(path, "clustering file")?;
    let mut assignments = Vec::new();
    for (i, line) in std::fs::read_to_string(path)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (item, cluster) = line.split_once('\t').ok_or_else(|| {
            CliError::Data(format!(
                "{}:{}: expected item<TAB>cluster-id",
                path.display(),
                i + 1
            ))
        })?;
        assignments.push((item.to_string(), cluster.to_string()));
    }
    Ok(assignments)
}

fn cmd_evaluate(pred: &Path, gold: &Path) -> Result<(), CliError> {
    let pred_rows = read_clustering_file(pred)?;
    let gold_rows = read_clustering_file(gold)?;

    let mut items: Vec<&str> = gold_rows.iter().map(|(i, _)| i.as_str()).collect();
    items.sort();
    items.dedup();
    let mut pred_items: Vec<&str> = pred_rows.iter().map(|(i, _)| i.as_str()).collect();
    pred_items.sort();
    pred_items.dedup();
    if items != pred_items {
        return Err(CliError::Data(
            "predicted and gold clusterings cover different item sets".into(),
        ));
    }
    let index_of: HashMap<&str, usize> = items
        .iter()
        .enumerate()
        .map(|(i, n)| (*n, i))
        .collect();

    let to_clustering = |rows: &[(String, String)]| -> Clustering {
        let mut label_ids: HashMap<&str, usize> = HashMap::new();
        let mut labels = vec![0usize; items.len()];
        for (item, cluster) in rows {
            let next = label_ids.len();
            let label = *label_ids.entry(cluster.as_str()).or_insert(next);
            labels[index_of[item.as_str()]] = label;
        }
        Clustering::from_labels(&labels)
    };
    let gold_clustering = to_clustering(&gold_rows);
    let pred_clustering = to_clustering(&pred_rows);

    let recall = cluster_recall(&gold_clustering, &pred_clustering);
    let pm = pairwise_metrics(&gold_clustering, &pred_clustering);
    println!("cluster recall       {:6.2}%", recall * 100.0);
    println!("pairwise precision   {:6.2}%", pm.precision * 100.0);
    println!("pairwise recall      {:6.2}%", pm.recall * 100.0);
    println!("pairwise F1          {:6.2}%", pm.f1 * 100.0);
    Ok(())
}
