//! Command-line behavior: exit codes, idempotent outputs, end-to-end runs
//! through the binary.

use std::path::Path;
use std::process::Command;

use citmatch_core::corpus::DocumentRecord;
use citmatch_core::pipeline::write_corpus_seqfile;
use citmatch_core::synth::{generate, SynthConfig};

fn citmatch() -> Command {
    Command::new(env!("CARGO_BIN_EXE_citmatch"))
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

#[test]
fn ingest_counts_documents() {
    let dir = tempfile::tempdir().unwrap();
    let jsonl = dir.path().join("docs.jsonl");
    write(
        &jsonl,
        concat!(
            r#"{"id":"a","authors":["X"],"title":"","journal":"","pages":[],"references":[]}"#,
            "\n",
            r#"{"id":"b","authors":[]}"#,
            "\n",
            r#"{"id":"c"}"#,
            "\n"
        ),
    );
    let out = dir.path().join("docs.seq");
    let output = citmatch()
        .args(["ingest", "--docs"])
        .arg(&jsonl)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("ingested 3 documents"), "stdout: {stdout}");
}

#[test]
fn ingest_reports_partial_failure() {
    let dir = tempfile::tempdir().unwrap();
    let jsonl = dir.path().join("docs.jsonl");
    write(
        &jsonl,
        concat!(
            r#"{"id":"a"}"#,
            "\n",
            "definitely not json\n",
            r#"{"id":"b"}"#,
            "\n"
        ),
    );
    let out = dir.path().join("docs.seq");
    let output = citmatch()
        .args(["ingest", "--docs"])
        .arg(&jsonl)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("ingested 2 documents"));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("line 2"), "stderr: {stderr}");
}

#[test]
fn ingest_empty_file_succeeds_with_zero() {
    let dir = tempfile::tempdir().unwrap();
    let jsonl = dir.path().join("docs.jsonl");
    write(&jsonl, "");
    let out = dir.path().join("docs.seq");
    let output = citmatch()
        .args(["ingest", "--docs"])
        .arg(&jsonl)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success());
    assert!(String::from_utf8_lossy(&output.stdout).contains("ingested 0 documents"));
}

#[test]
fn missing_input_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let output = citmatch()
        .args(["ingest", "--docs"])
        .arg(dir.path().join("nope.jsonl"))
        .arg("--out")
        .arg(dir.path().join("out.seq"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn match_requires_existing_index_before_any_work() {
    let dir = tempfile::tempdir().unwrap();
    let docs = dir.path().join("docs.seq");
    write_corpus_seqfile(&docs, &[]).unwrap();
    let model = dir.path().join("m.txt");
    write(&model, "citmatch-matcher-v1\nmode\tpipeline\nbias\t0\ncalibration\t1\t0\n");
    let output = citmatch()
        .args(["match", "--docs"])
        .arg(&docs)
        .arg("--index")
        .arg(dir.path().join("missing-index"))
        .arg("--match-model")
        .arg(&model)
        .args(["--parsed-refs", "--out"])
        .arg(dir.path().join("out.jsonl"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("index directory"), "stderr: {stderr}");
}

#[test]
fn build_index_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate(&SynthConfig {
        documents: 15,
        seed: 3,
        ..Default::default()
    });
    let docs = dir.path().join("docs.seq");
    write_corpus_seqfile(&docs, &corpus.documents).unwrap();

    let mut images = Vec::new();
    for (run, workers) in [(0, "1"), (1, "4"), (2, "4")] {
        let out = dir.path().join(format!("index-{run}"));
        let output = citmatch()
            .args(["build-index", "--docs"])
            .arg(&docs)
            .arg("--out")
            .arg(&out)
            .args(["--workers", workers])
            .output()
            .unwrap();
        assert!(output.status.success());
        let stdout = String::from_utf8_lossy(&output.stdout);
        assert!(stdout.contains("index entries"), "stdout: {stdout}");
        images.push((
            std::fs::read(out.join("data.seq")).unwrap(),
            std::fs::read(out.join("index.seq")).unwrap(),
        ));
    }
    assert_eq!(images[0], images[1]);
    assert_eq!(images[1], images[2]);
}

/// Full command walk: ingest, build-index, train-parser, train-matcher,
/// match, then evaluate perfect clusterings.
#[test]
fn full_cli_walkthrough() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate(&SynthConfig {
        documents: 25,
        seed: 21,
        ..Default::default()
    });

    // Documents plus one query document whose references render known docs.
    let mut docs = corpus.documents.clone();
    let mut query = DocumentRecord {
        id: "query-1".into(),
        authors: vec![],
        title: String::new(),
        journal: String::new(),
        year: None,
        pages: Default::default(),
        references: vec![],
    };
    let targets: Vec<&str> = corpus.renders[..4]
        .iter()
        .map(|r| {
            query.references.push(r.text.clone());
            r.source_doc_id.as_str()
        })
        .collect();
    docs.push(query);

    let jsonl = dir.path().join("docs.jsonl");
    citmatch_core::corpus::write_jsonl_corpus(&jsonl, &docs).unwrap();
    let docs_seq = dir.path().join("docs.seq");
    assert!(citmatch()
        .args(["ingest", "--docs"])
        .arg(&jsonl)
        .arg("--out")
        .arg(&docs_seq)
        .status()
        .unwrap()
        .success());

    let index_dir = dir.path().join("index");
    assert!(citmatch()
        .args(["build-index", "--docs"])
        .arg(&docs_seq)
        .arg("--out")
        .arg(&index_dir)
        .args(["--workers", "2"])
        .status()
        .unwrap()
        .success());

    // Parser training data from the synthetic renders.
    let labeled: Vec<_> = corpus.renders.iter().map(|r| r.labeled()).collect();
    let labeled_path = dir.path().join("labeled.txt");
    write(
        &labeled_path,
        &citmatch_core::parser::format_labeled_sequences(&labeled),
    );
    let parser_model = dir.path().join("parser.model");
    assert!(citmatch()
        .args(["train-parser", "--input"])
        .arg(&labeled_path)
        .arg("--out")
        .arg(&parser_model)
        .args(["--epochs", "10", "--seed", "5"])
        .status()
        .unwrap()
        .success());

    // Matcher training data: every render scored against its own document
    // (match) and two others (non-match).
    let mut rows = Vec::new();
    {
        use citmatch_core::similarity::{feature_vector, FeatureMode, FieldView};
        let by_id: std::collections::HashMap<&str, &DocumentRecord> = corpus
            .documents
            .iter()
            .map(|d| (d.id.as_str(), d))
            .collect();
        let extractor = citmatch_core::parser::FeatureExtractor::new(
            citmatch_core::parser::Dictionaries::bundled(),
        );
        let model = citmatch_core::parser::TaggerModel::load(&parser_model).unwrap();
        let tagger = citmatch_core::parser::Tagger::new(&model, &extractor);
        for (i, render) in corpus.renders.iter().enumerate() {
            let labels = tagger.tag(&render.tokens);
            let parsed = citmatch_core::parser::assemble(&render.text, &render.tokens, &labels);
            let view = FieldView::from_citation(&parsed);
            let own = by_id[render.source_doc_id.as_str()];
            rows.push((
                feature_vector(&view, &FieldView::from_document(own), FeatureMode::Pipeline),
                true,
            ));
            let other = &corpus.documents[(i * 13 + 1) % corpus.documents.len()];
            if other.id != render.source_doc_id {
                rows.push((
                    feature_vector(
                        &view,
                        &FieldView::from_document(other),
                        FeatureMode::Pipeline,
                    ),
                    false,
                ));
            }
        }
        citmatch_core::matcher::write_training_tsv(&dir.path().join("train.tsv"), &rows)
            .unwrap();
    }
    let match_model = dir.path().join("match.model");
    assert!(citmatch()
        .args(["train-matcher", "--data"])
        .arg(dir.path().join("train.tsv"))
        .arg("--out")
        .arg(&match_model)
        .status()
        .unwrap()
        .success());

    let out_jsonl = dir.path().join("results.jsonl");
    let output = citmatch()
        .args(["match", "--docs"])
        .arg(&docs_seq)
        .arg("--index")
        .arg(&index_dir)
        .arg("--parser-model")
        .arg(&parser_model)
        .arg("--match-model")
        .arg(&match_model)
        .args(["--workers", "2", "--out"])
        .arg(&out_jsonl)
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("citation extraction"));
    assert!(stdout.contains("heuristic matching"));
    assert!(stdout.contains("selecting the best match"));
    assert!(stdout.contains("citations processed 4"), "stdout: {stdout}");

    // The four references of the query document should match their sources.
    let text = std::fs::read_to_string(&out_jsonl).unwrap();
    let results: Vec<citmatch_core::corpus::MatchResult> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(results.len(), 4);
    let mut correct = 0;
    for r in &results {
        assert_eq!(r.source_doc_id, "query-1");
        if r.matched_doc_id.as_deref() == Some(targets[r.reference_index as usize]) {
            correct += 1;
        }
    }
    assert!(correct >= 3, "only {correct}/4 references matched correctly");
}

#[test]
fn match_threshold_one_matches_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate(&SynthConfig {
        documents: 10,
        seed: 31,
        ..Default::default()
    });
    let mut docs = corpus.documents.clone();
    let mut query = DocumentRecord {
        id: "q".into(),
        authors: vec![],
        title: String::new(),
        journal: String::new(),
        year: None,
        pages: Default::default(),
        references: vec![corpus.renders[0].text.clone()],
    };
    // Pre-parsed bypass avoids needing a parser model here.
    let parsed = citmatch_core::parser::ParsedCitation {
        raw: std::mem::take(&mut query.references[0]),
        ..Default::default()
    };
    query.references[0] = serde_json::to_string(&parsed).unwrap();
    docs.push(query);
    let docs_seq = dir.path().join("docs.seq");
    write_corpus_seqfile(&docs_seq, &docs).unwrap();
    let index_dir = dir.path().join("index");
    assert!(citmatch()
        .args(["build-index", "--docs"])
        .arg(&docs_seq)
        .arg("--out")
        .arg(&index_dir)
        .status()
        .unwrap()
        .success());
    let model = dir.path().join("m.txt");
    write(
        &model,
        "citmatch-matcher-v1\nmode\tpipeline\nbias\t0\ncalibration\t1\t0\n\
         weight\tauthorTokenSim\t1\n",
    );
    let out = dir.path().join("r.jsonl");
    let output = citmatch()
        .args(["match", "--docs"])
        .arg(&docs_seq)
        .arg("--index")
        .arg(&index_dir)
        .arg("--match-model")
        .arg(&model)
        .args(["--parsed-refs", "--threshold", "1.0", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("matched 0"), "stdout: {stdout}");
}

#[test]
fn cluster_and_evaluate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let pairs = dir.path().join("pairs.tsv");
    write(&pairs, "a\tb\t0.9\nb\tc\t0.2\nc\td\t0.8\n");
    let clusters = dir.path().join("pred.tsv");
    let output = citmatch()
        .args(["cluster", "--pairs"])
        .arg(&pairs)
        .args(["--threshold", "0.5", "--out"])
        .arg(&clusters)
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = std::fs::read_to_string(&clusters).unwrap();
    // {a,b} and {c,d}: canonical ids are the smallest member names.
    assert_eq!(text, "a\ta\nb\ta\nc\tc\nd\tc\n");

    // evaluate(gold, gold) = all 100%.
    let output = citmatch()
        .args(["evaluate", "--pred"])
        .arg(&clusters)
        .arg("--gold")
        .arg(&clusters)
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("cluster recall       100.00%"), "{stdout}");
    assert!(stdout.contains("pairwise F1          100.00%"), "{stdout}");
}

#[test]
fn cluster_above_all_scores_yields_singletons() {
    let dir = tempfile::tempdir().unwrap();
    let pairs = dir.path().join("pairs.tsv");
    write(&pairs, "a\tb\t0.99\nb\tc\t1.0\n");
    let clusters = dir.path().join("out.tsv");
    let output = citmatch()
        .args(["cluster", "--pairs"])
        .arg(&pairs)
        .args(["--threshold", "1.01", "--out"])
        .arg(&clusters)
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = std::fs::read_to_string(&clusters).unwrap();
    assert_eq!(text, "a\ta\nb\tb\nc\tc\n");
}

#[test]
fn evaluate_rejects_mismatched_item_sets() {
    let dir = tempfile::tempdir().unwrap();
    let pred = dir.path().join("pred.tsv");
    let gold = dir.path().join("gold.tsv");
    write(&pred, "a\t0\n");
    write(&gold, "a\t0\nb\t0\n");
    let output = citmatch()
        .args(["evaluate", "--pred"])
        .arg(&pred)
        .arg("--gold")
        .arg(&gold)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
}

#[test]
fn config_file_supplies_defaults_under_flags() {
    let dir = tempfile::tempdir().unwrap();
    let pairs = dir.path().join("pairs.tsv");
    write(&pairs, "a\tb\t0.6\n");
    let config = dir.path().join("citmatch.conf");
    write(&config, "# settings\nthreshold = 0.9\n");

    // Config threshold 0.9 splits the pair.
    let out1 = dir.path().join("c1.tsv");
    assert!(citmatch()
        .args(["cluster", "--pairs"])
        .arg(&pairs)
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out1)
        .status()
        .unwrap()
        .success());
    assert_eq!(std::fs::read_to_string(&out1).unwrap(), "a\ta\nb\tb\n");

    // An explicit flag wins over the config file.
    let out2 = dir.path().join("c2.tsv");
    assert!(citmatch()
        .args(["cluster", "--pairs"])
        .arg(&pairs)
        .arg("--config")
        .arg(&config)
        .args(["--threshold", "0.5", "--out"])
        .arg(&out2)
        .status()
        .unwrap()
        .success());
    assert_eq!(std::fs::read_to_string(&out2).unwrap(), "a\ta\nb\ta\n");
}
