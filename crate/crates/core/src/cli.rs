//! Command-line front end. Exit status: 0 on success, 1 on domain errors,
//! 2 on usage errors. Every failure prints `error: <kind>: <detail>` on
//! stderr.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::belief::parse_belief_span;
use crate::corpus::{corpus_stats, load_corpus, DialogCorpus};
use crate::corrupt::{corrupt_samples, to_jsonl, DialogSample};
use crate::error::{Error, Result};
use crate::eval::{evaluate_corpus, index_sha256, sha256_hex, EvalOptions, ReportFile};
use crate::kb::{fuse, load_knowledge_base, validate_knowledge_base, KnowledgeBase, Ontology};
use crate::knowops::{format_query_span, rank_documents, structured_query, KnowledgeOps, DEFAULT_MATCH_FLOOR};
use crate::pipeline::{
    run_turn, BeliefPredictor, HeuristicPredictor, OraclePredictor, Session, TemplateGenerator, Templates,
};
use crate::topic::{build_topic_index, Thresholds, Tokenizer, TopicIndex};

#[derive(Debug, Parser)]
#[command(name = "sskm", version, about = "Semi-structured knowledge management for task-oriented dialog")]
pub struct CliConfig {
    /// Extra diagnostics on stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct KbArgs {
    /// Structured records (db) file.
    #[arg(long)]
    pub kb: PathBuf,
    /// Document-base file; omitted means no documents.
    #[arg(long)]
    pub docs: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PredictorChoice {
    Oracle,
    Heuristic,
}

fn parse_threshold(s: &str) -> std::result::Result<(String, f64), String> {
    let (d, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected domain=value, got {s:?}"))?;
    let v: f64 = v.parse().map_err(|_| format!("bad threshold value {v:?}"))?;
    Ok((d.trim().to_lowercase(), v))
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the topic index over the document base.
    BuildIndex {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        docs: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Per-domain override, repeatable: `--threshold hotel=3.1`.
        #[arg(long = "threshold", value_parser = parse_threshold)]
        thresholds: Vec<(String, f64)>,
    },
    /// Print the query span for a belief span.
    Query {
        #[command(flatten)]
        kb: KbArgs,
        #[arg(long)]
        belief: String,
    },
    /// Print ranked documents for a belief span carrying ruk and topic.
    Retrieve {
        #[command(flatten)]
        kb: KbArgs,
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        belief: String,
        #[arg(long, default_value_t = DEFAULT_MATCH_FLOOR)]
        floor: f64,
    },
    /// Run the pipeline over a corpus and write one line per turn.
    Run {
        #[command(flatten)]
        kb: KbArgs,
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum)]
        predictor: PredictorChoice,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Label a corpus's turns for consistency training, corrupting half.
    Corrupt {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Optional knowledge base for query spans, documents and ontology.
        #[arg(long)]
        kb: Option<PathBuf>,
        #[arg(long, requires = "kb")]
        docs: Option<PathBuf>,
    },
    /// Evaluate a predictor on a corpus and write a report.
    Eval {
        #[command(flatten)]
        kb: KbArgs,
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum, default_value = "oracle")]
        predictor: PredictorChoice,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Corpus and knowledge-base statistics.
    Stats {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        kb: Option<PathBuf>,
        #[arg(long, requires = "kb")]
        docs: Option<PathBuf>,
    },
    /// Interactive session on stdin with the heuristic predictor.
    Chat {
        #[command(flatten)]
        kb: KbArgs,
        #[arg(long)]
        index: PathBuf,
    },
}

fn load_kb(kb: &Path, docs: Option<&Path>) -> Result<KnowledgeBase> {
    match docs {
        Some(d) => load_knowledge_base(kb, d),
        None => {
            let text = fs::read_to_string(kb).map_err(|e| Error::load(kb, e.to_string()))?;
            let db = serde_json::from_str(&text).map_err(|e| {
                Error::load(kb, format!("line {} column {}: {e}", e.line(), e.column()))
            })?;
            fuse(db, Vec::new()).map_err(|e| match e {
                Error::Load { detail, .. } => Error::load(kb, detail),
                other => other,
            })
        }
    }
}

fn predictor<'a>(
    choice: PredictorChoice,
    kb: &'a KnowledgeBase,
    index: &'a TopicIndex,
    tokenizer: &Tokenizer,
) -> Box<dyn BeliefPredictor + 'a> {
    match choice {
        PredictorChoice::Oracle => Box::new(OraclePredictor),
        PredictorChoice::Heuristic => Box::new(HeuristicPredictor::new(kb, index, tokenizer.clone())),
    }
}

fn corpus_samples(corpus: &DialogCorpus, kb: Option<&KnowledgeBase>) -> Result<Vec<DialogSample>> {
    let mut out = Vec::new();
    for d in &corpus.dialogs {
        let mut context: Vec<String> = Vec::new();
        for (i, t) in d.turns.iter().enumerate() {
            context.push(t.user.clone());
            let (query_span, document) = match kb {
                Some(kb) => {
                    let q = structured_query(kb, &t.gold_belief).map_err(|e| e.at_turn(&d.dialog_id, i))?;
                    let doc = t
                        .doc_annotation
                        .as_ref()
                        .and_then(|k| kb.entity(&k.domain, &k.entity_id)?.document(&k.doc_id))
                        .map(|doc| doc.body.clone())
                        .unwrap_or_default();
                    (format_query_span(&q), doc)
                }
                None => (String::new(), String::new()),
            };
            out.push(DialogSample {
                context: context.join(" | "),
                belief_span: crate::belief::serialize_belief(&t.gold_belief),
                query_span,
                document,
                response: t.reference().to_string(),
            });
            context.push(t.response.clone());
        }
    }
    Ok(out)
}

fn corpus_ontology(corpus: &DialogCorpus, kb: Option<&KnowledgeBase>) -> Ontology {
    let mut ontology = kb.map(KnowledgeBase::ontology).unwrap_or_default();
    for t in corpus.dialogs.iter().flat_map(|d| &d.turns) {
        for triple in t.gold_belief.triples() {
            ontology
                .slots
                .entry((triple.domain.clone(), triple.slot.clone()))
                .or_default()
                .insert(triple.value.clone());
        }
    }
    ontology
}

fn execute(config: CliConfig, stdout: &mut dyn Write) -> Result<()> {
    let verbose = config.verbose;
    match config.command {
        Command::BuildIndex { kb, docs, out, thresholds } => {
            let kb = load_knowledge_base(&kb, &docs)?;
            let mut t = Thresholds::default();
            for (d, v) in thresholds {
                t.set(&d, v);
            }
            let tokenizer = Tokenizer::from_env()?;
            let index = build_topic_index(&kb, &t, &tokenizer)?;
            index.write(&out)?;
            if verbose > 0 {
                eprintln!("indexed {} documents", index.len());
            }
        }
        Command::Query { kb, belief } => {
            let kb = load_kb(&kb.kb, kb.docs.as_deref())?;
            let state = parse_belief_span(&belief)?;
            let q = structured_query(&kb, &state)?;
            writeln!(stdout, "{}", format_query_span(&q))?;
        }
        Command::Retrieve { kb, index, belief, floor } => {
            let kb = load_kb(&kb.kb, kb.docs.as_deref())?;
            let index = TopicIndex::load(&index)?;
            let state = parse_belief_span(&belief)?;
            if let Some((m, ranked)) = rank_documents(&kb, &index, &state, floor)? {
                for (i, r) in ranked.iter().enumerate() {
                    writeln!(
                        stdout,
                        "{}\t{:.4}\t{}\t{}\t{}",
                        i + 1,
                        r.score,
                        r.key.domain,
                        m.entity.id,
                        r.key.doc_id
                    )?;
                }
            }
        }
        Command::Run { kb, index, corpus, predictor: choice, out, workers } => {
            let kb = load_kb(&kb.kb, kb.docs.as_deref())?;
            let index = TopicIndex::load(&index)?;
            let corpus = load_corpus(&corpus)?;
            let tokenizer = Tokenizer::from_env()?;
            let p = predictor(choice, &kb, &index, &tokenizer);
            let generator = TemplateGenerator::new(Templates::default(), &kb);
            let options = EvalOptions { workers, ..EvalOptions::default() };
            let (_, results) = evaluate_corpus(&corpus, &kb, &index, p.as_ref(), &generator, &options)?;
            let mut text = String::new();
            for r in &results {
                for (i, o) in r.outputs.iter().enumerate() {
                    let doc = o
                        .document
                        .hit()
                        .map(|h| format!("{}/{}/{}", h.key.domain, h.key.entity_id, h.key.doc_id))
                        .unwrap_or_else(|| "-".to_string());
                    text.push_str(&format!(
                        "{}:{}\t{}\t{}\t{}\t{}\t{}\n",
                        r.dialog_id, i, o.belief, o.query_span, doc, o.delexicalized_response, o.lexicalized_response
                    ));
                }
            }
            fs::write(&out, text)?;
        }
        Command::Corrupt { corpus, seed, out, kb, docs } => {
            let corpus = load_corpus(&corpus)?;
            let kb = match kb {
                Some(k) => Some(load_kb(&k, docs.as_deref())?),
                None => None,
            };
            let samples = corpus_samples(&corpus, kb.as_ref())?;
            let ontology = corpus_ontology(&corpus, kb.as_ref());
            let labelled = corrupt_samples(&samples, seed, &ontology)?;
            fs::write(&out, to_jsonl(&labelled))?;
        }
        Command::Eval { kb, index, corpus: corpus_path, predictor: choice, out, workers, seed } => {
            let kb = load_kb(&kb.kb, kb.docs.as_deref())?;
            let index = TopicIndex::load(&index)?;
            let corpus_bytes = fs::read(&corpus_path).map_err(|e| Error::load(&corpus_path, e.to_string()))?;
            let corpus = load_corpus(&corpus_path)?;
            let tokenizer = Tokenizer::from_env()?;
            let p = predictor(choice, &kb, &index, &tokenizer);
            let generator = TemplateGenerator::new(Templates::default(), &kb);
            let options = EvalOptions { workers, ..EvalOptions::default() };
            let (metrics, _) = evaluate_corpus(&corpus, &kb, &index, p.as_ref(), &generator, &options)?;
            let report = ReportFile {
                metrics,
                predictor: format!("{choice:?}").to_lowercase(),
                seed,
                corpus_sha256: sha256_hex(&corpus_bytes),
                index_sha256: index_sha256(&index),
                stopwords_sha256: index.stopwords_sha256().to_string(),
                dialogs: corpus.dialogs.len(),
                turns: corpus.turn_count(),
            };
            fs::write(&out, report.to_json())?;
            write!(stdout, "{metrics}")?;
        }
        Command::Stats { corpus, kb, docs } => {
            let corpus = load_corpus(&corpus)?;
            let stats = corpus_stats(&corpus);
            let mut fields: BTreeMap<&str, String> = BTreeMap::new();
            fields.insert("dialogs", stats.dialogs.to_string());
            fields.insert("turns", stats.turns.to_string());
            fields.insert("mean_turns", format!("{:.2}", stats.mean_turns));
            fields.insert("slot_types", stats.slot_types.to_string());
            fields.insert("slot_values", stats.slot_values.to_string());
            fields.insert("doc_annotated_fraction", format!("{:.4}", stats.doc_annotated_fraction));
            if let Some(k) = kb {
                let kb = load_kb(&k, docs.as_deref())?;
                let report = validate_knowledge_base(&kb);
                fields.insert("entities", report.entity_count.to_string());
                fields.insert("documents", report.document_count.to_string());
            }
            for (k, v) in fields {
                writeln!(stdout, "{k}\t{v}")?;
            }
        }
        Command::Chat { kb, index } => {
            let kb = load_kb(&kb.kb, kb.docs.as_deref())?;
            let index = TopicIndex::load(&index)?;
            let tokenizer = Tokenizer::from_env()?;
            let p = HeuristicPredictor::new(&kb, &index, tokenizer);
            let generator = TemplateGenerator::new(Templates::default(), &kb);
            let ops = KnowledgeOps::new(&kb, &index);
            let mut session = Session::new("chat");
            for line in io::stdin().lock().lines() {
                let line = line?;
                let out = run_turn(&mut session, &line, None, &p, &generator, &ops)?;
                writeln!(stdout, "belief: {}", out.belief)?;
                writeln!(stdout, "query: {}", out.query_span)?;
                writeln!(stdout, "system: {}", out.lexicalized_response)?;
            }
        }
    }
    Ok(())
}

/// Parses `argv` (including the program name), runs the command, and
/// returns the process exit status.
pub fn dispatch<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let config = match CliConfig::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let rendered = e.to_string();
            let first = rendered
                .lines()
                .next()
                .unwrap_or("")
                .trim_start_matches("error: ");
            let _ = writeln!(stderr, "error: usage: {first}");
            let _ = write!(stderr, "{rendered}");
            return 2;
        }
    };
    match execute(config, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}: {}", e.kind(), e);
            1
        }
    }
}
