//! Corpus-level evaluation: runs the pipeline over every dialog and
//! aggregates state-tracking, retrieval, task-completion and generation
//! metrics into a [`MetricsReport`].

use std::collections::BTreeSet;
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::belief::{extended_prf, joint_goal_match, ExtendedBeliefState, Prf};
use crate::corpus::{Dialog, DialogCorpus};
use crate::error::{Error, Result};
use crate::kb::KnowledgeBase;
use crate::knowops::{rank_documents, KnowledgeOps, DEFAULT_MATCH_FLOOR};
use crate::metrics::{bleu, combined_score, corpus_meteor, corpus_rouge_l, retrieval_metrics};
use crate::pipeline::{run_turn, BeliefPredictor, ResponseGenerator, Session, TurnOutput};
use crate::text::words;
use crate::topic::TopicIndex;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PrfReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl From<Prf> for PrfReport {
    fn from(p: Prf) -> Self {
        PrfReport {
            precision: 100.0 * p.precision,
            recall: 100.0 * p.recall,
            f1: 100.0 * p.f1,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ExtendedPrfReport {
    pub ruk: PrfReport,
    pub topic: PrfReport,
}

/// Every metric on a 0-100 scale; `combined` may exceed 100.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct MetricsReport {
    pub joint_goal: f64,
    pub inform: f64,
    pub success: f64,
    pub bleu: f64,
    pub meteor: f64,
    pub rouge_l: f64,
    pub combined: f64,
    pub mrr_at_5: f64,
    pub r_at_1: f64,
    pub extended_prf: ExtendedPrfReport,
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: [(&str, f64); 15] = [
            ("Joint Goal", self.joint_goal),
            ("Inform", self.inform),
            ("Success", self.success),
            ("BLEU", self.bleu),
            ("METEOR (simplified)", self.meteor),
            ("ROUGE-L", self.rouge_l),
            ("Combined", self.combined),
            ("MRR@5", self.mrr_at_5),
            ("R@1", self.r_at_1),
            ("ruk P", self.extended_prf.ruk.precision),
            ("ruk R", self.extended_prf.ruk.recall),
            ("ruk F1", self.extended_prf.ruk.f1),
            ("topic P", self.extended_prf.topic.precision),
            ("topic R", self.extended_prf.topic.recall),
            ("topic F1", self.extended_prf.topic.f1),
        ];
        for (name, v) in rows {
            writeln!(f, "{name:<20} {v:>7.2}")?;
        }
        Ok(())
    }
}

/// Pipeline outputs for one dialog.
#[derive(Debug, Clone)]
pub struct DialogResult {
    pub dialog_id: String,
    pub outputs: Vec<TurnOutput>,
    /// 1-based rank of the gold document for each annotated turn, in turn
    /// order; `None` when the gold document was not retrieved.
    pub gold_ranks: Vec<Option<usize>>,
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub workers: usize,
    pub floor: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            workers: 1,
            floor: DEFAULT_MATCH_FLOOR,
        }
    }
}

pub fn run_dialog(
    dialog: &Dialog,
    ops: &KnowledgeOps<'_>,
    predictor: &dyn BeliefPredictor,
    generator: &dyn ResponseGenerator,
) -> Result<DialogResult> {
    let mut session = Session::new(&dialog.dialog_id);
    let mut outputs = Vec::with_capacity(dialog.turns.len());
    let mut gold_ranks = Vec::new();
    for (i, turn) in dialog.turns.iter().enumerate() {
        let out = run_turn(
            &mut session,
            &turn.user,
            Some(&turn.gold_belief),
            predictor,
            generator,
            ops,
        )?;
        if let Some(gold) = &turn.doc_annotation {
            let ranked = rank_documents(ops.kb, ops.index, &out.belief, ops.floor)
                .map_err(|e| e.at_turn(&dialog.dialog_id, i))?;
            let rank = ranked.and_then(|(_, list)| {
                list.iter().position(|r| r.key == *gold).map(|p| p + 1)
            });
            gold_ranks.push(rank);
        }
        outputs.push(out);
    }
    Ok(DialogResult {
        dialog_id: dialog.dialog_id.clone(),
        outputs,
        gold_ranks,
    })
}

/// Inform and success rates over dialogs, in percent.
///
/// A goal domain is informed when some turn whose active domain is that
/// domain offers `[name]` while its matched entities include one that meets
/// the goal constraints; a domain without constraints needs no offer. A
/// dialog succeeds when it is informed and every requestable slot's
/// placeholder appears in a response of its domain.
pub fn inform_success(
    dialogs: &[&Dialog],
    results: &[&DialogResult],
    kb: &KnowledgeBase,
) -> Result<(f64, f64)> {
    if dialogs.len() != results.len() {
        return Err(Error::Alignment {
            preds: results.len(),
            golds: dialogs.len(),
        });
    }
    if dialogs.is_empty() {
        return Ok((0.0, 0.0));
    }
    let (mut informed, mut succeeded) = (0usize, 0usize);
    for (dialog, result) in dialogs.iter().zip(results) {
        let mut all_informed = true;
        let mut all_requested = true;
        for (domain_name, goal) in &dialog.goal {
            let domain = kb
                .domain(domain_name)
                .map_err(|_| Error::Goal(format!("{}: unknown goal domain {domain_name}", dialog.dialog_id)))?;
            if let Some(s) = goal.constraints.keys().find(|s| !domain.slot_schema.contains(*s)) {
                return Err(Error::Goal(format!(
                    "{}: goal slot {s} not in the {domain_name} schema",
                    dialog.dialog_id
                )));
            }
            let satisfying: BTreeSet<&str> = domain
                .entities
                .iter()
                .filter(|e| {
                    goal.constraints
                        .iter()
                        .all(|(s, v)| e.attributes.get(s) == Some(v))
                })
                .map(|e| e.id.as_str())
                .collect();
            let in_domain: Vec<&TurnOutput> = result
                .outputs
                .iter()
                .filter(|o| o.belief.active_domain() == Some(domain_name.as_str()))
                .collect();
            let domain_informed = goal.constraints.is_empty()
                || in_domain.iter().any(|o| {
                    o.delexicalized_response.contains("[name]")
                        && o.query.domain(domain_name).is_some_and(|m| {
                            m.matched_entity_ids
                                .iter()
                                .any(|id| satisfying.contains(id.as_str()))
                        })
                });
            let domain_requested = goal.requestables.iter().all(|r| {
                let placeholder = format!("[{r}]");
                in_domain
                    .iter()
                    .any(|o| o.delexicalized_response.contains(&placeholder))
            });
            all_informed &= domain_informed;
            all_requested &= domain_requested;
        }
        if all_informed {
            informed += 1;
            if all_requested {
                succeeded += 1;
            }
        }
    }
    let n = dialogs.len() as f64;
    Ok((100.0 * informed as f64 / n, 100.0 * succeeded as f64 / n))
}

/// Aggregates per-dialog results. Dialogs are processed in id order so the
/// report does not depend on corpus order or worker count.
pub fn aggregate(corpus: &DialogCorpus, results: &[DialogResult], kb: &KnowledgeBase) -> Result<MetricsReport> {
    let mut pairs: Vec<(&Dialog, &DialogResult)> = corpus.dialogs.iter().zip(results).collect();
    pairs.sort_by(|a, b| a.0.dialog_id.cmp(&b.0.dialog_id));

    let mut jg_hits = 0usize;
    let mut jg_total = 0usize;
    let mut preds: Vec<ExtendedBeliefState> = Vec::new();
    let mut golds: Vec<ExtendedBeliefState> = Vec::new();
    let mut hyps = Vec::new();
    let mut refs = Vec::new();
    let mut ranks = Vec::new();
    for (dialog, result) in &pairs {
        for (turn, out) in dialog.turns.iter().zip(&result.outputs) {
            if !turn.is_inserted() {
                jg_total += 1;
                jg_hits += joint_goal_match(&out.belief, &turn.gold_belief) as usize;
            }
            preds.push(out.belief.clone());
            golds.push(turn.gold_belief.clone());
            hyps.push(words(&out.delexicalized_response));
            refs.push(words(turn.reference()));
        }
        ranks.extend(result.gold_ranks.iter().copied());
    }

    let dialogs: Vec<&Dialog> = pairs.iter().map(|p| p.0).collect();
    let dialog_results: Vec<&DialogResult> = pairs.iter().map(|p| p.1).collect();
    let (inform, success) = inform_success(&dialogs, &dialog_results, kb)?;
    let (bleu_score, rouge, meteor) = if hyps.is_empty() {
        (0.0, 0.0, 0.0)
    } else {
        (bleu(&hyps, &refs)?, corpus_rouge_l(&hyps, &refs)?, corpus_meteor(&hyps, &refs)?)
    };
    let retrieval = if ranks.is_empty() {
        None
    } else {
        Some(retrieval_metrics(&ranks)?)
    };
    let prf = extended_prf(&preds, &golds)?;
    Ok(MetricsReport {
        joint_goal: if jg_total == 0 {
            0.0
        } else {
            100.0 * jg_hits as f64 / jg_total as f64
        },
        inform,
        success,
        bleu: bleu_score,
        meteor,
        rouge_l: rouge,
        combined: combined_score(inform, success, bleu_score),
        mrr_at_5: retrieval.map_or(0.0, |r| r.mrr_at_5),
        r_at_1: retrieval.map_or(0.0, |r| r.r_at_1),
        extended_prf: ExtendedPrfReport {
            ruk: prf.ruk.into(),
            topic: prf.topic.into(),
        },
    })
}

/// Runs every dialog through the pipeline on `options.workers` threads and
/// aggregates the metrics.
pub fn evaluate_corpus(
    corpus: &DialogCorpus,
    kb: &KnowledgeBase,
    index: &TopicIndex,
    predictor: &dyn BeliefPredictor,
    generator: &dyn ResponseGenerator,
    options: &EvalOptions,
) -> Result<(MetricsReport, Vec<DialogResult>)> {
    let ops = KnowledgeOps::new(kb, index).with_floor(options.floor);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let results: Vec<DialogResult> = pool.install(|| {
        corpus
            .dialogs
            .par_iter()
            .map(|d| run_dialog(d, &ops, predictor, generator))
            .collect::<Result<Vec<_>>>()
    })?;
    let report = aggregate(corpus, &results, kb)?;
    Ok((report, results))
}

/// Report file contents: the metrics plus run metadata.
#[derive(Debug, Clone, Serialize)]
pub struct ReportFile {
    pub metrics: MetricsReport,
    pub predictor: String,
    pub seed: u64,
    pub corpus_sha256: String,
    pub index_sha256: String,
    pub stopwords_sha256: String,
    pub dialogs: usize,
    pub turns: usize,
}

impl ReportFile {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash over an index's file and sidecar text.
pub fn index_sha256(index: &TopicIndex) -> String {
    let mut h = Sha256::new();
    h.update(index.to_tsv().as_bytes());
    h.update(index.sidecar_json().as_bytes());
    hex::encode(h.finalize())
}
