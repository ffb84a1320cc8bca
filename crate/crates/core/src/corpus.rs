//! Annotated dialog corpora: one JSON object per line, one dialog per object.
//!
//! ```json
//! {"dialog_id":"d1","goal":{"restaurant":{"constraints":{"food":"italian"},"requestables":["phone"]}},
//!  "turns":[{"user":"...","response":"...","belief_span":"restaurant { food = italian }"}]}
//! ```
//!
//! Gold spans are stored already extended with `ruk` and topic on turns that
//! carry a `doc` annotation.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::belief::{parse_belief_span, serialize_belief, ExtendedBeliefState};
use crate::error::{Error, Result};
use crate::topic::DocKey;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainGoal {
    #[serde(default)]
    pub constraints: BTreeMap<String, String>,
    #[serde(default)]
    pub requestables: BTreeSet<String>,
}

/// Per-dialog user goal, keyed by domain.
pub type GoalSpec = BTreeMap<String, DomainGoal>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DialogTurn {
    pub user: String,
    pub response: String,
    pub gold_belief: ExtendedBeliefState,
    pub doc_annotation: Option<DocKey>,
    pub delex_response: Option<String>,
}

impl DialogTurn {
    /// Turns with a document annotation were inserted for unstructured
    /// knowledge; the rest are original turns.
    pub fn is_inserted(&self) -> bool {
        self.doc_annotation.is_some()
    }

    /// Reference text for generation metrics.
    pub fn reference(&self) -> &str {
        self.delex_response.as_deref().unwrap_or(&self.response)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dialog {
    pub dialog_id: String,
    pub goal: GoalSpec,
    pub turns: Vec<DialogTurn>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DialogCorpus {
    pub dialogs: Vec<Dialog>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocRef {
    domain: String,
    entity_id: String,
    doc_id: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TurnRecord {
    user: String,
    response: String,
    belief_span: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    doc: Option<DocRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delex_response: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DialogRecord {
    dialog_id: String,
    #[serde(default)]
    goal: GoalSpec,
    turns: Vec<TurnRecord>,
}

impl DialogCorpus {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut dialogs = Vec::new();
        let mut ids = BTreeSet::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: DialogRecord = serde_json::from_str(line).map_err(|e| {
                Error::load(origin, format!("line {} column {}: {e}", n + 1, e.column()))
            })?;
            if !ids.insert(rec.dialog_id.clone()) {
                return Err(Error::load(
                    origin,
                    format!("line {}: duplicate dialog id {}", n + 1, rec.dialog_id),
                ));
            }
            let mut turns = Vec::with_capacity(rec.turns.len());
            for (i, t) in rec.turns.into_iter().enumerate() {
                let gold_belief =
                    parse_belief_span(&t.belief_span).map_err(|e| e.at_turn(&rec.dialog_id, i))?;
                let doc_annotation = t.doc.map(|d| DocKey::new(&d.domain, &d.entity_id, &d.doc_id));
                if doc_annotation.is_some() && gold_belief.ruk().is_none() {
                    return Err(Error::Label("annotated turn has no ruk triple".into())
                        .at_turn(&rec.dialog_id, i));
                }
                turns.push(DialogTurn {
                    user: t.user,
                    response: t.response,
                    gold_belief,
                    doc_annotation,
                    delex_response: t.delex_response,
                });
            }
            dialogs.push(Dialog {
                dialog_id: rec.dialog_id,
                goal: rec.goal,
                turns,
            });
        }
        Ok(DialogCorpus { dialogs })
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for d in &self.dialogs {
            let rec = DialogRecord {
                dialog_id: d.dialog_id.clone(),
                goal: d.goal.clone(),
                turns: d
                    .turns
                    .iter()
                    .map(|t| TurnRecord {
                        user: t.user.clone(),
                        response: t.response.clone(),
                        belief_span: serialize_belief(&t.gold_belief),
                        doc: t.doc_annotation.as_ref().map(|k| DocRef {
                            domain: k.domain.clone(),
                            entity_id: k.entity_id.clone(),
                            doc_id: k.doc_id.clone(),
                        }),
                        delex_response: t.delex_response.clone(),
                    })
                    .collect(),
            };
            out.push_str(&serde_json::to_string(&rec).expect("dialog serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_jsonl())?;
        Ok(())
    }

    pub fn turn_count(&self) -> usize {
        self.dialogs.iter().map(|d| d.turns.len()).sum()
    }
}

pub fn load_corpus(path: &Path) -> Result<DialogCorpus> {
    let text = fs::read_to_string(path).map_err(|e| Error::load(path, e.to_string()))?;
    DialogCorpus::parse(&text, path)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CorpusStats {
    pub dialogs: usize,
    pub turns: usize,
    pub mean_turns: f64,
    /// Distinct `(domain, slot)` pairs in gold states, `ruk` excluded.
    pub slot_types: usize,
    /// Distinct `(domain, slot, value)` triples in gold states, `ruk` excluded.
    pub slot_values: usize,
    pub doc_annotated_fraction: f64,
}

pub fn corpus_stats(corpus: &DialogCorpus) -> CorpusStats {
    let turns = corpus.turn_count();
    if turns == 0 {
        return CorpusStats {
            dialogs: corpus.dialogs.len(),
            ..CorpusStats::default()
        };
    }
    let mut types = BTreeSet::new();
    let mut values = BTreeSet::new();
    let mut annotated = 0;
    for t in corpus.dialogs.iter().flat_map(|d| &d.turns) {
        annotated += t.is_inserted() as usize;
        for triple in t.gold_belief.non_ruk() {
            types.insert((triple.domain.as_str(), triple.slot.as_str()));
            values.insert(triple);
        }
    }
    CorpusStats {
        dialogs: corpus.dialogs.len(),
        turns,
        mean_turns: turns as f64 / corpus.dialogs.len() as f64,
        slot_types: types.len(),
        slot_values: values.len(),
        doc_annotated_fraction: annotated as f64 / turns as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_corpus_stats() {
        assert_eq!(corpus_stats(&DialogCorpus::default()), CorpusStats::default());
    }

    #[test]
    fn bad_span_names_dialog_and_turn() {
        let line = r#"{"dialog_id":"x","turns":[
            {"user":"a","response":"b","belief_span":""},
            {"user":"a","response":"b","belief_span":"hotel { area = north }"},
            {"user":"a","response":"b","belief_span":""},
            {"user":"a","response":"b","belief_span":"hotel { area = }"}]}"#
            .replace('\n', "");
        let err = DialogCorpus::parse(&line, Path::new("c.jsonl")).unwrap_err();
        match err {
            Error::AtTurn { dialog, turn, .. } => assert_eq!((dialog.as_str(), turn), ("x", 3)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn annotation_requires_ruk() {
        let line = r#"{"dialog_id":"x","turns":[{"user":"a","response":"b","belief_span":"","doc":{"domain":"hotel","entity_id":"h","doc_id":"d"}}]}"#;
        assert_eq!(DialogCorpus::parse(line, Path::new("c")).unwrap_err().kind(), "label");
    }
}
