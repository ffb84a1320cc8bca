//! Fixtures and independent reference implementations shared by the
//! integration tests. The oracles here deliberately avoid the library's
//! algorithms: plain loops, full tables, no shared helpers.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use proptest::prelude::*;
use sskm::belief::{ExtendedBeliefState, RUK};
use sskm::kb::{load_knowledge_base, KnowledgeBase};
use sskm::topic::{build_topic_index, Thresholds, Tokenizer, TopicIndex, DEFAULT_STOPWORDS};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("fixtures")
        .join(name)
}

pub fn toy_kb() -> KnowledgeBase {
    load_knowledge_base(&fixture("toy_db.json"), &fixture("toy_docs.json")).expect("toy kb loads")
}

pub fn toy_index(kb: &KnowledgeBase) -> TopicIndex {
    build_topic_index(kb, &Thresholds::default(), &Tokenizer::default()).expect("toy index builds")
}

/// Longest common subsequence length from a full `(n+1) x (m+1)` table.
pub fn lcs_table(a: &[char], b: &[char]) -> usize {
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            t[i][j] = if a[i - 1] == b[j - 1] {
                t[i - 1][j - 1] + 1
            } else {
                t[i - 1][j].max(t[i][j - 1])
            };
        }
    }
    t[a.len()][b.len()]
}

pub fn lcs_ratio(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    2.0 * lcs_table(&a, &b) as f64 / (a.len() + b.len()) as f64
}

fn oracle_tokens(text: &str, stop: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars().chain(std::iter::once(' ')) {
        if ch.is_alphanumeric() {
            cur.push(ch);
        } else if !cur.is_empty() {
            let t = cur.to_lowercase();
            if t.chars().count() >= 2 && !stop.contains(&t) {
                out.push(t);
            }
            cur.clear();
        }
    }
    out
}

/// Brute-force topic index: recounts tf and df for every token of every
/// document, sorts candidates by (-score, first position, token), sums the
/// domain's candidate scores per token, and prints the index file.
pub fn topic_index_oracle(kb: &KnowledgeBase, thresholds: &BTreeMap<String, f64>) -> String {
    let stop: Vec<String> = DEFAULT_STOPWORDS
        .lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty())
        .collect();
    let mut lines = Vec::new();
    for domain in kb.domains() {
        let mut docs: Vec<(String, String, Vec<String>)> = Vec::new();
        for e in &domain.entities {
            for d in &e.documents {
                let mut toks = oracle_tokens(&d.title, &stop);
                toks.extend(oracle_tokens(&d.body, &stop));
                docs.push((e.id.clone(), d.doc_id.clone(), toks));
            }
        }
        if docs.is_empty() {
            continue;
        }
        let n = docs.len() as f64;
        let mut cands: Vec<Vec<(String, f64)>> = Vec::new();
        for (_, _, toks) in &docs {
            let mut scored: Vec<(f64, usize, String)> = Vec::new();
            for (pos, t) in toks.iter().enumerate() {
                if toks[..pos].contains(t) {
                    continue;
                }
                let tf = toks.iter().filter(|x| *x == t).count() as f64;
                let df = docs.iter().filter(|(_, _, o)| o.contains(t)).count() as f64;
                scored.push((tf * (n / df).ln(), pos, t.clone()));
            }
            scored.sort_by(|a, b| {
                b.0.partial_cmp(&a.0)
                    .unwrap()
                    .then(a.1.cmp(&b.1))
                    .then(a.2.cmp(&b.2))
            });
            cands.push(scored.into_iter().take(3).map(|(s, _, t)| (t, s)).collect());
        }
        let mut ca: BTreeMap<String, f64> = BTreeMap::new();
        for cs in &cands {
            for (t, s) in cs {
                *ca.entry(t.clone()).or_insert(0.0) += s;
            }
        }
        let entities = domain.entities.len() as f64;
        let thr = thresholds[&domain.name];
        for ((owner, doc_id, _), cs) in docs.iter().zip(&cands) {
            let mut kept: Vec<&str> = cs
                .iter()
                .filter(|(t, _)| ca[t] / entities >= thr)
                .map(|(t, _)| t.as_str())
                .collect();
            if kept.is_empty() {
                kept.push(&cs[0].0);
            }
            lines.push(format!("{}\t{}\t{}\t{}", domain.name, owner, doc_id, kept.join(",")));
        }
    }
    lines.sort();
    lines.iter().map(|l| format!("{l}\n")).collect()
}

pub fn default_thresholds() -> BTreeMap<String, f64> {
    [("restaurant", 2.3), ("hotel", 2.7), ("taxi", 6.9), ("train", 7.3)]
        .into_iter()
        .map(|(d, v)| (d.to_string(), v))
        .collect()
}

fn field() -> impl Strategy<Value = String> {
    prop::collection::vec("[a-z0-9][a-z0-9'.:-]{0,6}", 1..4).prop_map(|w| w.join(" "))
}

/// Arbitrary well-formed states: up to a dozen pairs over short domain names,
/// optionally followed by a `ruk` triple and a one to three word topic.
pub fn arb_state() -> impl Strategy<Value = ExtendedBeliefState> {
    let pairs = prop::collection::vec(("[a-z]{1,3}", "[a-z][a-z ]{0,8}[a-z]", field()), 0..12);
    let ext = prop::option::of(("[a-z]{1,3}", field(), prop::collection::vec("[a-z0-9]{1,8}", 1..4)));
    (pairs, ext).prop_map(|(pairs, ext)| {
        let mut s = ExtendedBeliefState::new();
        for (d, slot, v) in pairs {
            let slot = sskm::text::normalize(&slot);
            if slot != RUK {
                s.set(&d, &slot, &v).unwrap();
            }
        }
        if let Some((d, v, topic)) = ext {
            s.set(&d, RUK, &v).unwrap();
            s.set_topic(topic).unwrap();
        }
        s
    })
}
