//! Topic-word index over the document base.
//!
//! Each document gets up to three candidate keywords by TF-IDF within its
//! domain. Candidates are then scored domain-wide by CA-TF-IDF (the sum of a
//! token's candidate TF-IDF scores divided by the domain's entity count) and
//! kept when they reach the domain threshold. A document whose candidates are
//! all filtered keeps its single best candidate, so every indexed document
//! carries one to three topic words.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kb::KnowledgeBase;

pub const DEFAULT_STOPWORDS: &str = include_str!("../assets/stopwords.txt");

/// Environment variable naming a replacement stopword file.
pub const STOPWORDS_ENV: &str = "SEKNOW_STOPWORDS";

pub const MAX_TOPICS: usize = 3;

#[derive(Debug, Clone)]
pub struct Tokenizer {
    stopwords: HashSet<String>,
    sha256: String,
}

impl Default for Tokenizer {
    fn default() -> Self {
        Tokenizer::from_list(DEFAULT_STOPWORDS)
    }
}

impl Tokenizer {
    /// One stopword per line; blank lines ignored.
    pub fn from_list(list: &str) -> Self {
        let stopwords = list
            .lines()
            .map(|l| l.trim().to_lowercase())
            .filter(|l| !l.is_empty())
            .collect();
        let sha256 = hex::encode(Sha256::digest(list.as_bytes()));
        Tokenizer { stopwords, sha256 }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let list = fs::read_to_string(path).map_err(|e| Error::load(path, e.to_string()))?;
        Ok(Tokenizer::from_list(&list))
    }

    /// The list named by `SEKNOW_STOPWORDS`, or the built-in one.
    pub fn from_env() -> Result<Self> {
        match std::env::var_os(STOPWORDS_ENV) {
            Some(p) if !p.is_empty() => Tokenizer::from_file(Path::new(&p)),
            _ => Ok(Tokenizer::default()),
        }
    }

    /// Hex SHA-256 of the stopword file bytes.
    pub fn stopwords_sha256(&self) -> &str {
        &self.sha256
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.contains(token)
    }

    pub fn tokenize(&self, text: &str) -> Vec<String> {
        text.split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(str::to_lowercase)
            .filter(|t| t.chars().count() >= 2 && !self.stopwords.contains(t))
            .collect()
    }
}

/// Identifies a document across the whole knowledge base.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DocKey {
    pub domain: String,
    pub entity_id: String,
    pub doc_id: String,
}

impl DocKey {
    pub fn new(domain: &str, entity_id: &str, doc_id: &str) -> Self {
        DocKey {
            domain: domain.to_string(),
            entity_id: entity_id.to_string(),
            doc_id: doc_id.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicWord {
    pub token: String,
    pub tfidf: f64,
    pub ca_tfidf: f64,
    pub survived_filter: bool,
}

/// A document's token stream: title tokens followed by body tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenizedDoc {
    pub key: DocKey,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub token: String,
    pub tfidf: f64,
}

/// `tf(t,d) * ln(N / df(t))` with raw counts and no smoothing.
pub fn compute_tfidf(docs: &[TokenizedDoc]) -> BTreeMap<DocKey, BTreeMap<String, f64>> {
    let n = docs.len() as f64;
    let mut df: HashMap<&str, usize> = HashMap::new();
    for doc in docs {
        let distinct: HashSet<&str> = doc.tokens.iter().map(String::as_str).collect();
        for t in distinct {
            *df.entry(t).or_default() += 1;
        }
    }
    docs.iter()
        .map(|doc| {
            let mut tf: BTreeMap<String, usize> = BTreeMap::new();
            for t in &doc.tokens {
                *tf.entry(t.clone()).or_default() += 1;
            }
            let scores = tf
                .into_iter()
                .map(|(t, count)| {
                    let idf = (n / df[t.as_str()] as f64).ln();
                    (t, count as f64 * idf)
                })
                .collect();
            (doc.key.clone(), scores)
        })
        .collect()
}

/// Top three tokens by TF-IDF. Ties go to the token that occurs first in the
/// document, then lexicographic order.
pub fn extract_candidates(tokens: &[String], scores: &BTreeMap<String, f64>) -> Vec<Candidate> {
    let mut first_seen: HashMap<&str, usize> = HashMap::new();
    for (i, t) in tokens.iter().enumerate() {
        first_seen.entry(t.as_str()).or_insert(i);
    }
    let mut ranked: Vec<(&str, f64, usize)> = scores
        .iter()
        .filter_map(|(t, &s)| first_seen.get(t.as_str()).map(|&i| (t.as_str(), s, i)))
        .collect();
    ranked.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then(a.2.cmp(&b.2))
            .then(a.0.cmp(b.0))
    });
    ranked
        .into_iter()
        .take(MAX_TOPICS)
        .map(|(t, s, _)| Candidate {
            token: t.to_string(),
            tfidf: s,
        })
        .collect()
}

/// Cumulative average TF-IDF over every candidate occurrence in a domain.
pub fn compute_ca_tfidf<'a, I>(candidates: I, entity_count: usize) -> BTreeMap<String, f64>
where
    I: IntoIterator<Item = &'a Candidate>,
{
    let mut sums: BTreeMap<String, f64> = BTreeMap::new();
    for c in candidates {
        *sums.entry(c.token.clone()).or_default() += c.tfidf;
    }
    let denom = entity_count.max(1) as f64;
    for v in sums.values_mut() {
        *v /= denom;
    }
    sums
}

/// Per-domain CA-TF-IDF cutoffs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds(pub BTreeMap<String, f64>);

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds(
            [
                ("restaurant", 2.3),
                ("hotel", 2.7),
                ("taxi", 6.9),
                ("train", 7.3),
            ]
            .into_iter()
            .map(|(d, v)| (d.to_string(), v))
            .collect(),
        )
    }
}

impl Thresholds {
    pub fn get(&self, domain: &str) -> Option<f64> {
        self.0.get(domain).copied()
    }

    pub fn set(&mut self, domain: &str, value: f64) {
        self.0.insert(domain.to_string(), value);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub entity_name: String,
    pub words: Vec<TopicWord>,
}

impl IndexEntry {
    pub fn tokens(&self) -> Vec<&str> {
        self.words.iter().map(|w| w.token.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicIndex {
    entries: BTreeMap<DocKey, IndexEntry>,
    thresholds: Thresholds,
    stopwords_sha256: String,
}

impl TopicIndex {
    pub fn entries(&self) -> &BTreeMap<DocKey, IndexEntry> {
        &self.entries
    }

    pub fn get(&self, key: &DocKey) -> Option<&IndexEntry> {
        self.entries.get(key)
    }

    pub fn thresholds(&self) -> &Thresholds {
        &self.thresholds
    }

    pub fn stopwords_sha256(&self) -> &str {
        &self.stopwords_sha256
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Documents of one entity in doc-id order.
    pub fn documents_of<'a>(
        &'a self,
        domain: &'a str,
        entity_id: &'a str,
    ) -> impl Iterator<Item = (&'a DocKey, &'a IndexEntry)> + 'a {
        let start = DocKey::new(domain, entity_id, "");
        self.entries
            .range(start..)
            .take_while(move |(k, _)| k.domain == domain && k.entity_id == entity_id)
    }

    /// Index file text: `domain \t entity_id \t doc_id \t t1[,t2[,t3]]`,
    /// lines sorted lexicographically, each newline-terminated.
    pub fn to_tsv(&self) -> String {
        let mut lines: Vec<String> = self
            .entries
            .iter()
            .map(|(k, e)| {
                format!(
                    "{}\t{}\t{}\t{}",
                    k.domain,
                    k.entity_id,
                    k.doc_id,
                    e.tokens().join(",")
                )
            })
            .collect();
        lines.sort();
        let mut out = String::new();
        for l in lines {
            out.push_str(&l);
            out.push('\n');
        }
        out
    }

    /// Sidecar path for an index file: `<index>.meta.json`.
    pub fn sidecar_path(index_path: &Path) -> PathBuf {
        let mut s = index_path.as_os_str().to_owned();
        s.push(".meta.json");
        PathBuf::from(s)
    }

    pub fn sidecar_json(&self) -> String {
        let meta = Sidecar {
            thresholds: self.thresholds.clone(),
            stopwords_sha256: self.stopwords_sha256.clone(),
            entries: self
                .entries
                .iter()
                .map(|(k, e)| SidecarEntry {
                    key: k.clone(),
                    entry: e.clone(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&meta).expect("sidecar serializes") + "\n"
    }

    pub fn write(&self, index_path: &Path) -> Result<()> {
        fs::write(index_path, self.to_tsv())?;
        fs::write(Self::sidecar_path(index_path), self.sidecar_json())?;
        Ok(())
    }

    /// Reads an index file and its sidecar, checking that they agree.
    pub fn load(index_path: &Path) -> Result<Self> {
        let tsv = fs::read_to_string(index_path).map_err(|e| Error::load(index_path, e.to_string()))?;
        let side_path = Self::sidecar_path(index_path);
        let side_text =
            fs::read_to_string(&side_path).map_err(|e| Error::load(&side_path, e.to_string()))?;
        let meta: Sidecar = serde_json::from_str(&side_text).map_err(|e| {
            Error::load(&side_path, format!("line {} column {}: {e}", e.line(), e.column()))
        })?;
        let entries: BTreeMap<DocKey, IndexEntry> =
            meta.entries.into_iter().map(|e| (e.key, e.entry)).collect();

        let mut seen = 0usize;
        for (lineno, line) in tsv.lines().enumerate() {
            let fields: Vec<&str> = line.split('\t').collect();
            let bad = |msg: &str| Error::load(index_path, format!("line {}: {msg}", lineno + 1));
            if fields.len() != 4 {
                return Err(bad("expected 4 tab-separated fields"));
            }
            let key = DocKey::new(fields[0], fields[1], fields[2]);
            let entry = entries.get(&key).ok_or_else(|| bad("document missing from sidecar"))?;
            if entry.tokens().join(",") != fields[3] {
                return Err(bad("topics disagree with sidecar"));
            }
            seen += 1;
        }
        if seen != entries.len() {
            return Err(Error::load(index_path, "sidecar lists documents absent from index"));
        }
        Ok(TopicIndex {
            entries,
            thresholds: meta.thresholds,
            stopwords_sha256: meta.stopwords_sha256,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    thresholds: Thresholds,
    stopwords_sha256: String,
    entries: Vec<SidecarEntry>,
}

#[derive(Serialize, Deserialize)]
struct SidecarEntry {
    #[serde(flatten)]
    key: DocKey,
    #[serde(flatten)]
    entry: IndexEntry,
}

/// Title tokens then body tokens for every document of `domain`.
pub fn tokenize_domain(kb: &KnowledgeBase, domain: &str, tokenizer: &Tokenizer) -> Result<Vec<TokenizedDoc>> {
    let d = kb.domain(domain)?;
    let mut out = Vec::new();
    for e in &d.entities {
        for doc in &e.documents {
            let mut tokens = tokenizer.tokenize(&doc.title);
            tokens.extend(tokenizer.tokenize(&doc.body));
            out.push(TokenizedDoc {
                key: DocKey::new(&d.name, &e.id, &doc.doc_id),
                tokens,
            });
        }
    }
    Ok(out)
}

pub fn build_topic_index(
    kb: &KnowledgeBase,
    thresholds: &Thresholds,
    tokenizer: &Tokenizer,
) -> Result<TopicIndex> {
    let documented: Vec<&crate::kb::Domain> = kb.domains().filter(|d| d.has_documents()).collect();
    for d in &documented {
        if thresholds.get(&d.name).is_none() {
            return Err(Error::Config(format!("no threshold for domain {}", d.name)));
        }
    }
    let per_domain: Vec<Result<Vec<(DocKey, IndexEntry)>>> = documented
        .par_iter()
        .map(|d| index_domain(kb, d, thresholds.get(&d.name).unwrap_or(0.0), tokenizer))
        .collect();
    let mut entries = BTreeMap::new();
    for r in per_domain {
        entries.extend(r?);
    }
    Ok(TopicIndex {
        entries,
        thresholds: thresholds.clone(),
        stopwords_sha256: tokenizer.stopwords_sha256().to_string(),
    })
}

fn index_domain(
    kb: &KnowledgeBase,
    domain: &crate::kb::Domain,
    threshold: f64,
    tokenizer: &Tokenizer,
) -> Result<Vec<(DocKey, IndexEntry)>> {
    let docs = tokenize_domain(kb, &domain.name, tokenizer)?;
    if let Some(empty) = docs.iter().find(|d| d.tokens.is_empty()) {
        return Err(Error::NoCandidates {
            domain: empty.key.domain.clone(),
            entity_id: empty.key.entity_id.clone(),
            doc_id: empty.key.doc_id.clone(),
        });
    }
    let scores = compute_tfidf(&docs);
    let candidates: Vec<(DocKey, Vec<Candidate>)> = docs
        .iter()
        .map(|d| (d.key.clone(), extract_candidates(&d.tokens, &scores[&d.key])))
        .collect();
    let ca = compute_ca_tfidf(candidates.iter().flat_map(|(_, c)| c), domain.entities.len());

    let mut out = Vec::with_capacity(candidates.len());
    for (key, cands) in candidates {
        let words: Vec<TopicWord> = cands
            .iter()
            .map(|c| {
                let ca_score = ca[&c.token];
                TopicWord {
                    token: c.token.clone(),
                    tfidf: c.tfidf,
                    ca_tfidf: ca_score,
                    survived_filter: ca_score >= threshold,
                }
            })
            .collect();
        let mut kept: Vec<TopicWord> = words.iter().filter(|w| w.survived_filter).cloned().collect();
        if kept.is_empty() {
            kept.push(words[0].clone());
        }
        let entity_name = domain
            .entity(&key.entity_id)
            .map(|e| e.name.clone())
            .unwrap_or_default();
        out.push((key, IndexEntry { entity_name, words: kept }));
    }
    Ok(out)
}

/// Distinct topic tokens across the index, used by the heuristic predictor.
pub fn topic_vocabulary(index: &TopicIndex) -> BTreeSet<&str> {
    index
        .entries()
        .values()
        .flat_map(|e| e.words.iter().map(|w| w.token.as_str()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn tokenizer_examples() {
        let t = Tokenizer::default();
        assert_eq!(t.tokenize("Free WiFi, free parking!"), toks("free wifi free parking"));
        assert!(t.tokenize("").is_empty());
        assert!(t.tokenize("a an the").is_empty());
        assert!(t.tokenize("x y 4").is_empty());
    }

    #[test]
    fn tfidf_two_docs() {
        let docs = vec![
            TokenizedDoc { key: DocKey::new("d", "e", "a"), tokens: toks("pool pool pool shared") },
            TokenizedDoc { key: DocKey::new("d", "e", "b"), tokens: toks("shared bar") },
        ];
        let s = compute_tfidf(&docs);
        let a = &s[&docs[0].key];
        assert_eq!(a["shared"], 0.0);
        assert!((a["pool"] - 3.0 * 2f64.ln()).abs() < 1e-12);
        assert!((a["pool"] - 2.079).abs() < 1e-3);
    }

    #[test]
    fn single_doc_domain_scores_zero() {
        let docs = vec![TokenizedDoc { key: DocKey::new("d", "e", "a"), tokens: toks("x1 x2 x1") }];
        assert!(compute_tfidf(&docs)[&docs[0].key].values().all(|&v| v == 0.0));
    }

    #[test]
    fn candidate_tie_break() {
        let tokens = toks("bar wifi breakfast pool");
        let scores: BTreeMap<String, f64> = [("breakfast", 4.1), ("wifi", 2.0), ("pool", 2.0), ("bar", 1.0)]
            .into_iter()
            .map(|(t, s)| (t.to_string(), s))
            .collect();
        let c: Vec<String> = extract_candidates(&tokens, &scores).into_iter().map(|c| c.token).collect();
        assert_eq!(c, toks("breakfast wifi pool"));

        let two: BTreeMap<String, f64> = [("aa".to_string(), 0.0), ("bb".to_string(), 0.0)].into();
        assert_eq!(extract_candidates(&toks("bb aa"), &two).len(), 2);
    }

    #[test]
    fn ca_tfidf_divides_by_entities() {
        let c = [
            Candidate { token: "pool".into(), tfidf: 2.0 },
            Candidate { token: "pool".into(), tfidf: 4.0 },
            Candidate { token: "bar".into(), tfidf: 0.0 },
        ];
        let ca = compute_ca_tfidf(&c, 3);
        assert_eq!(ca["pool"], 2.0);
        assert_eq!(ca["bar"], 0.0);
    }

    #[test]
    fn default_thresholds() {
        let t = Thresholds::default();
        assert_eq!(t.get("restaurant"), Some(2.3));
        assert_eq!(t.get("hotel"), Some(2.7));
        assert_eq!(t.get("taxi"), Some(6.9));
        assert_eq!(t.get("train"), Some(7.3));
    }
}
