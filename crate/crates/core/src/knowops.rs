//! Knowledge operations over the fused base: exact structured query, fuzzy
//! entity matching on the `ruk` value, and topic-based document retrieval
//! restricted to the matched entity.

use crate::belief::ExtendedBeliefState;
use crate::error::{Error, Result};
use crate::kb::{Entity, KnowledgeBase};
use crate::text::normalize;
use crate::topic::{DocKey, TopicIndex};

/// Default lower bound on the entity-match similarity.
pub const DEFAULT_MATCH_FLOOR: f64 = 0.6;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainMatch {
    pub domain: String,
    pub matched_entity_ids: Vec<String>,
    /// Some matched entity is bookable.
    pub booking_available: bool,
}

impl DomainMatch {
    pub fn match_count(&self) -> usize {
        self.matched_entity_ids.len()
    }
}

/// Per-domain exact-match results, in the belief state's domain order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QueryResult {
    pub per_domain: Vec<DomainMatch>,
}

impl QueryResult {
    pub fn domain(&self, name: &str) -> Option<&DomainMatch> {
        self.per_domain.iter().find(|d| d.domain == name)
    }

    pub fn match_count(&self, domain: &str) -> usize {
        self.domain(domain).map_or(0, DomainMatch::match_count)
    }

    pub fn booking_available(&self) -> bool {
        self.per_domain.iter().any(|d| d.booking_available)
    }

    pub fn is_empty(&self) -> bool {
        self.per_domain.is_empty()
    }
}

/// Entities whose attributes equal every non-`ruk` constraint of their
/// domain. Domains without constraints are left out.
pub fn structured_query(kb: &KnowledgeBase, state: &ExtendedBeliefState) -> Result<QueryResult> {
    let mut result = QueryResult::default();
    for domain_name in state.domains() {
        let constraints: Vec<_> = state
            .non_ruk()
            .filter(|t| t.domain == domain_name)
            .collect();
        if constraints.is_empty() {
            continue;
        }
        let domain = kb
            .domain(domain_name)
            .map_err(|_| Error::Query(format!("unknown domain {domain_name}")))?;
        if let Some(t) = constraints.iter().find(|t| !domain.slot_schema.contains(&t.slot)) {
            return Err(Error::Query(format!(
                "slot {} is not in the {} schema",
                t.slot, domain_name
            )));
        }
        let matched: Vec<&Entity> = domain
            .entities
            .iter()
            .filter(|e| {
                constraints
                    .iter()
                    .all(|t| e.attributes.get(&t.slot) == Some(&t.value))
            })
            .collect();
        result.per_domain.push(DomainMatch {
            domain: domain_name.to_string(),
            booking_available: matched.iter().any(|e| e.bookable),
            matched_entity_ids: matched.into_iter().map(|e| e.id.clone()).collect(),
        });
    }
    Ok(result)
}

/// `restaurant 2 match , train no match`
pub fn format_query_span(result: &QueryResult) -> String {
    result
        .per_domain
        .iter()
        .map(|d| match d.match_count() {
            0 => format!("{} no match", d.domain),
            n => format!("{} {n} match", d.domain),
        })
        .collect::<Vec<_>>()
        .join(" , ")
}

/// Bucketed match count for the active domain plus a booking bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueryVector {
    /// 0..=3 for exact counts, 4 for four or more.
    pub bucket: usize,
    pub booking_flag: bool,
}

impl QueryVector {
    pub const LEN: usize = 6;

    pub fn to_bits(self) -> [u8; Self::LEN] {
        let mut bits = [0u8; Self::LEN];
        bits[self.bucket] = 1;
        bits[5] = self.booking_flag as u8;
        bits
    }
}

pub fn map_query_vector(result: &QueryResult, active_domain: &str) -> QueryVector {
    match result.domain(active_domain) {
        Some(d) => QueryVector {
            bucket: d.match_count().min(4),
            booking_flag: d.booking_available,
        },
        None => QueryVector {
            bucket: 0,
            booking_flag: false,
        },
    }
}

/// Length of the longest common subsequence of two char slices.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let mut row = vec![0usize; short.len() + 1];
    for x in long {
        let mut diag = 0;
        for (j, y) in short.iter().enumerate() {
            let above = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { above.max(row[j]) };
            diag = above;
        }
    }
    row[short.len()]
}

/// `2 * LCS / (|a| + |b|)` over the normalized character sequences.
pub fn fuzzy_similarity(a: &str, b: &str) -> f64 {
    let a: Vec<char> = normalize(a).chars().collect();
    let b: Vec<char> = normalize(b).chars().collect();
    let total = a.len() + b.len();
    if total == 0 {
        return 1.0;
    }
    (2 * lcs_len(&a, &b)) as f64 / total as f64
}

#[derive(Debug, Clone, Copy)]
pub struct EntityMatch<'a> {
    pub entity: &'a Entity,
    pub score: f64,
}

/// Best entity in `domain` by similarity to its name or id; ties go to the
/// lowest id. `None` when the best score is under `floor`.
pub fn match_entity<'a>(
    kb: &'a KnowledgeBase,
    domain: &str,
    ruk_value: &str,
    floor: f64,
) -> Result<Option<EntityMatch<'a>>> {
    let domain = kb.domain(domain)?;
    let mut best: Option<EntityMatch<'a>> = None;
    for e in &domain.entities {
        let score = fuzzy_similarity(ruk_value, &e.name).max(fuzzy_similarity(ruk_value, &e.id));
        // entities are in ascending id order, so strict > keeps the lowest id
        if best.is_none_or(|b| score > b.score) {
            best = Some(EntityMatch { entity: e, score });
        }
    }
    Ok(best.filter(|b| b.score >= floor))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedDocument {
    pub key: DocKey,
    pub score: f64,
}

/// The entity's documents ranked by topic similarity, best first; ties in
/// ascending doc id.
pub fn retrieve_document(
    index: &TopicIndex,
    domain: &str,
    entity: &Entity,
    topic: &[String],
) -> Result<Vec<RankedDocument>> {
    if topic.is_empty() {
        return Err(Error::EmptyTopic);
    }
    let query = topic.join(" ");
    let mut ranked: Vec<RankedDocument> = index
        .documents_of(domain, &entity.id)
        .map(|(key, entry)| RankedDocument {
            key: key.clone(),
            score: fuzzy_similarity(&query, &entry.tokens().join(" ")),
        })
        .collect();
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.key.doc_id.cmp(&b.key.doc_id)));
    Ok(ranked)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DocumentHit {
    pub key: DocKey,
    pub body: String,
    /// Topic similarity of the chosen document.
    pub score: f64,
    /// Similarity of the `ruk` value to the chosen entity; at least the floor.
    pub entity_score: f64,
}

/// The retrieved document for a turn, or none.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RetrievedDocument(pub Option<DocumentHit>);

impl RetrievedDocument {
    pub fn none() -> Self {
        RetrievedDocument(None)
    }

    pub fn hit(&self) -> Option<&DocumentHit> {
        self.0.as_ref()
    }

    pub fn is_none(&self) -> bool {
        self.0.is_none()
    }
}

/// Full ranking for a state: entity match on the `ruk` value within its
/// domain, then topic ranking of that entity's documents. Empty when the
/// state lacks `ruk` or topic, or no entity clears the floor.
pub fn rank_documents<'a>(
    kb: &'a KnowledgeBase,
    index: &TopicIndex,
    state: &ExtendedBeliefState,
    floor: f64,
) -> Result<Option<(EntityMatch<'a>, Vec<RankedDocument>)>> {
    let Some(ruk) = state.ruk() else {
        return Ok(None);
    };
    if state.topic().is_empty() {
        return Ok(None);
    }
    let Some(m) = match_entity(kb, &ruk.domain, &ruk.value, floor)? else {
        return Ok(None);
    };
    let ranked = retrieve_document(index, &ruk.domain, m.entity, state.topic())?;
    Ok(Some((m, ranked)))
}

#[derive(Debug, Clone, Copy)]
pub struct KnowledgeOps<'a> {
    pub kb: &'a KnowledgeBase,
    pub index: &'a TopicIndex,
    pub floor: f64,
}

impl<'a> KnowledgeOps<'a> {
    pub fn new(kb: &'a KnowledgeBase, index: &'a TopicIndex) -> Self {
        KnowledgeOps {
            kb,
            index,
            floor: DEFAULT_MATCH_FLOOR,
        }
    }

    pub fn with_floor(mut self, floor: f64) -> Self {
        self.floor = floor;
        self
    }

    pub fn run(&self, state: &ExtendedBeliefState) -> Result<(QueryResult, RetrievedDocument)> {
        knowledge_operation(self.kb, self.index, state, self.floor)
    }
}

/// Structured query plus, when the state carries both a `ruk` triple and a
/// topic, the best document of the best-matched entity.
pub fn knowledge_operation(
    kb: &KnowledgeBase,
    index: &TopicIndex,
    state: &ExtendedBeliefState,
    floor: f64,
) -> Result<(QueryResult, RetrievedDocument)> {
    let query = structured_query(kb, state)?;
    let doc = match rank_documents(kb, index, state, floor)? {
        Some((m, ranked)) => match ranked.into_iter().next() {
            Some(top) => {
                let body = m
                    .entity
                    .document(&top.key.doc_id)
                    .map(|d| d.body.clone())
                    .unwrap_or_default();
                RetrievedDocument(Some(DocumentHit {
                    key: top.key,
                    body,
                    score: top.score,
                    entity_score: m.score,
                }))
            }
            None => RetrievedDocument::none(),
        },
        None => RetrievedDocument::none(),
    };
    Ok((query, doc))
}
