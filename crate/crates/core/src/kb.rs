//! Semi-structured knowledge base: structured entity records fused with the
//! free-text documents that describe them.
//!
//! Two source files feed a [`KnowledgeBase`]: a db file keyed by domain and a
//! flat doc-base array. Documents name their owner by `(domain, entity_id)`;
//! when the id does not resolve, a case-insensitive exact match on the entity
//! name is tried. See `docs/formats.md` for the byte-level layout.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::normalize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub doc_id: String,
    pub title: String,
    pub body: String,
}

impl Document {
    pub fn new(doc_id: &str, title: &str, body: &str) -> Self {
        Document {
            doc_id: normalize(doc_id),
            title: normalize(title),
            body: normalize(body),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entity {
    pub id: String,
    pub name: String,
    pub attributes: BTreeMap<String, String>,
    pub bookable: bool,
    pub documents: Vec<Document>,
}

impl Entity {
    pub fn new(id: &str, name: &str) -> Self {
        Entity {
            id: normalize(id),
            name: normalize(name),
            attributes: BTreeMap::new(),
            bookable: false,
            documents: Vec::new(),
        }
    }

    pub fn with_attr(mut self, slot: &str, value: &str) -> Self {
        self.attributes.insert(normalize(slot), normalize(value));
        self
    }

    pub fn with_bookable(mut self, bookable: bool) -> Self {
        self.bookable = bookable;
        self
    }

    pub fn with_document(mut self, doc: Document) -> Self {
        self.documents.push(doc);
        self
    }

    pub fn document(&self, doc_id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.doc_id == doc_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Domain {
    pub name: String,
    pub slot_schema: BTreeSet<String>,
    pub entities: Vec<Entity>,
}

impl Domain {
    pub fn new<I, S>(name: &str, slots: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Domain {
            name: normalize(name),
            slot_schema: slots.into_iter().map(|s| normalize(s.as_ref())).collect(),
            entities: Vec::new(),
        }
    }

    pub fn with_entity(mut self, entity: Entity) -> Self {
        self.entities.push(entity);
        self
    }

    pub fn entity(&self, id: &str) -> Option<&Entity> {
        self.entities.iter().find(|e| e.id == id)
    }

    pub fn has_documents(&self) -> bool {
        self.entities.iter().any(|e| !e.documents.is_empty())
    }
}

/// Fused knowledge base. Immutable once built; share it by reference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeBase {
    domains: BTreeMap<String, Domain>,
}

impl KnowledgeBase {
    /// Builds a knowledge base from in-memory domains. Entities and documents
    /// are put in id order, a `name` attribute is filled in when the schema
    /// has one, and any invariant violation is returned as a load error.
    pub fn from_domains(domains: Vec<Domain>) -> Result<Self> {
        let kb = Self::from_domains_unchecked(domains)?;
        let report = validate_knowledge_base(&kb);
        if !report.is_valid() {
            return Err(Error::load("<memory>", report.to_string()));
        }
        Ok(kb)
    }

    /// Like [`from_domains`](Self::from_domains) but keeps invariant
    /// violations for [`validate_knowledge_base`] to report. Only duplicate
    /// domain names are rejected since the map cannot hold them.
    pub fn from_domains_unchecked(domains: Vec<Domain>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for mut domain in domains {
            if domain.name.is_empty() {
                return Err(Error::load("<memory>", "empty domain name"));
            }
            if domain.slot_schema.contains("name") {
                for e in &mut domain.entities {
                    e.attributes
                        .entry("name".to_string())
                        .or_insert_with(|| e.name.clone());
                }
            }
            for e in &mut domain.entities {
                e.documents.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
            }
            domain.entities.sort_by(|a, b| a.id.cmp(&b.id));
            let name = domain.name.clone();
            if map.insert(name.clone(), domain).is_some() {
                return Err(Error::load("<memory>", format!("duplicate domain {name}")));
            }
        }
        Ok(KnowledgeBase { domains: map })
    }

    pub fn domains(&self) -> impl Iterator<Item = &Domain> {
        self.domains.values()
    }

    pub fn domain(&self, name: &str) -> Result<&Domain> {
        self.domains
            .get(name)
            .ok_or_else(|| Error::DomainNotFound(name.to_string()))
    }

    pub fn entity(&self, domain: &str, entity_id: &str) -> Option<&Entity> {
        self.domains.get(domain)?.entity(entity_id)
    }

    pub fn entity_count(&self) -> usize {
        self.domains.values().map(|d| d.entities.len()).sum()
    }

    pub fn document_count(&self) -> usize {
        self.domains
            .values()
            .flat_map(|d| &d.entities)
            .map(|e| e.documents.len())
            .sum()
    }

    /// Slot values seen across entity attributes, plus entity names under
    /// the `ruk` slot of every domain.
    pub fn ontology(&self) -> Ontology {
        let mut slots: BTreeMap<(String, String), BTreeSet<String>> = BTreeMap::new();
        for d in self.domains.values() {
            for e in &d.entities {
                for (slot, value) in &e.attributes {
                    slots
                        .entry((d.name.clone(), slot.clone()))
                        .or_default()
                        .insert(value.clone());
                }
                slots
                    .entry((d.name.clone(), crate::belief::RUK.to_string()))
                    .or_default()
                    .insert(e.name.clone());
            }
        }
        Ontology { slots }
    }

    pub fn to_db_file(&self) -> DbFile {
        self.domains
            .values()
            .map(|d| {
                let entities = d
                    .entities
                    .iter()
                    .map(|e| DbEntity {
                        id: e.id.clone(),
                        name: e.name.clone(),
                        bookable: e.bookable,
                        attributes: e.attributes.clone(),
                    })
                    .collect();
                let domain = DbDomain {
                    slots: d.slot_schema.iter().cloned().collect(),
                    entities,
                };
                (d.name.clone(), domain)
            })
            .collect()
    }

    pub fn to_doc_records(&self) -> Vec<DocRecord> {
        let mut out = Vec::new();
        for d in self.domains.values() {
            for e in &d.entities {
                for doc in &e.documents {
                    out.push(DocRecord {
                        domain: d.name.clone(),
                        entity_id: e.id.clone(),
                        doc_id: doc.doc_id.clone(),
                        title: doc.title.clone(),
                        body: doc.body.clone(),
                    });
                }
            }
        }
        out
    }

    /// Writes both source files in the same format [`load_knowledge_base`] reads.
    pub fn write_sources(&self, db_path: &Path, doc_path: &Path) -> Result<()> {
        let db = serde_json::to_string_pretty(&self.to_db_file())
            .map_err(|e| Error::load(db_path, e.to_string()))?;
        fs::write(db_path, db + "\n")?;
        let docs = serde_json::to_string_pretty(&self.to_doc_records())
            .map_err(|e| Error::load(doc_path, e.to_string()))?;
        fs::write(doc_path, docs + "\n")?;
        Ok(())
    }
}

/// Known values per `(domain, slot)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Ontology {
    pub slots: BTreeMap<(String, String), BTreeSet<String>>,
}

impl Ontology {
    pub fn values(&self, domain: &str, slot: &str) -> Option<&BTreeSet<String>> {
        self.slots.get(&(domain.to_string(), slot.to_string()))
    }
}

/// On-disk db file: domain name → domain record.
pub type DbFile = BTreeMap<String, DbDomain>;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DbDomain {
    pub slots: Vec<String>,
    pub entities: Vec<DbEntity>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DbEntity {
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub bookable: bool,
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DocRecord {
    pub domain: String,
    pub entity_id: String,
    pub doc_id: String,
    pub title: String,
    pub body: String,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::load(path, e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| {
        Error::load(
            path,
            format!("line {} column {}: {}", e.line(), e.column(), e),
        )
    })
}

/// Loads and fuses the two sources.
pub fn load_knowledge_base(db_source: &Path, doc_source: &Path) -> Result<KnowledgeBase> {
    let db: DbFile = read_json(db_source)?;
    let docs: Vec<DocRecord> = read_json(doc_source)?;
    fuse(db, docs).map_err(|e| match e {
        Error::Load { detail, .. } => Error::load(db_source, detail),
        other => other,
    })
}

/// Fusion over already-parsed sources.
pub fn fuse(db: DbFile, docs: Vec<DocRecord>) -> Result<KnowledgeBase> {
    let mut domains: BTreeMap<String, Domain> = BTreeMap::new();
    for (name, record) in db {
        let mut domain = Domain::new(&name, &record.slots);
        if domain.name.is_empty() {
            return Err(Error::load("<db>", "empty domain name"));
        }
        for e in record.entities {
            let mut entity = Entity::new(&e.id, &e.name).with_bookable(e.bookable);
            for (k, v) in &e.attributes {
                entity = entity.with_attr(k, v);
            }
            domain.entities.push(entity);
        }
        if domains.insert(domain.name.clone(), domain).is_some() {
            return Err(Error::load("<db>", format!("duplicate domain {name}")));
        }
    }

    let mut orphans = Vec::new();
    for rec in docs {
        let domain_name = normalize(&rec.domain);
        let Some(domain) = domains.get_mut(&domain_name) else {
            orphans.push((domain_name, normalize(&rec.entity_id)));
            continue;
        };
        let owner = normalize(&rec.entity_id);
        let idx = match domain.entities.iter().position(|e| e.id == owner) {
            Some(i) => Some(i),
            None => {
                let hits: Vec<usize> = domain
                    .entities
                    .iter()
                    .enumerate()
                    .filter(|(_, e)| e.name == owner)
                    .map(|(i, _)| i)
                    .collect();
                match hits.len() {
                    0 => None,
                    1 => Some(hits[0]),
                    _ => {
                        return Err(Error::AmbiguousOwner {
                            domain: domain_name,
                            entity: owner,
                            doc_id: normalize(&rec.doc_id),
                            candidates: hits
                                .iter()
                                .map(|&i| domain.entities[i].id.clone())
                                .collect(),
                        })
                    }
                }
            }
        };
        match idx {
            Some(i) => domain.entities[i]
                .documents
                .push(Document::new(&rec.doc_id, &rec.title, &rec.body)),
            None => orphans.push((domain_name, owner)),
        }
    }
    if !orphans.is_empty() {
        return Err(Error::Fusion { orphans });
    }
    KnowledgeBase::from_domains(domains.into_values().collect())
        .map_err(|e| match e {
            Error::Load { detail, .. } => Error::load("<db>", detail),
            other => other,
        })
}

/// Entities of one domain in ascending id order.
pub fn list_entities<'a>(kb: &'a KnowledgeBase, domain: &str) -> Result<&'a [Entity]> {
    Ok(&kb.domain(domain)?.entities)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ViolationKind {
    DuplicateEntityId,
    DuplicateDocId,
    SchemaForeign,
    EmptyBody,
    NameMismatch,
    Unnormalized,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViolationKind::DuplicateEntityId => "duplicate-id",
            ViolationKind::DuplicateDocId => "duplicate-doc-id",
            ViolationKind::SchemaForeign => "schema-foreign",
            ViolationKind::EmptyBody => "empty-body",
            ViolationKind::NameMismatch => "name-mismatch",
            ViolationKind::Unnormalized => "unnormalized",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub domain: String,
    pub entity: String,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub entities_per_domain: BTreeMap<String, usize>,
    pub entity_count: usize,
    pub document_count: usize,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{} at {}/{}: {}", v.kind, v.domain, v.entity, v.detail)?;
        }
        Ok(())
    }
}

pub fn validate_knowledge_base(kb: &KnowledgeBase) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut push = |kind, domain: &Domain, entity: &str, detail: String| {
        report.violations.push(Violation {
            kind,
            domain: domain.name.clone(),
            entity: entity.to_string(),
            detail,
        })
    };
    for d in kb.domains() {
        let mut seen_ids = BTreeSet::new();
        for e in &d.entities {
            if !seen_ids.insert(e.id.as_str()) {
                push(ViolationKind::DuplicateEntityId, d, &e.id, e.id.clone());
            }
            if e.id.is_empty() || e.name.is_empty() {
                push(ViolationKind::Unnormalized, d, &e.id, "empty id or name".into());
            }
            for (k, v) in &e.attributes {
                if !d.slot_schema.contains(k) {
                    push(ViolationKind::SchemaForeign, d, &e.id, k.clone());
                }
                if *v != normalize(v) || v.is_empty() {
                    push(ViolationKind::Unnormalized, d, &e.id, format!("{k}={v:?}"));
                }
            }
            if let Some(n) = e.attributes.get("name") {
                if *n != e.name {
                    push(ViolationKind::NameMismatch, d, &e.id, format!("{n} != {}", e.name));
                }
            }
            let mut seen_docs = BTreeSet::new();
            for doc in &e.documents {
                if !seen_docs.insert(doc.doc_id.as_str()) {
                    push(ViolationKind::DuplicateDocId, d, &e.id, doc.doc_id.clone());
                }
                if doc.body.trim().is_empty() {
                    push(ViolationKind::EmptyBody, d, &e.id, doc.doc_id.clone());
                }
            }
        }
    }
    for d in kb.domains() {
        report
            .entities_per_domain
            .insert(d.name.clone(), d.entities.len());
    }
    report.entity_count = kb.entity_count();
    report.document_count = kb.document_count();
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> KnowledgeBase {
        KnowledgeBase::from_domains(vec![Domain::new("restaurant", ["name", "food", "area"])
            .with_entity(
                Entity::new("r2", "Pizza Hut")
                    .with_attr("food", "Italian ")
                    .with_document(Document::new("d2", "vegetarian", "vegetarian pizza"))
                    .with_document(Document::new("d1", "favorite", "favorite dish")),
            )
            .with_entity(Entity::new("r1", "golden wok").with_attr("food", "chinese"))])
        .unwrap()
    }

    #[test]
    fn entities_sorted_and_normalized() {
        let kb = toy();
        let ents = list_entities(&kb, "restaurant").unwrap();
        assert_eq!(ents[0].id, "r1");
        assert_eq!(ents[1].attributes["food"], "italian");
        assert_eq!(ents[1].attributes["name"], "pizza hut");
        assert_eq!(ents[1].documents[0].doc_id, "d1");
        assert!(validate_knowledge_base(&kb).is_valid());
    }

    #[test]
    fn unknown_domain() {
        let err = list_entities(&toy(), "moon").unwrap_err();
        assert_eq!(err.kind(), "domain-not-found");
    }

    #[test]
    fn schema_foreign_and_duplicate_ids() {
        let kb = KnowledgeBase::from_domains_unchecked(vec![Domain::new("hotel", ["area"])
            .with_entity(Entity::new("h1", "a").with_attr("stars", "4"))
            .with_entity(Entity::new("h1", "b"))])
        .unwrap();
        let report = validate_knowledge_base(&kb);
        let kinds: Vec<_> = report.violations.iter().map(|v| v.kind).collect();
        assert_eq!(
            kinds,
            vec![ViolationKind::SchemaForeign, ViolationKind::DuplicateEntityId]
        );
        assert!(KnowledgeBase::from_domains(vec![Domain::new("hotel", ["area"])
            .with_entity(Entity::new("h1", "a").with_attr("stars", "4"))])
        .is_err());
    }

    #[test]
    fn fusion_by_name_fallback_and_orphans() {
        let mut db = DbFile::new();
        db.insert(
            "restaurant".into(),
            DbDomain {
                slots: vec!["name".into()],
                entities: vec![DbEntity {
                    id: "r7".into(),
                    name: "pizza hut".into(),
                    bookable: true,
                    attributes: BTreeMap::new(),
                }],
            },
        );
        let doc = |domain: &str, owner: &str, id: &str| DocRecord {
            domain: domain.into(),
            entity_id: owner.into(),
            doc_id: id.into(),
            title: "t".into(),
            body: "b".into(),
        };
        let kb = fuse(
            db.clone(),
            vec![doc("restaurant", "Pizza Hut", "a"), doc("restaurant", "r7", "b")],
        )
        .unwrap();
        assert_eq!(kb.entity("restaurant", "r7").unwrap().documents.len(), 2);

        let err = fuse(db, vec![doc("hotel", "ghost inn", "a")]).unwrap_err();
        match err {
            Error::Fusion { orphans } => {
                assert_eq!(orphans, vec![("hotel".to_string(), "ghost inn".to_string())])
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ambiguous_name_is_an_error() {
        let mut db = DbFile::new();
        let ent = |id: &str| DbEntity {
            id: id.into(),
            name: "twin".into(),
            bookable: false,
            attributes: BTreeMap::new(),
        };
        db.insert(
            "hotel".into(),
            DbDomain {
                slots: vec![],
                entities: vec![ent("h1"), ent("h2")],
            },
        );
        let rec = DocRecord {
            domain: "hotel".into(),
            entity_id: "twin".into(),
            doc_id: "d".into(),
            title: "".into(),
            body: "x".into(),
        };
        assert!(matches!(
            fuse(db, vec![rec]),
            Err(Error::AmbiguousOwner { .. })
        ));
    }
}
