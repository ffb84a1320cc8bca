mod common;

use std::collections::BTreeMap;
use std::fs;

use common::*;
use sskm::kb::{
    fuse, list_entities, validate_knowledge_base, DbFile, DocRecord, Domain, Entity, KnowledgeBase, ViolationKind,
};
use sskm::topic::{
    build_topic_index, compute_ca_tfidf, compute_tfidf, extract_candidates, Candidate, DocKey, Thresholds,
    TokenizedDoc, Tokenizer, TopicIndex,
};

fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

#[test]
fn toy_kb_loads_and_validates() {
    let kb = toy_kb();
    assert!(validate_knowledge_base(&kb).is_valid());
    assert_eq!(list_entities(&kb, "restaurant").unwrap().len(), 6);
    assert_eq!(list_entities(&kb, "taxi").unwrap().len(), 1);
    assert_eq!(list_entities(&kb, "moon").unwrap_err().kind(), "domain-not-found");
    // the second pizza hut document names its owner rather than its id
    let r1 = kb.entity("restaurant", "r1").unwrap();
    assert_eq!(r1.documents.len(), 2);
    assert_eq!(kb.document_count(), 4);
}

#[test]
fn orphan_document_is_a_fusion_error() {
    let db: DbFile = serde_json::from_str(&fs::read_to_string(fixture("toy_db.json")).unwrap()).unwrap();
    let mut docs: Vec<DocRecord> =
        serde_json::from_str(&fs::read_to_string(fixture("toy_docs.json")).unwrap()).unwrap();
    let mut ghost = docs[0].clone();
    ghost.domain = "hotel".into();
    ghost.entity_id = "ghost inn".into();
    docs.push(ghost);
    let err = fuse(db, docs).unwrap_err();
    assert_eq!(err.kind(), "fusion");
    assert!(err.to_string().contains("ghost inn"), "{err}");
}

#[test]
fn sources_roundtrip() {
    let kb = toy_kb();
    let dir = tempfile::tempdir().unwrap();
    let (db, docs) = (dir.path().join("db.json"), dir.path().join("docs.json"));
    kb.write_sources(&db, &docs).unwrap();
    let again = sskm::kb::load_knowledge_base(&db, &docs).unwrap();
    assert_eq!(again, kb);
}

#[test]
fn validation_reports_violations() {
    let kb = KnowledgeBase::from_domains_unchecked(vec![Domain::new("restaurant", ["name", "food"])
        .with_entity(Entity::new("r1", "a").with_attr("colour", "red"))
        .with_entity(Entity::new("r1", "b"))])
    .unwrap();
    let kinds: Vec<ViolationKind> = validate_knowledge_base(&kb).violations.iter().map(|v| v.kind).collect();
    assert_eq!(
        kinds.iter().filter(|k| **k == ViolationKind::SchemaForeign).count(),
        1
    );
    assert_eq!(
        kinds.iter().filter(|k| **k == ViolationKind::DuplicateEntityId).count(),
        1
    );
}

#[test]
fn tokenizer_cases() {
    let t = Tokenizer::default();
    assert_eq!(t.tokenize("Free WiFi, free parking!"), ["free", "wifi", "free", "parking"]);
    assert!(t.tokenize("").is_empty());
    assert!(t.tokenize("a an the").is_empty());
}

#[test]
fn tfidf_hand_values() {
    let docs = vec![
        TokenizedDoc { key: DocKey::new("d", "e1", "a"), tokens: toks("pool pool pool shared") },
        TokenizedDoc { key: DocKey::new("d", "e2", "b"), tokens: toks("shared other") },
    ];
    let s = compute_tfidf(&docs);
    let a = &s[&DocKey::new("d", "e1", "a")];
    assert!((a["pool"] - 3.0 * 2f64.ln()).abs() < 1e-12);
    assert_eq!(a["shared"], 0.0);

    let single = vec![TokenizedDoc { key: DocKey::new("d", "e", "x"), tokens: toks("one two") }];
    assert!(compute_tfidf(&single).values().flat_map(|m| m.values()).all(|v| *v == 0.0));
}

#[test]
fn candidate_tie_break_follows_position() {
    let scores: BTreeMap<String, f64> = [("breakfast", 4.1), ("wifi", 2.0), ("pool", 2.0), ("bar", 1.0)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    let c = extract_candidates(&toks("bar pool wifi breakfast wifi pool"), &scores);
    let got: Vec<&str> = c.iter().map(|c| c.token.as_str()).collect();
    assert_eq!(got, ["breakfast", "pool", "wifi"]);
    let c = extract_candidates(&toks("wifi bar pool breakfast"), &scores);
    let got: Vec<&str> = c.iter().map(|c| c.token.as_str()).collect();
    assert_eq!(got, ["breakfast", "wifi", "pool"]);
    let two: BTreeMap<String, f64> = [("x".to_string(), 1.0), ("y".to_string(), 0.5)].into();
    assert_eq!(extract_candidates(&toks("x y x"), &two).len(), 2);
}

#[test]
fn ca_tfidf_hand_sum() {
    let cands = [
        Candidate { token: "pool".into(), tfidf: 2.0 },
        Candidate { token: "pool".into(), tfidf: 4.0 },
        Candidate { token: "zero".into(), tfidf: 0.0 },
    ];
    let ca = compute_ca_tfidf(&cands, 3);
    assert_eq!(ca["pool"], 2.0);
    assert_eq!(ca["zero"], 0.0);
}

#[test]
fn toy_index_matches_golden_files() {
    let kb = toy_kb();
    let golden = fs::read_to_string(fixture("toy_index.golden.tsv")).unwrap();
    assert_eq!(toy_index(&kb).to_tsv(), golden);

    let mut low = Thresholds::default();
    low.set("restaurant", 0.2);
    low.set("hotel", 0.2);
    let idx = build_topic_index(&kb, &low, &Tokenizer::default()).unwrap();
    let golden = fs::read_to_string(fixture("toy_index_low.golden.tsv")).unwrap();
    assert_eq!(idx.to_tsv(), golden);
}

#[test]
fn rust_oracle_agrees_with_committed_goldens() {
    let kb = toy_kb();
    let golden = fs::read_to_string(fixture("toy_index.golden.tsv")).unwrap();
    assert_eq!(topic_index_oracle(&kb, &default_thresholds()), golden);
}

#[test]
fn index_file_roundtrip_and_determinism() {
    let kb = toy_kb();
    let idx = toy_index(&kb);
    assert_eq!(idx.to_tsv(), toy_index(&kb).to_tsv());
    assert_eq!(idx.sidecar_json(), toy_index(&kb).sidecar_json());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("toy.idx");
    idx.write(&path).unwrap();
    let loaded = TopicIndex::load(&path).unwrap();
    assert_eq!(loaded.to_tsv(), idx.to_tsv());
    assert_eq!(loaded.sidecar_json(), idx.sidecar_json());
}

#[test]
fn every_document_has_one_to_three_topics() {
    let kb = toy_kb();
    for t in [0.0, 0.2, 1.0, 2.3, 100.0] {
        let mut th = Thresholds::default();
        th.set("restaurant", t);
        th.set("hotel", t);
        let idx = build_topic_index(&kb, &th, &Tokenizer::default()).unwrap();
        assert_eq!(idx.len(), kb.document_count());
        for e in idx.entries().values() {
            assert!((1..=3).contains(&e.words.len()));
        }
    }
}

#[test]
fn raising_a_threshold_never_adds_topics() {
    let kb = toy_kb();
    let mut prev: Option<TopicIndex> = None;
    for step in 0..40 {
        let mut th = Thresholds::default();
        th.set("restaurant", step as f64 * 0.1);
        th.set("hotel", step as f64 * 0.1);
        let idx = build_topic_index(&kb, &th, &Tokenizer::default()).unwrap();
        if let Some(p) = &prev {
            for (k, e) in idx.entries() {
                let before = p.get(k).unwrap().words.len();
                assert!(e.words.len() <= before, "{k:?} at step {step}");
            }
        }
        prev = Some(idx);
    }
}

#[test]
fn missing_threshold_is_a_config_error() {
    let kb = toy_kb();
    let th = Thresholds(BTreeMap::from([("hotel".to_string(), 2.7)]));
    assert_eq!(
        build_topic_index(&kb, &th, &Tokenizer::default()).unwrap_err().kind(),
        "config"
    );
}
