//! Builds the topic index over the toy knowledge base and prints it.
//!
//!     cargo run --example build_index [-- restaurant=0.2 hotel=0.2]

use std::path::Path;

use sskm::kb::load_knowledge_base;
use sskm::topic::{build_topic_index, Thresholds, Tokenizer};

fn main() -> sskm::Result<()> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let kb = load_knowledge_base(&fixtures.join("toy_db.json"), &fixtures.join("toy_docs.json"))?;

    let mut thresholds = Thresholds::default();
    for arg in std::env::args().skip(1) {
        let (domain, value) = arg.split_once('=').expect("domain=value");
        thresholds.set(domain, value.parse().expect("numeric threshold"));
    }
    let index = build_topic_index(&kb, &thresholds, &Tokenizer::default())?;
    print!("{}", index.to_tsv());

    for (key, entry) in index.entries() {
        for w in &entry.words {
            println!(
                "  {}/{} {:<12} tfidf {:.3}  ca {:.3}  kept by filter: {}",
                key.entity_id, key.doc_id, w.token, w.tfidf, w.ca_tfidf, w.survived_filter
            );
        }
    }
    Ok(())
}
