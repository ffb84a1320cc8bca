//! Labels the toy corpus's turns for consistency training.
//!
//!     cargo run --example corrupt_samples -- 42

use std::path::Path;

use sskm::corpus::load_corpus;
use sskm::corrupt::{corrupt_samples, DialogSample};
use sskm::kb::load_knowledge_base;

fn main() -> sskm::Result<()> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let kb = load_knowledge_base(&fixtures.join("toy_db.json"), &fixtures.join("toy_docs.json"))?;
    let corpus = load_corpus(&fixtures.join("toy_corpus.jsonl"))?;
    let seed = std::env::args().nth(1).map_or(0, |s| s.parse().expect("integer seed"));

    let samples: Vec<DialogSample> = corpus
        .dialogs
        .iter()
        .flat_map(|d| &d.turns)
        .map(|t| DialogSample {
            context: format!("user: {}", t.user),
            belief_span: t.gold_belief.to_string(),
            query_span: String::new(),
            document: String::new(),
            response: t.response.clone(),
        })
        .collect();
    for s in corrupt_samples(&samples, seed, &kb.ontology())? {
        println!("{} {:<16} {} | {}", s.label, format!("{:?}", s.corruption), s.sample.belief_span, s.sample.response);
    }
    Ok(())
}
