//! Entity matching and topic-based document ranking.

use std::path::Path;

use sskm::belief::parse_belief_span;
use sskm::kb::load_knowledge_base;
use sskm::knowops::{fuzzy_similarity, rank_documents, DEFAULT_MATCH_FLOOR};
use sskm::topic::{build_topic_index, Thresholds, Tokenizer};

fn main() -> sskm::Result<()> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let kb = load_knowledge_base(&fixtures.join("toy_db.json"), &fixtures.join("toy_docs.json"))?;
    let index = build_topic_index(&kb, &Thresholds::default(), &Tokenizer::default())?;

    println!("sim(guesthouse, acorn guest house) = {:.4}", fuzzy_similarity("guesthouse", "acorn guest house"));

    for span in [
        "restaurant { ruk = pizza hut } || favorite",
        "restaurant { ruk = pizza } || vegetarian",
        "hotel { ruk = acorn guest } || parking",
        "hotel { area = north }",
    ] {
        println!("{span}");
        match rank_documents(&kb, &index, &parse_belief_span(span)?, DEFAULT_MATCH_FLOOR)? {
            None => println!("  no document"),
            Some((m, ranked)) => {
                println!("  entity {} ({:.3})", m.entity.name, m.score);
                for r in ranked {
                    println!("  {:.4} {}", r.score, r.key.doc_id);
                }
            }
        }
    }
    Ok(())
}
