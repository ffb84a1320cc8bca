//! Structured query over the toy knowledge base.
//!
//!     cargo run --example knowledge_query -- "hotel { area = north }"

use std::path::Path;

use sskm::belief::parse_belief_span;
use sskm::kb::load_knowledge_base;
use sskm::knowops::{format_query_span, map_query_vector, structured_query};

fn main() -> sskm::Result<()> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let kb = load_knowledge_base(&fixtures.join("toy_db.json"), &fixtures.join("toy_docs.json"))?;
    let span = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "restaurant { food = italian , area = center }".to_string());

    let state = parse_belief_span(&span)?;
    let result = structured_query(&kb, &state)?;
    println!("{}", format_query_span(&result));
    for d in &result.per_domain {
        println!("{}: {:?} (bookable: {})", d.domain, d.matched_entity_ids, d.booking_available);
    }
    if let Some(active) = state.active_domain() {
        println!("vector for {active}: {:?}", map_query_vector(&result, active).to_bits());
    }
    Ok(())
}
