//! Parses, edits and re-serializes extended belief spans.

use sskm::belief::{parse_belief_span, ExtendedBeliefState, RUK};

fn main() {
    let mut state: ExtendedBeliefState = "restaurant { food = italian , area = center }".parse().unwrap();
    println!("{state}");

    state.set("restaurant", RUK, "pizza hut").unwrap();
    state.set_topic(["favorite"]).unwrap();
    println!("{state}");
    println!("without extension: {}", state.without_extension());

    for bad in ["restaurant { food = }", "restaurant { food italian }", "hotel { } || breakfast"] {
        match parse_belief_span(bad) {
            Ok(s) => println!("{bad:?} parsed as {s}"),
            Err(e) => println!("{bad:?}: {e}"),
        }
    }
}
