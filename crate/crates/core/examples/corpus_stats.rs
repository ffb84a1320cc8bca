//! Statistics for a corpus file, the toy corpus by default.
//!
//!     cargo run --example corpus_stats -- path/to/dialogs.jsonl

use std::path::{Path, PathBuf};

use sskm::corpus::{corpus_stats, load_corpus};

fn main() -> sskm::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/toy_corpus.jsonl"));
    let stats = corpus_stats(&load_corpus(&path)?);
    println!("{}", serde_json::to_string_pretty(&stats).expect("stats serialize"));
    Ok(())
}
