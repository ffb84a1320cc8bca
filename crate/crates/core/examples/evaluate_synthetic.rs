//! Generates a seeded knowledge base and corpus, then evaluates the oracle
//! and heuristic trackers on it.
//!
//!     cargo run --release --example evaluate_synthetic -- 7

use sskm::eval::{evaluate_corpus, EvalOptions};
use sskm::pipeline::{BeliefPredictor, HeuristicPredictor, OraclePredictor, TemplateGenerator, Templates};
use sskm::synth::{generate_synthetic_corpus, generate_synthetic_kb, CorpusSpec, SyntheticKbSpec};
use sskm::topic::{build_topic_index, Thresholds, Tokenizer};

fn main() -> sskm::Result<()> {
    let seed = std::env::args().nth(1).map_or(7, |s| s.parse().expect("integer seed"));
    let kb = generate_synthetic_kb(&SyntheticKbSpec::default(), seed)?;
    let index = build_topic_index(&kb, &Thresholds::default(), &Tokenizer::default())?;
    let corpus = generate_synthetic_corpus(&kb, &index, &CorpusSpec::default(), seed)?;
    println!("{} dialogs, {} turns, {} documents\n", corpus.dialogs.len(), corpus.turn_count(), index.len());

    let generator = TemplateGenerator::new(Templates::default(), &kb);
    let heuristic = HeuristicPredictor::new(&kb, &index, Tokenizer::default());
    let options = EvalOptions { workers: 4, ..EvalOptions::default() };
    let predictors: [(&str, &dyn BeliefPredictor); 2] = [("oracle", &OraclePredictor), ("heuristic", &heuristic)];
    for (name, p) in predictors {
        let (report, _) = evaluate_corpus(&corpus, &kb, &index, p, &generator, &options)?;
        println!("{name}\n{report}");
    }
    Ok(())
}
