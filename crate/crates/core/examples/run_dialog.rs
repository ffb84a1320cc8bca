//! Runs the heuristic tracker and template generator over a scripted
//! dialog, printing each turn's state, query span and response.

use std::path::Path;

use sskm::kb::load_knowledge_base;
use sskm::knowops::KnowledgeOps;
use sskm::pipeline::{run_turn, HeuristicPredictor, Session, TemplateGenerator, Templates};
use sskm::topic::{build_topic_index, Thresholds, Tokenizer};

fn main() -> sskm::Result<()> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let kb = load_knowledge_base(&fixtures.join("toy_db.json"), &fixtures.join("toy_docs.json"))?;
    let index = build_topic_index(&kb, &Thresholds::default(), &Tokenizer::default())?;
    let predictor = HeuristicPredictor::new(&kb, &index, Tokenizer::default());
    let generator = TemplateGenerator::new(Templates::default(), &kb);
    let ops = KnowledgeOps::new(&kb, &index);

    let mut session = Session::new("demo");
    for user in [
        "i am looking for italian food in the center",
        "what is their favorite dish ?",
        "great , what is the phone number ?",
    ] {
        let out = run_turn(&mut session, user, None, &predictor, &generator, &ops)?;
        println!("user:   {user}");
        println!("belief: {}", out.belief);
        println!("query:  {}", out.query_span);
        println!("system: {}", out.lexicalized_response);
        println!();
    }
    Ok(())
}
