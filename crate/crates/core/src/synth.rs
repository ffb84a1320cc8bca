//! Seeded synthetic knowledge bases and dialog corpora for desk-scale runs.
//!
//! Corpora interleave original turns (constraints, then slot requests) with
//! inserted turns that ask about one of the target entity's documents. Gold
//! labels of inserted turns carry the `ruk` triple and the document's indexed
//! topic words.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::belief::{extend_gold_label, ExtendedBeliefState};
use crate::corpus::{Dialog, DialogCorpus, DialogTurn, DomainGoal};
use crate::error::{Error, Result};
use crate::kb::{Document, Domain, Entity, KnowledgeBase};
use crate::knowops::structured_query;
use crate::pipeline::lexicalize;
use crate::topic::{DocKey, TopicIndex};

const AREAS: &[&str] = &["centre", "north", "south", "east", "west"];
const PRICES: &[&str] = &["cheap", "moderate", "expensive"];
const FOODS: &[&str] = &[
    "italian", "chinese", "indian", "french", "thai", "british", "korean", "turkish", "spanish",
    "mexican",
];
const HOTEL_TYPES: &[&str] = &["guesthouse", "hotel"];
const STARS: &[&str] = &["2", "3", "4", "5"];
const STREETS: &[&str] = &["regent", "mill", "castle", "bridge", "station", "park", "king", "hills"];
const NAME_HEADS: &[&str] = &[
    "acorn", "bridge", "golden", "silver", "royal", "lucky", "maple", "cedar", "river", "harbour",
    "meadow", "copper", "ivory", "willow", "amber", "crown", "falcon", "orchid", "pebble", "saffron",
    "juniper", "lantern", "marble", "nutmeg", "oak", "pine", "quartz", "rose", "thistle", "velvet",
];
const RESTAURANT_TAILS: &[&str] = &["kitchen", "bistro", "grill", "house", "table", "garden"];
const HOTEL_TAILS: &[&str] = &["guest house", "lodge", "inn", "hotel", "rooms"];
const RESTAURANT_ASPECTS: &[&str] = &[
    "vegetarian", "dessert", "wine", "delivery", "terrace", "gluten", "seafood", "music", "brunch",
    "cocktails", "favorite", "takeaway",
];
const HOTEL_ASPECTS: &[&str] = &[
    "breakfast", "parking", "wifi", "pool", "gym", "spa", "laundry", "shuttle", "balcony", "pets",
    "checkout", "luggage",
];
const REQUESTABLES: &[&str] = &["address", "phone", "postcode"];

const RESTAURANT_SLOTS: &[&str] = &["name", "food", "area", "pricerange", "address", "phone", "postcode"];
const HOTEL_SLOTS: &[&str] = &[
    "name", "type", "area", "pricerange", "stars", "address", "phone", "postcode",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticKbSpec {
    pub restaurants: usize,
    pub hotels: usize,
    pub docs_per_entity: usize,
    pub attractions: usize,
}

impl Default for SyntheticKbSpec {
    fn default() -> Self {
        SyntheticKbSpec {
            restaurants: 12,
            hotels: 12,
            docs_per_entity: 3,
            attractions: 4,
        }
    }
}

fn pick<'a>(rng: &mut ChaCha8Rng, xs: &[&'a str]) -> &'a str {
    xs[rng.gen_range(0..xs.len())]
}

fn doc_body(aspect: &str, rng: &mut ChaCha8Rng) -> (String, String) {
    let title = format!("{aspect} information");
    let body = match rng.gen_range(0..3) {
        0 => format!("{aspect} is available here . guests often ask the staff about the {aspect} ."),
        1 => format!("yes , {aspect} is offered . please ask the staff about {aspect} details ."),
        _ => format!("about {aspect} : guests ask often and the staff can help with {aspect} ."),
    };
    (title, body)
}

fn unique_names(rng: &mut ChaCha8Rng, n: usize, tails: &[&str], taken: &mut BTreeSet<String>) -> Vec<String> {
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0;
    while out.len() < n {
        attempts += 1;
        let name = if attempts > 10_000 {
            format!("{} {} {}", pick(rng, NAME_HEADS), pick(rng, tails), out.len())
        } else {
            format!("{} {}", pick(rng, NAME_HEADS), pick(rng, tails))
        };
        if taken.insert(name.clone()) {
            out.push(name);
        }
    }
    out
}

fn documented_entity(
    rng: &mut ChaCha8Rng,
    id: String,
    name: &str,
    aspects: &[&str],
    docs: usize,
) -> Entity {
    let mut e = Entity::new(&id, name)
        .with_attr("area", pick(rng, AREAS))
        .with_attr("pricerange", pick(rng, PRICES))
        .with_attr(
            "address",
            &format!("{} {} road", rng.gen_range(1..200), pick(rng, STREETS)),
        )
        .with_attr("phone", &format!("01223{:06}", rng.gen_range(0..1_000_000)))
        .with_attr("postcode", &format!("cb{}{}", rng.gen_range(1..6), pick(rng, &["aa", "bd", "ef", "gh"])))
        .with_bookable(rng.gen_bool(0.7));
    let offset = rng.gen_range(0..aspects.len());
    for i in 0..docs.min(aspects.len()) {
        let aspect = aspects[(offset + i) % aspects.len()];
        let (title, body) = doc_body(aspect, rng);
        e = e.with_document(Document::new(&format!("d{}", i + 1), &title, &body));
    }
    e
}

/// A knowledge base with documented restaurant and hotel domains, an
/// undocumented attraction domain, and a single taxi entity.
pub fn generate_synthetic_kb(spec: &SyntheticKbSpec, seed: u64) -> Result<KnowledgeBase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut taken = BTreeSet::new();

    let mut restaurant = Domain::new("restaurant", RESTAURANT_SLOTS);
    for (i, name) in unique_names(&mut rng, spec.restaurants, RESTAURANT_TAILS, &mut taken)
        .iter()
        .enumerate()
    {
        let e = documented_entity(&mut rng, format!("r{:03}", i + 1), name, RESTAURANT_ASPECTS, spec.docs_per_entity)
            .with_attr("food", pick(&mut rng, FOODS));
        restaurant = restaurant.with_entity(e);
    }

    let mut hotel = Domain::new("hotel", HOTEL_SLOTS);
    for (i, name) in unique_names(&mut rng, spec.hotels, HOTEL_TAILS, &mut taken)
        .iter()
        .enumerate()
    {
        let e = documented_entity(&mut rng, format!("h{:03}", i + 1), name, HOTEL_ASPECTS, spec.docs_per_entity)
            .with_attr("type", pick(&mut rng, HOTEL_TYPES))
            .with_attr("stars", pick(&mut rng, STARS));
        hotel = hotel.with_entity(e);
    }

    let mut attraction = Domain::new("attraction", ["name", "area", "type"]);
    for (i, name) in unique_names(&mut rng, spec.attractions, &["museum", "gallery", "park"], &mut taken)
        .iter()
        .enumerate()
    {
        attraction = attraction.with_entity(
            Entity::new(&format!("a{:03}", i + 1), name)
                .with_attr("area", pick(&mut rng, AREAS))
                .with_attr("type", name.rsplit(' ').next().unwrap_or("museum")),
        );
    }

    let taxi = Domain::new("taxi", ["name"]).with_entity(Entity::new("taxi", "taxi"));
    KnowledgeBase::from_domains(vec![restaurant, hotel, attraction, taxi])
}

/// Adds a document to `key`'s entity that copies `key`'s title and body
/// under a doc id sorting before it, so both share one topic list.
pub fn inject_duplicate_topic(kb: &KnowledgeBase, key: &DocKey) -> Result<KnowledgeBase> {
    let mut domains: Vec<Domain> = kb.domains().cloned().collect();
    let domain = domains
        .iter_mut()
        .find(|d| d.name == key.domain)
        .ok_or_else(|| Error::DomainNotFound(key.domain.clone()))?;
    let entity = domain
        .entities
        .iter_mut()
        .find(|e| e.id == key.entity_id)
        .ok_or_else(|| Error::Generation(format!("no entity {}", key.entity_id)))?;
    let doc = entity
        .document(&key.doc_id)
        .ok_or_else(|| Error::Generation(format!("no document {}", key.doc_id)))?
        .clone();
    let dup_id = format!("0{}", key.doc_id);
    entity.documents.push(Document::new(&dup_id, &doc.title, &doc.body));
    KnowledgeBase::from_domains(domains)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorpusSpec {
    pub dialogs: usize,
    /// Original turns per dialog (at least one).
    pub original_turns: usize,
    /// Inserted knowledge-seeking turns per dialog.
    pub inserted_turns: usize,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            dialogs: 50,
            original_turns: 4,
            inserted_turns: 2,
        }
    }
}

const OFFER_VARIANTS: &[&str] = &[
    "i found {count} options . [name] is a nice choice .",
    "there are {count} options . how about [name] ?",
];

fn constraint_utterance(domain: &str, constraints: &[(String, String)], rng: &mut ChaCha8Rng) -> String {
    let parts: Vec<String> = constraints
        .iter()
        .map(|(s, v)| format!("the {s} should be {v}"))
        .collect();
    match rng.gen_range(0..2) {
        0 => format!("i am looking for a {domain} . {} .", parts.join(" and ")),
        _ => format!("i need a {domain} where {} .", parts.join(" and ")),
    }
}

/// Builds a seeded corpus over `kb` and `index`.
pub fn generate_synthetic_corpus(
    kb: &KnowledgeBase,
    index: &TopicIndex,
    spec: &CorpusSpec,
    seed: u64,
) -> Result<DialogCorpus> {
    if spec.original_turns == 0 {
        return Err(Error::Generation("at least one original turn per dialog".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let targets: Vec<(&str, &Entity)> = kb
        .domains()
        .filter(|d| d.has_documents())
        .flat_map(|d| {
            d.entities
                .iter()
                .filter(|e| !e.documents.is_empty())
                .map(move |e| (d.name.as_str(), e))
        })
        .collect();
    if targets.is_empty() {
        return Err(Error::Generation("knowledge base has no documented entities".into()));
    }
    // each inserted turn of a dialog asks about a different document
    let fewest = targets.iter().map(|(_, e)| e.documents.len()).min().unwrap_or(0);
    if spec.inserted_turns > fewest {
        return Err(Error::Generation(format!(
            "{} inserted turns per dialog requested but some entity has only {fewest} documents",
            spec.inserted_turns
        )));
    }

    let mut dialogs = Vec::with_capacity(spec.dialogs);
    for n in 0..spec.dialogs {
        let (domain_name, target) = targets[rng.gen_range(0..targets.len())];
        let domain = kb.domain(domain_name)?;

        let mut informable: Vec<&String> = target
            .attributes
            .keys()
            .filter(|s| *s != "name" && !REQUESTABLES.contains(&s.as_str()))
            .collect();
        informable.shuffle(&mut rng);
        let constraints: Vec<(String, String)> = informable
            .into_iter()
            .take(2)
            .map(|s| (s.clone(), target.attributes[s].clone()))
            .collect();
        let requestable_pool: Vec<&str> = REQUESTABLES
            .iter()
            .copied()
            .filter(|r| domain.slot_schema.contains(*r))
            .collect();

        // original turns: reveal constraints first, then one request per turn
        let reveal_turns = constraints.len().min(spec.original_turns).max(1);
        let mut plan: Vec<Option<usize>> = (0..spec.original_turns).map(|_| None).collect();
        let mut requests: Vec<&str> = requestable_pool.clone();
        requests.shuffle(&mut rng);
        let request_turns: Vec<&str> = requests
            .into_iter()
            .cycle()
            .take(spec.original_turns - reveal_turns)
            .collect();

        let mut docs: Vec<&Document> = target.documents.iter().collect();
        docs.shuffle(&mut rng);
        let mut inserted_positions: Vec<usize> = (0..spec.inserted_turns)
            .map(|_| rng.gen_range(1..=spec.original_turns))
            .collect();
        inserted_positions.sort_unstable();
        for (k, pos) in inserted_positions.iter().enumerate() {
            plan.insert(pos + k, Some(k));
        }

        let mut gold = ExtendedBeliefState::new();
        let mut turns = Vec::with_capacity(plan.len());
        let mut original_seen = 0usize;
        let mut goal = DomainGoal::default();
        for step in plan {
            let (user, turn_gold, annotation, delex) = match step {
                None => {
                    let i = original_seen;
                    original_seen += 1;
                    let user = if i < reveal_turns {
                        let chunk: Vec<(String, String)> = if i + 1 == reveal_turns {
                            constraints[i.min(constraints.len())..].to_vec()
                        } else {
                            vec![constraints[i].clone()]
                        };
                        for (s, v) in &chunk {
                            gold.set(domain_name, s, v)?;
                            goal.constraints.insert(s.clone(), v.clone());
                        }
                        constraint_utterance(domain_name, &chunk, &mut rng)
                    } else {
                        let r = request_turns[i - reveal_turns];
                        goal.requestables.insert(r.to_string());
                        format!("can i get the {r} of that {domain_name} ?")
                    };
                    let query = structured_query(kb, &gold)?;
                    let count = query.match_count(domain_name);
                    let mut delex = if count == 0 {
                        "sorry , no match found .".to_string()
                    } else {
                        pick(&mut rng, OFFER_VARIANTS).replace("{count}", &count.to_string())
                    };
                    if i >= reveal_turns && count > 0 {
                        let r = request_turns[i - reveal_turns];
                        delex.push_str(&format!(" the {r} is [{r}] ."));
                    }
                    (user, gold.clone(), None, delex)
                }
                Some(k) => {
                    let doc = docs[k];
                    let key = DocKey::new(domain_name, &target.id, &doc.doc_id);
                    let entry = index.get(&key).ok_or_else(|| {
                        Error::Generation(format!("document {}/{}/{} not indexed", key.domain, key.entity_id, key.doc_id))
                    })?;
                    let user = format!(
                        "i have a question about {} . what about the {} ?",
                        target.name,
                        entry.tokens().join(" ")
                    );
                    let extended = extend_gold_label(&gold, Some(&key), index)?;
                    let delex = format!("according to our information : {}", doc.body);
                    (user, extended, Some(key), delex)
                }
            };
            let query = structured_query(kb, &turn_gold)?;
            let response = lexicalize(&delex, &query, kb).text;
            turns.push(DialogTurn {
                user,
                response,
                gold_belief: turn_gold,
                doc_annotation: annotation,
                delex_response: Some(delex),
            });
        }

        let mut goal_spec = BTreeMap::new();
        goal_spec.insert(domain_name.to_string(), goal);
        dialogs.push(Dialog {
            dialog_id: format!("syn-{:04}", n + 1),
            goal: goal_spec,
            turns,
        });
    }
    Ok(DialogCorpus { dialogs })
}

/// True when no two documents of one entity share a topic list.
pub fn topics_unique_per_entity(index: &TopicIndex) -> bool {
    let mut seen: BTreeMap<(&str, &str), BTreeSet<Vec<&str>>> = BTreeMap::new();
    index.entries().iter().all(|(k, e)| {
        seen.entry((k.domain.as_str(), k.entity_id.as_str()))
            .or_default()
            .insert(e.tokens())
    })
}
