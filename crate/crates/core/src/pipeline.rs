//! Turn processing: belief prediction, knowledge operation, and
//! delexicalized response generation.
//!
//! Predictors and generators are traits so that learned models can replace
//! the oracle, heuristic and template implementations shipped here. The
//! pipeline hands gold labels to the predictor only; the knowledge operation
//! and generator see predicted state.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use crate::belief::{ExtendedBeliefState, RUK};
use crate::error::{Error, Result};
use crate::kb::{Entity, KnowledgeBase};
use crate::knowops::{
    format_query_span, match_entity, structured_query, KnowledgeOps, QueryResult, RetrievedDocument,
};
use crate::topic::{TopicIndex, Tokenizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Speaker {
    User,
    System,
}

/// Dialog history up to and including the current user utterance.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DialogContext {
    pub utterances: Vec<(Speaker, String)>,
    /// Number of previous exchanges kept; `None` keeps the full history.
    pub window: Option<usize>,
}

impl DialogContext {
    pub fn with_window(window: Option<usize>) -> Self {
        DialogContext {
            utterances: Vec::new(),
            window,
        }
    }

    pub fn push(&mut self, speaker: Speaker, text: &str) {
        self.utterances.push((speaker, text.to_string()));
    }

    pub fn latest_user(&self) -> Option<&str> {
        self.utterances
            .iter()
            .rev()
            .find(|(s, _)| *s == Speaker::User)
            .map(|(_, t)| t.as_str())
    }

    /// The trailing slice allowed by `window`: `k` earlier user/system
    /// exchanges plus the current user utterance.
    pub fn visible(&self) -> &[(Speaker, String)] {
        match self.window {
            None => &self.utterances,
            Some(k) => {
                let keep = (2 * k + 1).min(self.utterances.len());
                &self.utterances[self.utterances.len() - keep..]
            }
        }
    }
}

/// What a predictor sees for one turn.
#[derive(Debug, Clone, Copy)]
pub struct TurnInput<'a> {
    pub context: &'a DialogContext,
    pub prev: &'a ExtendedBeliefState,
    pub gold: Option<&'a ExtendedBeliefState>,
}

pub trait BeliefPredictor: Sync {
    fn predict(&self, input: &TurnInput<'_>) -> Result<ExtendedBeliefState>;
}

/// Returns the gold state verbatim.
#[derive(Debug, Clone, Copy, Default)]
pub struct OraclePredictor;

impl BeliefPredictor for OraclePredictor {
    fn predict(&self, input: &TurnInput<'_>) -> Result<ExtendedBeliefState> {
        input
            .gold
            .cloned()
            .ok_or_else(|| Error::Oracle("turn has no gold belief annotation".into()))
    }
}

/// Deterministic rule-based tracker.
///
/// Adds every ontology value found verbatim in the latest user utterance
/// (longest first, on word boundaries), then sets `ruk` and topic when the
/// utterance shares a word with a topic of the current entity's documents.
/// The previous turn's `ruk` and topic are not carried over.
pub struct HeuristicPredictor<'a> {
    kb: &'a KnowledgeBase,
    index: &'a TopicIndex,
    tokenizer: Tokenizer,
    /// (padded value, domain, slot, value), longest value first.
    lexicon: Vec<(String, String, String, String)>,
    floor: f64,
}

fn pad_words(text: &str) -> String {
    let mut out = String::from(" ");
    for w in text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
    {
        out.push_str(&w.to_lowercase());
        out.push(' ');
    }
    out
}

impl<'a> HeuristicPredictor<'a> {
    pub fn new(kb: &'a KnowledgeBase, index: &'a TopicIndex, tokenizer: Tokenizer) -> Self {
        let mut lexicon = Vec::new();
        for ((domain, slot), values) in &kb.ontology().slots {
            if slot == RUK {
                continue;
            }
            for v in values {
                let padded = pad_words(v);
                if padded.trim().is_empty() {
                    continue;
                }
                lexicon.push((padded, domain.clone(), slot.clone(), v.clone()));
            }
        }
        lexicon.sort_by(|a, b| {
            b.0.len()
                .cmp(&a.0.len())
                .then_with(|| a.0.cmp(&b.0))
                .then_with(|| a.1.cmp(&b.1))
                .then_with(|| a.2.cmp(&b.2))
        });
        HeuristicPredictor {
            kb,
            index,
            tokenizer,
            lexicon,
            floor: crate::knowops::DEFAULT_MATCH_FLOOR,
        }
    }

    fn value_hits(&self, utterance: &str, prev: &ExtendedBeliefState) -> Vec<(String, String, String)> {
        let mut text = pad_words(utterance);
        let mentioned: BTreeSet<&str> = text.split_whitespace().collect::<BTreeSet<_>>();
        let mentioned_domains: Vec<String> = self
            .kb
            .domains()
            .filter(|d| mentioned.contains(d.name.as_str()))
            .map(|d| d.name.clone())
            .collect();
        let prev_active = prev.active_domain().map(str::to_string);

        // first pass: find values, longest first, masking each match so a
        // shorter value cannot match inside a longer one
        let mut found: Vec<(usize, &[(String, String, String, String)])> = Vec::new();
        let mut i = 0;
        while i < self.lexicon.len() {
            let value = &self.lexicon[i].0;
            let mut j = i;
            while j < self.lexicon.len() && self.lexicon[j].0 == *value {
                j += 1;
            }
            if let Some(pos) = text.find(value.as_str()) {
                found.push((pos, &self.lexicon[i..j]));
                // mask the span but keep the surrounding separators
                let masked: String = " ".to_string() + &"#".repeat(value.len() - 2) + " ";
                text.replace_range(pos..pos + value.len(), &masked);
            }
            i = j;
        }
        found.sort_by_key(|f| f.0);

        // second pass: a value owned by several domains goes to a domain
        // named in the utterance, then one an unambiguous value picked, then
        // the previous active domain
        let sure: Vec<&str> = found
            .iter()
            .filter(|(_, o)| o.iter().all(|x| x.1 == o[0].1))
            .map(|(_, o)| o[0].1.as_str())
            .collect();
        found
            .into_iter()
            .map(|(_, owners)| {
                let pick = owners
                    .iter()
                    .find(|o| mentioned_domains.contains(&o.1))
                    .or_else(|| owners.iter().find(|o| sure.contains(&o.1.as_str())))
                    .or_else(|| owners.iter().find(|o| Some(&o.1) == prev_active.as_ref()))
                    .unwrap_or(&owners[0]);
                (pick.1.clone(), pick.2.clone(), pick.3.clone())
            })
            .collect()
    }

    /// The entity the user is talking about: one named in the utterance,
    /// else the previous turn's `ruk` entity when it belongs to `domain`,
    /// else the first structured match.
    fn current_entity(
        &self,
        hits: &[(String, String, String)],
        prev: &ExtendedBeliefState,
        state: &ExtendedBeliefState,
        domain: &str,
    ) -> Option<&'a Entity> {
        let named = hits.iter().find(|(d, s, _)| d == domain && s == "name");
        if let Some((_, _, name)) = named {
            let found = self.kb.domain(domain).ok()?.entities.iter().find(|e| e.name == *name);
            if found.is_some() {
                return found;
            }
        }
        if let Some(r) = prev.ruk().filter(|r| r.domain == domain) {
            if let Ok(Some(m)) = match_entity(self.kb, domain, &r.value, self.floor) {
                return Some(m.entity);
            }
        }
        let query = structured_query(self.kb, state).ok()?;
        let id = query.domain(domain)?.matched_entity_ids.first()?;
        self.kb.entity(domain, id)
    }
}

impl BeliefPredictor for HeuristicPredictor<'_> {
    fn predict(&self, input: &TurnInput<'_>) -> Result<ExtendedBeliefState> {
        // ruk and topic describe a single knowledge-seeking turn
        let mut state = input.prev.without_extension();
        let Some(utterance) = input.context.latest_user() else {
            return Ok(state);
        };
        let hits = self.value_hits(utterance, input.prev);
        for (domain, slot, value) in &hits {
            state.set(domain, slot, value)?;
        }

        let words: BTreeSet<String> = self.tokenizer.tokenize(utterance).into_iter().collect();
        let domains: Vec<String> = state.domains().into_iter().map(String::from).collect();
        for domain in domains {
            let Some(entity) = self.current_entity(&hits, input.prev, &state, &domain) else {
                continue;
            };
            let mut best: Vec<String> = Vec::new();
            for (_, entry) in self.index.documents_of(&domain, &entity.id) {
                let shared: Vec<String> = entry
                    .tokens()
                    .into_iter()
                    .filter(|t| words.contains(*t))
                    .map(String::from)
                    .collect();
                if shared.len() > best.len() {
                    best = shared;
                }
            }
            if !best.is_empty() {
                // a name mentioned to ask about the entity is not a constraint
                let named_now = hits
                    .iter()
                    .any(|(d, s, v)| *d == domain && s == "name" && *v == entity.name);
                if named_now && input.prev.get(&domain, "name").is_none() {
                    state.remove(&domain, "name");
                }
                state.set(&domain, RUK, &entity.name)?;
                state.set_topic(&best)?;
                break;
            }
        }
        Ok(state)
    }
}

/// Everything a response generator may look at.
#[derive(Debug, Clone, Copy)]
pub struct GenerationInput<'a> {
    pub belief: &'a ExtendedBeliefState,
    pub query: &'a QueryResult,
    pub document: &'a RetrievedDocument,
    pub user_utterance: &'a str,
}

pub trait ResponseGenerator: Sync {
    /// Returns a delexicalized response.
    fn generate(&self, input: &GenerationInput<'_>) -> Result<String>;
}

pub const DEFAULT_TEMPLATES: &str = include_str!("../assets/templates.tsv");

/// Template set keyed by `(domain, condition)`; domain `*` is the fallback.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Templates {
    table: BTreeMap<(String, String), String>,
}

impl Default for Templates {
    fn default() -> Self {
        Templates::parse(DEFAULT_TEMPLATES).expect("built-in templates parse")
    }
}

impl Templates {
    /// Tab-separated `domain condition template` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut table = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.splitn(3, '\t');
            match (parts.next(), parts.next(), parts.next()) {
                (Some(d), Some(c), Some(t)) => {
                    table.insert((d.trim().to_string(), c.trim().to_string()), t.trim().to_string());
                }
                _ => return Err(Error::Template(format!("line {}: expected 3 fields", n + 1))),
            }
        }
        Ok(Templates { table })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::load(path, e.to_string()))?;
        Templates::parse(&text)
    }

    pub fn get(&self, domain: &str, condition: &str) -> Result<&str> {
        self.table
            .get(&(domain.to_string(), condition.to_string()))
            .or_else(|| self.table.get(&("*".to_string(), condition.to_string())))
            .map(String::as_str)
            .ok_or_else(|| Error::Template(format!("no {condition} template for domain {domain}")))
    }
}

/// Fills templates from the knowledge-operation result. Requested slots are
/// schema slots of the active domain that the user names.
#[derive(Debug, Clone)]
pub struct TemplateGenerator {
    templates: Templates,
    schemas: BTreeMap<String, BTreeSet<String>>,
}

impl TemplateGenerator {
    pub fn new(templates: Templates, kb: &KnowledgeBase) -> Self {
        TemplateGenerator {
            templates,
            schemas: kb
                .domains()
                .map(|d| (d.name.clone(), d.slot_schema.clone()))
                .collect(),
        }
    }

    /// Schema slots named in the utterance that the state does not already
    /// constrain.
    fn requested(&self, domain: &str, belief: &ExtendedBeliefState, utterance: &str) -> Vec<String> {
        let Some(schema) = self.schemas.get(domain) else {
            return Vec::new();
        };
        let mut out: Vec<String> = Vec::new();
        for w in pad_words(utterance).split_whitespace() {
            if w != "name"
                && schema.contains(w)
                && belief.get(domain, w).is_none()
                && !out.iter().any(|o| o == w)
            {
                out.push(w.to_string());
            }
        }
        out
    }
}

impl ResponseGenerator for TemplateGenerator {
    fn generate(&self, input: &GenerationInput<'_>) -> Result<String> {
        if let Some(hit) = input.document.hit() {
            let t = self.templates.get(&hit.key.domain, "document")?;
            return Ok(t.replace("{body}", &hit.body));
        }
        let Some(domain) = input.belief.active_domain() else {
            return Ok(self.templates.get("*", "greet")?.to_string());
        };
        let count = input.query.match_count(domain);
        if count == 0 {
            return Ok(self.templates.get(domain, "nomatch")?.to_string());
        }
        let mut out = self
            .templates
            .get(domain, "offer")?
            .replace("{count}", &count.to_string());
        for slot in self.requested(domain, input.belief, input.user_utterance) {
            out.push(' ');
            out.push_str(&self.templates.get(domain, "request")?.replace("{slot}", &slot));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicalized {
    pub text: String,
    pub unresolved: Vec<String>,
}

/// Replaces `[slot]` placeholders with the attributes of the first matched
/// entity of the most recent domain that has matches.
pub fn lexicalize(delex: &str, query: &QueryResult, kb: &KnowledgeBase) -> Lexicalized {
    let entity = query
        .per_domain
        .iter()
        .rev()
        .find(|d| d.match_count() > 0)
        .and_then(|d| kb.entity(&d.domain, &d.matched_entity_ids[0]));
    let mut text = String::with_capacity(delex.len());
    let mut unresolved = Vec::new();
    let mut rest = delex;
    while let Some(open) = rest.find('[') {
        let Some(close) = rest[open..].find(']').map(|c| open + c) else {
            break;
        };
        let slot = &rest[open + 1..close];
        text.push_str(&rest[..open]);
        let value = entity.and_then(|e| {
            if slot == "name" {
                Some(e.name.as_str())
            } else {
                e.attributes.get(slot).map(String::as_str)
            }
        });
        match value {
            Some(v) => text.push_str(v),
            None => {
                text.push_str(&rest[open..=close]);
                unresolved.push(slot.to_string());
            }
        }
        rest = &rest[close + 1..];
    }
    text.push_str(rest);
    Lexicalized { text, unresolved }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TurnOutput {
    pub belief: ExtendedBeliefState,
    pub query: QueryResult,
    pub query_span: String,
    pub document: RetrievedDocument,
    pub delexicalized_response: String,
    pub lexicalized_response: String,
    pub unresolved: Vec<String>,
}

/// One dialog in progress.
#[derive(Debug, Clone, Default)]
pub struct Session {
    pub id: String,
    pub history: DialogContext,
    pub prev_belief: ExtendedBeliefState,
    pub turns: usize,
}

impl Session {
    pub fn new(id: &str) -> Self {
        Session {
            id: id.to_string(),
            ..Session::default()
        }
    }

    pub fn with_window(mut self, window: Option<usize>) -> Self {
        self.history.window = window;
        self
    }
}

/// Processes one user utterance and advances the session.
pub fn run_turn(
    session: &mut Session,
    user_utterance: &str,
    gold: Option<&ExtendedBeliefState>,
    predictor: &dyn BeliefPredictor,
    generator: &dyn ResponseGenerator,
    ops: &KnowledgeOps<'_>,
) -> Result<TurnOutput> {
    let turn = session.turns;
    let at = |e: Error| e.at_turn(&session.id, turn);
    session.history.push(Speaker::User, user_utterance);
    let visible = DialogContext {
        utterances: session.history.visible().to_vec(),
        window: session.history.window,
    };
    let belief = predictor
        .predict(&TurnInput {
            context: &visible,
            prev: &session.prev_belief,
            gold,
        })
        .map_err(at)?;
    let (query, document) = ops.run(&belief).map_err(at)?;
    let delex = generator
        .generate(&GenerationInput {
            belief: &belief,
            query: &query,
            document: &document,
            user_utterance,
        })
        .map_err(at)?;
    let lex = lexicalize(&delex, &query, ops.kb);
    session.history.push(Speaker::System, &lex.text);
    session.prev_belief = belief.clone();
    session.turns += 1;
    Ok(TurnOutput {
        query_span: format_query_span(&query),
        belief,
        query,
        document,
        delexicalized_response: delex,
        lexicalized_response: lex.text,
        unresolved: lex.unresolved,
    })
}
