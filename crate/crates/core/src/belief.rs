//! Extended belief state and its text-span grammar.
//!
//! ```text
//! span   := group* ( "||" token+ )?
//! group  := domain "{" ( pair ( "," pair )* )? "}"
//! pair   := slot "=" value
//! ```
//!
//! Tokens are separated by single spaces on output; any whitespace run is
//! accepted on input. `{ } = , |` never occur inside a field. The slot `ruk`
//! marks a turn that needs unstructured knowledge and its value names the
//! entity; the words after `||` are the turn's topic.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::text::normalize;
use crate::topic::{DocKey, TopicIndex};

pub const RUK: &str = "ruk";

const RESERVED: &[char] = &['{', '}', '=', ',', '|'];

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DsvTriple {
    pub domain: String,
    pub slot: String,
    pub value: String,
}

impl DsvTriple {
    pub fn is_ruk(&self) -> bool {
        self.slot == RUK
    }
}

fn check_field(what: &str, s: &str) -> Result<()> {
    if s.is_empty() {
        return Err(Error::Belief(format!("empty {what}")));
    }
    if s.contains(RESERVED) || s != normalize(s) {
        return Err(Error::Belief(format!("{what} {s:?} is not a normalized span field")));
    }
    Ok(())
}

/// Domain-slot-value triples plus the topic word sequence.
///
/// Triples stay grouped by domain in first-mention order; within a domain
/// they keep insertion order with `ruk` last.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct ExtendedBeliefState {
    triples: Vec<DsvTriple>,
    topic: Vec<String>,
}

impl ExtendedBeliefState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty() && self.topic.is_empty()
    }

    pub fn triples(&self) -> &[DsvTriple] {
        &self.triples
    }

    pub fn topic(&self) -> &[String] {
        &self.topic
    }

    pub fn get(&self, domain: &str, slot: &str) -> Option<&str> {
        self.triples
            .iter()
            .find(|t| t.domain == domain && t.slot == slot)
            .map(|t| t.value.as_str())
    }

    /// The first `ruk` triple.
    pub fn ruk(&self) -> Option<&DsvTriple> {
        self.triples.iter().find(|t| t.is_ruk())
    }

    pub fn non_ruk(&self) -> impl Iterator<Item = &DsvTriple> {
        self.triples.iter().filter(|t| !t.is_ruk())
    }

    /// Domains in first-mention order.
    pub fn domains(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for t in &self.triples {
            if out.last() != Some(&t.domain.as_str()) {
                out.push(&t.domain);
            }
        }
        out
    }

    /// The most recently introduced domain.
    pub fn active_domain(&self) -> Option<&str> {
        self.triples.last().map(|t| t.domain.as_str())
    }

    /// Inserts or overwrites `(domain, slot)`; an existing pair keeps its
    /// position and takes the new value.
    pub fn set(&mut self, domain: &str, slot: &str, value: &str) -> Result<()> {
        check_field("domain", domain)?;
        if domain.contains(' ') {
            return Err(Error::Belief(format!("domain {domain:?} contains a space")));
        }
        check_field("slot", slot)?;
        check_field("value", value)?;
        if let Some(t) = self
            .triples
            .iter_mut()
            .find(|t| t.domain == domain && t.slot == slot)
        {
            t.value = value.to_string();
            return Ok(());
        }
        let triple = DsvTriple {
            domain: domain.to_string(),
            slot: slot.to_string(),
            value: value.to_string(),
        };
        let group_end = self
            .triples
            .iter()
            .rposition(|t| t.domain == domain)
            .map(|i| i + 1);
        let at = match group_end {
            None => self.triples.len(),
            Some(end) if slot != RUK && self.triples[end - 1].is_ruk() => end - 1,
            Some(end) => end,
        };
        self.triples.insert(at, triple);
        Ok(())
    }

    pub fn remove(&mut self, domain: &str, slot: &str) -> Option<String> {
        let i = self
            .triples
            .iter()
            .position(|t| t.domain == domain && t.slot == slot)?;
        Some(self.triples.remove(i).value)
    }

    pub fn set_topic<I, S>(&mut self, topic: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let topic: Vec<String> = topic.into_iter().map(|t| t.as_ref().to_string()).collect();
        for t in &topic {
            check_field("topic token", t)?;
            if t.contains(' ') {
                return Err(Error::Belief(format!("topic token {t:?} contains a space")));
            }
        }
        self.topic = topic;
        Ok(())
    }

    /// The state with every `ruk` triple and the topic removed.
    pub fn without_extension(&self) -> Self {
        ExtendedBeliefState {
            triples: self.non_ruk().cloned().collect(),
            topic: Vec::new(),
        }
    }

    pub fn has_extension(&self) -> bool {
        self.ruk().is_some() || !self.topic.is_empty()
    }
}

impl fmt::Display for ExtendedBeliefState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_belief(self))
    }
}

impl std::str::FromStr for ExtendedBeliefState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_belief_span(s)
    }
}

pub fn serialize_belief(state: &ExtendedBeliefState) -> String {
    let mut parts: Vec<String> = Vec::new();
    let mut i = 0;
    while i < state.triples.len() {
        let domain = &state.triples[i].domain;
        let mut pairs = Vec::new();
        while i < state.triples.len() && state.triples[i].domain == *domain {
            let t = &state.triples[i];
            pairs.push(format!("{} = {}", t.slot, t.value));
            i += 1;
        }
        parts.push(format!("{domain} {{ {} }}", pairs.join(" , ")));
    }
    if !state.topic.is_empty() {
        parts.push(format!("|| {}", state.topic.join(" ")));
    }
    parts.join(" ")
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws(&mut self) {
        let rest = &self.text[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn err(&self, at: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            offset: at,
            message: message.into(),
        }
    }

    /// Consumes up to the first char in `stops`, returning the raw slice.
    fn take_until(&mut self, stops: &[char]) -> &'a str {
        let rest = &self.text[self.pos..];
        let n = rest.find(stops).unwrap_or(rest.len());
        self.pos += n;
        &rest[..n]
    }
}

/// Parses a belief span. Duplicate `(domain, slot)` pairs keep the last value.
pub fn parse_belief_span(text: &str) -> Result<ExtendedBeliefState> {
    let mut state = ExtendedBeliefState::new();
    let mut cur = Cursor { text, pos: 0 };
    loop {
        cur.skip_ws();
        if cur.pos >= text.len() {
            break;
        }
        if text[cur.pos..].starts_with("||") {
            let bar = cur.pos;
            cur.pos += 2;
            let rest = &text[cur.pos..];
            if let Some(off) = rest.find(RESERVED) {
                return Err(cur.err(cur.pos + off, "reserved character in topic"));
            }
            let topic: Vec<String> = rest.split_whitespace().map(normalize).collect();
            if topic.is_empty() {
                return Err(cur.err(bar, "empty topic after '||'"));
            }
            if state.ruk().is_none() {
                return Err(cur.err(bar, "topic without a ruk triple"));
            }
            state.set_topic(topic)?;
            break;
        }

        let dom_start = cur.pos;
        let domain = cur.take_until(&['{', '}', '=', ',', '|', ' ', '\t', '\n', '\r']);
        if domain.is_empty() {
            return Err(cur.err(dom_start, "expected a domain name"));
        }
        let domain = normalize(domain);
        cur.skip_ws();
        if cur.peek() != Some('{') {
            return Err(cur.err(cur.pos, format!("expected '{{' after domain {domain:?}")));
        }
        cur.pos += 1;

        let mut first = true;
        loop {
            cur.skip_ws();
            match cur.peek() {
                None => return Err(cur.err(cur.pos, "unbalanced braces: missing '}'")),
                Some('}') if first => {
                    cur.pos += 1;
                    break;
                }
                _ => {}
            }
            first = false;
            let slot_start = cur.pos;
            let slot = cur.take_until(RESERVED);
            match cur.peek() {
                Some('=') => {}
                None => return Err(cur.err(cur.pos, "unbalanced braces: missing '}'")),
                Some(_) => return Err(cur.err(cur.pos, "missing '=' in slot-value pair")),
            }
            let slot = normalize(slot);
            if slot.is_empty() {
                return Err(cur.err(slot_start, "empty slot name"));
            }
            cur.pos += 1;
            cur.skip_ws();
            let value_start = cur.pos;
            let value = normalize(cur.take_until(RESERVED));
            match cur.peek() {
                None => return Err(cur.err(cur.pos, "unbalanced braces: missing '}'")),
                Some(',') | Some('}') => {}
                Some(c) => return Err(cur.err(cur.pos, format!("unexpected {c:?} in value"))),
            }
            if value.is_empty() {
                return Err(cur.err(value_start, "empty value"));
            }
            state
                .set(&domain, &slot, &value)
                .map_err(|e| cur.err(slot_start, e.to_string()))?;
            let c = cur.peek();
            cur.pos += 1;
            if c == Some('}') {
                break;
            }
        }
    }
    Ok(state)
}

/// Adds the `ruk` triple and topic for an annotated document. No
/// annotation leaves the state as is.
pub fn extend_gold_label(
    original: &ExtendedBeliefState,
    annotation: Option<&DocKey>,
    index: &TopicIndex,
) -> Result<ExtendedBeliefState> {
    let Some(key) = annotation else {
        return Ok(original.clone());
    };
    let entry = index.get(key).ok_or_else(|| {
        Error::Label(format!(
            "document {}/{}/{} is not in the topic index",
            key.domain, key.entity_id, key.doc_id
        ))
    })?;
    let mut out = original.clone();
    let entity = if entry.entity_name.is_empty() {
        &key.entity_id
    } else {
        &entry.entity_name
    };
    out.set(&key.domain, RUK, entity)?;
    out.set_topic(entry.tokens())?;
    Ok(out)
}

/// Joint-goal agreement on the original (non-`ruk`) triples only.
pub fn joint_goal_match(pred: &ExtendedBeliefState, gold: &ExtendedBeliefState) -> bool {
    let p: BTreeSet<&DsvTriple> = pred.non_ruk().collect();
    let g: BTreeSet<&DsvTriple> = gold.non_ruk().collect();
    p == g
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    /// Undefined ratios are reported as 0.
    pub fn from_counts(tp: usize, predicted: usize, gold: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, gold);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Prf { precision, recall, f1 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ExtendedPrf {
    pub ruk: Prf,
    pub topic: Prf,
}

/// Precision/recall/F1 of the `ruk` triple (domain and value) and of the
/// topic (as a token set), over aligned prediction and gold lists.
pub fn extended_prf(preds: &[ExtendedBeliefState], golds: &[ExtendedBeliefState]) -> Result<ExtendedPrf> {
    if preds.len() != golds.len() {
        return Err(Error::Alignment {
            preds: preds.len(),
            golds: golds.len(),
        });
    }
    let (mut ruk_tp, mut ruk_p, mut ruk_g) = (0, 0, 0);
    let (mut top_tp, mut top_p, mut top_g) = (0, 0, 0);
    for (p, g) in preds.iter().zip(golds) {
        let (pr, gr) = (p.ruk(), g.ruk());
        ruk_p += pr.is_some() as usize;
        ruk_g += gr.is_some() as usize;
        if let (Some(a), Some(b)) = (pr, gr) {
            if a.domain == b.domain && a.value == b.value {
                ruk_tp += 1;
            }
        }
        let (pt, gt) = (!p.topic().is_empty(), !g.topic().is_empty());
        top_p += pt as usize;
        top_g += gt as usize;
        if pt && gt {
            let a: BTreeSet<&String> = p.topic().iter().collect();
            let b: BTreeSet<&String> = g.topic().iter().collect();
            if a == b {
                top_tp += 1;
            }
        }
    }
    Ok(ExtendedPrf {
        ruk: Prf::from_counts(ruk_tp, ruk_p, ruk_g),
        topic: Prf::from_counts(top_tp, top_p, top_g),
    })
}
