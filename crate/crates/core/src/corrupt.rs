//! Consistency-corruption of training samples.
//!
//! Exactly half of the samples (rounded down, chosen by a seeded shuffle) are
//! corrupted. Each corrupted sample gets one of three perturbations drawn
//! uniformly: its belief span is swapped for another sample's, every slot
//! value is swapped for a different ontology value, or its response is
//! swapped for another sample's.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::belief::{parse_belief_span, serialize_belief, ExtendedBeliefState};
use crate::error::{Error, Result};
use crate::kb::Ontology;

/// A training sample before labelling.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogSample {
    pub context: String,
    pub belief_span: String,
    pub query_span: String,
    pub document: String,
    pub response: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionType {
    None,
    ReplaceState,
    ReplaceValues,
    ReplaceResponse,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptionSample {
    #[serde(flatten)]
    pub sample: DialogSample,
    /// 1 for consistent, 0 for corrupted.
    pub label: u8,
    pub corruption: CorruptionType,
}

fn other_index(rng: &mut ChaCha8Rng, n: usize, i: usize) -> usize {
    let j = rng.gen_range(0..n - 1);
    if j >= i {
        j + 1
    } else {
        j
    }
}

fn replace_values(
    state: &ExtendedBeliefState,
    ontology: &Ontology,
    rng: &mut ChaCha8Rng,
) -> Result<ExtendedBeliefState> {
    let mut out = ExtendedBeliefState::new();
    for t in state.triples() {
        let choices: Vec<&String> = ontology
            .values(&t.domain, &t.slot)
            .into_iter()
            .flatten()
            .filter(|v| **v != t.value)
            .collect();
        if choices.is_empty() {
            return Err(Error::Corruption(format!(
                "no alternative value for slot {}-{}",
                t.domain, t.slot
            )));
        }
        let v = choices[rng.gen_range(0..choices.len())];
        out.set(&t.domain, &t.slot, v)?;
    }
    out.set_topic(state.topic())?;
    Ok(out)
}

/// Labels every sample and corrupts `n / 2` of them.
///
/// A sample whose belief state has no triples cannot take the value
/// perturbation; it gets the state replacement instead.
pub fn corrupt_samples(
    samples: &[DialogSample],
    seed: u64,
    ontology: &Ontology,
) -> Result<Vec<CorruptionSample>> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::Corruption(format!("need at least 2 samples, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut chosen = order[..n / 2].to_vec();
    chosen.sort_unstable();

    let mut out: Vec<CorruptionSample> = samples
        .iter()
        .map(|s| CorruptionSample {
            sample: s.clone(),
            label: 1,
            corruption: CorruptionType::None,
        })
        .collect();

    for i in chosen {
        let kind = match rng.gen_range(0..3) {
            0 => CorruptionType::ReplaceState,
            1 => CorruptionType::ReplaceValues,
            _ => CorruptionType::ReplaceResponse,
        };
        let target = &mut out[i];
        target.label = 0;
        match kind {
            CorruptionType::ReplaceValues => {
                let state = parse_belief_span(&samples[i].belief_span)
                    .map_err(|e| Error::Corruption(format!("sample {i}: {e}")))?;
                if state.triples().is_empty() {
                    let j = other_index(&mut rng, n, i);
                    target.sample.belief_span = samples[j].belief_span.clone();
                    target.corruption = CorruptionType::ReplaceState;
                } else {
                    let changed = replace_values(&state, ontology, &mut rng)?;
                    target.sample.belief_span = serialize_belief(&changed);
                    target.corruption = kind;
                }
            }
            CorruptionType::ReplaceState => {
                let j = other_index(&mut rng, n, i);
                target.sample.belief_span = samples[j].belief_span.clone();
                target.corruption = kind;
            }
            CorruptionType::ReplaceResponse => {
                let j = other_index(&mut rng, n, i);
                target.sample.response = samples[j].response.clone();
                target.corruption = kind;
            }
            CorruptionType::None => unreachable!(),
        }
    }
    Ok(out)
}

/// One JSON object per line.
pub fn to_jsonl(samples: &[CorruptionSample]) -> String {
    let mut out = String::new();
    for s in samples {
        out.push_str(&serde_json::to_string(s).expect("sample serializes"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn sample(span: &str, resp: &str) -> DialogSample {
        DialogSample {
            context: "ctx".into(),
            belief_span: span.into(),
            query_span: String::new(),
            document: String::new(),
            response: resp.into(),
        }
    }

    fn ontology() -> Ontology {
        let mut o = Ontology::default();
        o.slots.insert(
            ("restaurant".into(), "food".into()),
            BTreeSet::from(["italian".to_string(), "chinese".to_string()]),
        );
        o
    }

    #[test]
    fn half_are_corrupted() {
        let samples: Vec<_> = (0..10)
            .map(|i| sample("restaurant { food = italian }", &format!("r{i}")))
            .collect();
        let out = corrupt_samples(&samples, 3, &ontology()).unwrap();
        assert_eq!(out.iter().filter(|s| s.label == 0).count(), 5);
        for s in &out {
            assert_eq!(s.label == 1, s.corruption == CorruptionType::None);
            if s.corruption == CorruptionType::ReplaceValues {
                assert_eq!(s.sample.belief_span, "restaurant { food = chinese }");
            }
        }
        assert_eq!(out, corrupt_samples(&samples, 3, &ontology()).unwrap());
    }

    #[test]
    fn missing_alternative_is_an_error() {
        let samples: Vec<_> = (0..40).map(|_| sample("hotel { area = north }", "r")).collect();
        let err = corrupt_samples(&samples, 1, &ontology()).unwrap_err();
        assert!(err.to_string().contains("hotel-area"));
    }

    #[test]
    fn too_few_samples() {
        assert!(corrupt_samples(&[sample("", "r")], 0, &ontology()).is_err());
    }
}
