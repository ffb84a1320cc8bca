//! Text-generation and retrieval metrics, all on a 0-100 scale.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::knowops::lcs_len;

fn ngram_counts<'a>(tokens: &'a [String], n: usize) -> HashMap<&'a [String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus BLEU-4: clipped n-gram precisions pooled over the corpus, uniform
/// weights, brevity penalty, no smoothing.
pub fn bleu(hypotheses: &[Vec<String>], references: &[Vec<String>]) -> Result<f64> {
    if hypotheses.len() != references.len() {
        return Err(Error::Metric(format!(
            "bleu: {} hypotheses vs {} references",
            hypotheses.len(),
            references.len()
        )));
    }
    if hypotheses.is_empty() {
        return Err(Error::Metric("bleu: empty corpus".into()));
    }
    let mut matched = [0usize; 4];
    let mut total = [0usize; 4];
    let (mut hyp_len, mut ref_len) = (0usize, 0usize);
    for (h, r) in hypotheses.iter().zip(references) {
        hyp_len += h.len();
        ref_len += r.len();
        for n in 1..=4 {
            let hc = ngram_counts(h, n);
            let rc = ngram_counts(r, n);
            for (g, c) in &hc {
                matched[n - 1] += (*c).min(rc.get(g).copied().unwrap_or(0));
            }
            total[n - 1] += h.len().saturating_sub(n - 1);
        }
    }
    if matched.contains(&0) {
        return Ok(0.0);
    }
    let log_p: f64 = (0..4)
        .map(|i| (matched[i] as f64 / total[i] as f64).ln())
        .sum::<f64>()
        / 4.0;
    let bp = if hyp_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    Ok(100.0 * bp * log_p.exp())
}

pub const ROUGE_BETA: f64 = 1.2;

/// Sentence-level ROUGE-L F-measure.
pub fn rouge_l(hypothesis: &[String], reference: &[String]) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::Metric("rouge-l: empty reference".into()));
    }
    if hypothesis.is_empty() {
        return Ok(0.0);
    }
    let lcs = lcs_len(hypothesis, reference) as f64;
    if lcs == 0.0 {
        return Ok(0.0);
    }
    let p = lcs / hypothesis.len() as f64;
    let r = lcs / reference.len() as f64;
    let b2 = ROUGE_BETA * ROUGE_BETA;
    Ok(100.0 * (1.0 + b2) * p * r / (r + b2 * p))
}

/// Mean sentence ROUGE-L over aligned pairs.
pub fn corpus_rouge_l(hypotheses: &[Vec<String>], references: &[Vec<String>]) -> Result<f64> {
    mean_pairwise(hypotheses, references, rouge_l)
}

pub const METEOR_ALPHA: f64 = 0.9;
pub const METEOR_BETA: f64 = 3.0;
pub const METEOR_GAMMA: f64 = 0.5;

/// Crude suffix stripper for the stem-matching stage.
pub fn stem(word: &str) -> &str {
    for suffix in ["ing", "edly", "ed", "ly", "es", "s"] {
        if let Some(s) = word.strip_suffix(suffix) {
            if s.chars().count() >= 3 {
                return s;
            }
        }
    }
    word
}

/// METEOR without the synonym stage: exact matching, then stem matching,
/// each aligning hypothesis words left to right to the first free reference
/// position.
pub fn meteor_simplified(hypothesis: &[String], reference: &[String]) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::Metric("meteor: empty reference".into()));
    }
    let mut ref_used = vec![false; reference.len()];
    let mut align: Vec<Option<usize>> = vec![None; hypothesis.len()];
    let stages: [fn(&str, &str) -> bool; 2] = [|a, b| a == b, |a, b| stem(a) == stem(b)];
    for same in stages {
        for (i, h) in hypothesis.iter().enumerate() {
            if align[i].is_some() {
                continue;
            }
            if let Some(j) = (0..reference.len()).find(|&j| !ref_used[j] && same(h, &reference[j])) {
                ref_used[j] = true;
                align[i] = Some(j);
            }
        }
    }
    let m = align.iter().flatten().count();
    if m == 0 {
        return Ok(0.0);
    }
    let mut chunks = 0;
    let mut prev: Option<usize> = None;
    for a in &align {
        match (*a, prev) {
            (Some(j), Some(p)) if j == p + 1 => {}
            (Some(_), _) => chunks += 1,
            (None, _) => {}
        }
        prev = *a;
    }
    let p = m as f64 / hypothesis.len() as f64;
    let r = m as f64 / reference.len() as f64;
    let f_mean = p * r / (METEOR_ALPHA * p + (1.0 - METEOR_ALPHA) * r);
    let penalty = METEOR_GAMMA * (chunks as f64 / m as f64).powf(METEOR_BETA);
    Ok(100.0 * f_mean * (1.0 - penalty))
}

pub fn corpus_meteor(hypotheses: &[Vec<String>], references: &[Vec<String>]) -> Result<f64> {
    mean_pairwise(hypotheses, references, meteor_simplified)
}

fn mean_pairwise(
    hypotheses: &[Vec<String>],
    references: &[Vec<String>],
    f: fn(&[String], &[String]) -> Result<f64>,
) -> Result<f64> {
    if hypotheses.len() != references.len() {
        return Err(Error::Metric("hypothesis/reference counts differ".into()));
    }
    if hypotheses.is_empty() {
        return Err(Error::Metric("empty corpus".into()));
    }
    let mut sum = 0.0;
    for (h, r) in hypotheses.iter().zip(references) {
        sum += f(h, r)?;
    }
    Ok(sum / hypotheses.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetrievalScores {
    pub mrr_at_5: f64,
    pub r_at_1: f64,
}

/// `ranks[i]` is the 1-based rank of turn i's gold document, `None` when it
/// was not retrieved at all.
pub fn retrieval_metrics(ranks: &[Option<usize>]) -> Result<RetrievalScores> {
    if ranks.is_empty() {
        return Err(Error::Metric("retrieval: no knowledge-seeking turns".into()));
    }
    let n = ranks.len() as f64;
    let mrr: f64 = ranks
        .iter()
        .map(|r| match r {
            Some(k @ 1..=5) => 1.0 / *k as f64,
            _ => 0.0,
        })
        .sum();
    let hits = ranks.iter().filter(|r| **r == Some(1)).count() as f64;
    Ok(RetrievalScores {
        mrr_at_5: 100.0 * mrr / n,
        r_at_1: 100.0 * hits / n,
    })
}

/// `(inform + success) * 0.5 + bleu` before rounding.
pub fn combined_raw(inform: f64, success: f64, bleu: f64) -> f64 {
    (inform + success) * 0.5 + bleu
}

/// Rounds half away from zero via ten-thousandths, so that binary
/// representation error cannot flip a tie.
pub fn round_to(value: f64, decimals: u32) -> f64 {
    let units = (value * 1e4).round() as i64;
    let step = 10i64.pow(4 - decimals.min(4));
    let half = step / 2;
    let rounded = if units >= 0 {
        (units + half) / step
    } else {
        -((-units + half) / step)
    };
    rounded as f64 / 10f64.powi(decimals as i32)
}

/// Combined score reported to one decimal.
pub fn combined_score(inform: f64, success: f64, bleu: f64) -> f64 {
    round_to(combined_raw(inform, success, bleu), 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::words;

    #[test]
    fn combined_rows() {
        assert_eq!(combined_score(93.6, 71.9, 17.3), 100.1);
        assert_eq!(combined_score(82.9, 68.7, 19.0), 94.8);
        assert_eq!(combined_score(0.0, 0.0, 0.0), 0.0);
    }

    #[test]
    fn retrieval_example() {
        let s = retrieval_metrics(&[Some(1), Some(2), Some(5), None]).unwrap();
        assert_eq!(s.mrr_at_5, 42.5);
        assert_eq!(s.r_at_1, 25.0);
        assert_eq!(retrieval_metrics(&[Some(6)]).unwrap().mrr_at_5, 0.0);
    }

    #[test]
    fn rouge_hand_value() {
        let v = rouge_l(&words("the cat sat"), &words("the cat ran")).unwrap();
        // P = R = 2/3, so F = 2/3 whatever beta is
        assert!((v - 200.0 / 3.0).abs() < 1e-9);
        assert_eq!(rouge_l(&words("a b"), &words("c d")).unwrap(), 0.0);
        assert!(rouge_l(&words("a"), &[]).is_err());
    }

    #[test]
    fn stems() {
        assert_eq!(stem("options"), "option");
        assert_eq!(stem("booked"), "book");
        assert_eq!(stem("is"), "is");
    }
}
