//! Picture prediction: ranks the cards that can legally come next on a strip.
//!
//! Scores are Laplace-smoothed bigram estimates over the learner's completed
//! sentences. With `n` legal candidates and a non-empty prefix ending in `p`:
//!
//! ```text
//! score(c) = (bigram(p, c) + 1) / (unigram(p) + n)
//! ```
//!
//! and for an empty prefix `score(c) = (unigram(c) + 1) / (total + n)`.
//! Ties fall back to the higher unigram count, then the smaller card id.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::catalog::Deck;
use crate::grammar::{validate_strip, SentenceError, SentenceStrip, StripState, MAX_STRIP_LEN};

/// Card-usage counts from completed sentences.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageModel {
    pub unigram: BTreeMap<String, u64>,
    /// `bigram[prev][next]`
    pub bigram: BTreeMap<String, BTreeMap<String, u64>>,
}

impl UsageModel {
    pub fn new() -> UsageModel {
        UsageModel::default()
    }

    pub fn unigram(&self, id: &str) -> u64 {
        self.unigram.get(id).copied().unwrap_or(0)
    }

    pub fn bigram(&self, prev: &str, next: &str) -> u64 {
        self.bigram
            .get(prev)
            .and_then(|row| row.get(next))
            .copied()
            .unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.unigram.values().sum()
    }

    /// True when every bigram row sums to no more than its prefix's unigram count.
    pub fn is_consistent(&self) -> bool {
        self.bigram
            .iter()
            .all(|(prev, row)| row.values().sum::<u64>() <= self.unigram(prev))
    }

    fn record(&mut self, card_ids: &[String]) {
        for id in card_ids {
            *self.unigram.entry(id.clone()).or_insert(0) += 1;
        }
        for pair in card_ids.windows(2) {
            *self
                .bigram
                .entry(pair[0].clone())
                .or_default()
                .entry(pair[1].clone())
                .or_insert(0) += 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub card_id: String,
    pub score: f64,
}

/// Up to `k` cards that legally extend `prefix`, best first.
pub fn predict_next<S: AsRef<str>>(
    deck: &Deck,
    prefix: &[S],
    model: &UsageModel,
    k: usize,
) -> Result<Vec<Prediction>, SentenceError> {
    let state = validate_strip(deck, prefix)?;
    if !state.is_incomplete() {
        return Err(SentenceError::PrefixNotExtendable(state));
    }
    debug_assert!(prefix.len() < MAX_STRIP_LEN);

    let mut extended: Vec<&str> = prefix.iter().map(|s| s.as_ref()).collect();
    extended.push("");
    let mut candidates = Vec::new();
    for card in deck.cards() {
        *extended.last_mut().unwrap() = card.id.as_str();
        match validate_strip(deck, &extended)? {
            StripState::Valid | StripState::Incomplete => candidates.push(card.id.as_str()),
            StripState::Invalid { .. } => {}
        }
    }

    let n = candidates.len() as u64;
    let last = prefix.last().map(|s| s.as_ref());
    let denominator = match last {
        Some(p) => model.unigram(p) + n,
        None => model.total() + n,
    };
    let numerator = |c: &str| match last {
        Some(p) => model.bigram(p, c) + 1,
        None => model.unigram(c) + 1,
    };

    // Every candidate shares the denominator, so integer numerators order exactly.
    let mut ranked: Vec<(u64, u64, &str)> = candidates
        .into_iter()
        .map(|c| (numerator(c), model.unigram(c), c))
        .collect();
    ranked.sort_by(|a, b| b.0.cmp(&a.0).then(b.1.cmp(&a.1)).then(a.2.cmp(b.2)));
    Ok(ranked
        .into_iter()
        .take(k)
        .map(|(num, _, id)| Prediction {
            card_id: id.to_string(),
            score: num as f64 / denominator as f64,
        })
        .collect())
}

/// Returns `model` with the counts of a completed sentence added.
pub fn update_usage_model(model: &UsageModel, strip: &SentenceStrip) -> Result<UsageModel, SentenceError> {
    if !strip.state().is_valid() {
        return Err(SentenceError::StripNotValid);
    }
    let mut next = model.clone();
    next.record(strip.card_ids());
    Ok(next)
}
