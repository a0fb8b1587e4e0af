//! Prediction ranking recomputed from the scoring formula with plain floats
//! and a full sort, plus a count-by-replay oracle for usage models.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use pecs_core::{Deck, Role};

use crate::cfg::GrammarOracle;

/// Minimal usage counts keyed by `(prev, next)` pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Counts {
    pub unigram: BTreeMap<String, u64>,
    pub bigram: BTreeMap<(String, String), u64>,
}

impl Counts {
    /// Recounts from scratch over every sentence in `log`.
    pub fn recount<S: AsRef<str>>(log: &[Vec<S>]) -> Counts {
        let mut c = Counts::default();
        for sentence in log {
            for (i, id) in sentence.iter().enumerate() {
                *c.unigram.entry(id.as_ref().to_string()).or_insert(0) += 1;
                if i > 0 {
                    let key = (sentence[i - 1].as_ref().to_string(), id.as_ref().to_string());
                    *c.bigram.entry(key).or_insert(0) += 1;
                }
            }
        }
        c
    }

    pub fn from_model(model: &pecs_core::UsageModel) -> Counts {
        let mut c = Counts {
            unigram: model.unigram.clone(),
            bigram: BTreeMap::new(),
        };
        for (prev, row) in &model.bigram {
            for (next, n) in row {
                c.bigram.insert((prev.clone(), next.clone()), *n);
            }
        }
        c.unigram.retain(|_, n| *n > 0);
        c.bigram.retain(|_, n| *n > 0);
        c
    }
}

/// `(card_id, score)` in the order the formula and tie-break rules demand.
pub fn expected_ranking(
    oracle: &GrammarOracle,
    deck: &Deck,
    prefix: &[&str],
    counts: &Counts,
    k: usize,
) -> Vec<(String, f64)> {
    let roles: Vec<Role> = prefix.iter().map(|id| deck.get(id).unwrap().role).collect();
    let candidates: Vec<&str> = deck
        .cards()
        .iter()
        .filter(|c| {
            let mut r = roles.clone();
            r.push(c.role);
            oracle.extendable(&r)
        })
        .map(|c| c.id.as_str())
        .collect();
    let n = candidates.len() as f64;
    let uni = |id: &str| counts.unigram.get(id).copied().unwrap_or(0) as f64;
    let total: f64 = counts.unigram.values().map(|&v| v as f64).sum();
    let mut scored: Vec<(String, f64, f64)> = candidates
        .iter()
        .map(|&c| {
            let score = match prefix.last() {
                Some(&p) => {
                    let b = counts
                        .bigram
                        .get(&(p.to_string(), c.to_string()))
                        .copied()
                        .unwrap_or(0) as f64;
                    (b + 1.0) / (uni(p) + n)
                }
                None => (uni(c) + 1.0) / (total + n),
            };
            (c.to_string(), score, uni(c))
        })
        .collect();
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(Ordering::Equal)
            .then(b.2.partial_cmp(&a.2).unwrap_or(Ordering::Equal))
            .then(a.0.cmp(&b.0))
    });
    scored.into_iter().take(k).map(|(id, s, _)| (id, s)).collect()
}
