//! Test-only helpers: brute-force oracles, fixture decks and simulated
//! learners. Nothing here is used by the shipped crates.

pub mod cfg;
pub mod ranking;

use std::collections::BTreeMap;

use pecs_core::activity::{self, Activity, EvaluationResult};
use pecs_core::learner::{AccountRole, ActivityAttempt, AdvancementRule, AttemptDraft, LearnerRegistry, Phase, PhaseEntry};
use pecs_core::{load_deck, reference_deck, Category, Deck, Role};
use rand::rngs::StdRng;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use serde_json::json;

use crate::cfg::{GrammarOracle, Verdict};

pub const TEST_KDF_ROUNDS: u32 = 1_000;

/// Ten cards covering every role: I, want, like, cat, apple, red, happy,
/// to-run, in, on.
pub fn ten_card_deck() -> Deck {
    let cards = [
        ("i", "I", "Core", "STARTER"),
        ("want", "want", "Core", "VERB"),
        ("like", "like", "Core", "VERB"),
        ("cat", "cat", "Animals", "NOUN"),
        ("apple", "apple", "Fruits", "NOUN"),
        ("red", "red", "Colours", "ADJECTIVE"),
        ("happy", "happy", "Emotions", "ADJECTIVE"),
        ("to-run", "to run", "Motions", "ACTION"),
        ("in", "in", "Core", "PREPOSITION"),
        ("on", "on", "Core", "PREPOSITION"),
    ];
    let body: Vec<String> = cards
        .iter()
        .map(|(id, word, cat, role)| {
            format!(r#"{{"id":"{id}","word":"{word}","category":"{cat}","role":"{role}","picture":"p/{id}.png","audio":"a/{id}.ogg"}}"#)
        })
        .collect();
    load_deck(&format!(r#"{{"format_version":1,"cards":[{}]}}"#, body.join(","))).unwrap()
}

/// Every id sequence of length `0..=max_len` over the deck, shortest first.
pub fn all_sequences(deck: &Deck, max_len: usize) -> Vec<Vec<String>> {
    let ids: Vec<String> = deck.cards().iter().map(|c| c.id.clone()).collect();
    let mut out = vec![Vec::new()];
    let mut layer: Vec<Vec<String>> = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::with_capacity(layer.len() * ids.len());
        for seq in &layer {
            for id in &ids {
                let mut s = seq.clone();
                s.push(id.clone());
                next.push(s);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

pub fn roles_of(deck: &Deck, ids: &[impl AsRef<str>]) -> Vec<Role> {
    ids.iter().map(|id| deck.get(id.as_ref()).unwrap().role).collect()
}

/// A uniformly chosen sentence shape filled with random cards of each role.
pub fn random_sentence(oracle: &GrammarOracle, deck: &Deck, rng: &mut impl Rng) -> Vec<String> {
    let shapes: Vec<&Vec<Role>> = oracle
        .sentences()
        .iter()
        .filter(|shape| shape.iter().all(|r| deck.cards().iter().any(|c| c.role == *r)))
        .collect();
    let shape = shapes.choose(rng).expect("deck supports at least one sentence");
    shape
        .iter()
        .map(|role| {
            let cards: Vec<&str> = deck.cards().iter().filter(|c| c.role == *role).map(|c| c.id.as_str()).collect();
            cards.choose(rng).unwrap().to_string()
        })
        .collect()
}

/// A prefix the oracle calls incomplete, cut from a random sentence.
pub fn random_open_prefix(oracle: &GrammarOracle, deck: &Deck, rng: &mut impl Rng) -> Vec<String> {
    loop {
        let sentence = random_sentence(oracle, deck, rng);
        let cut = rng.random_range(0..sentence.len());
        let prefix = sentence[..cut].to_vec();
        if oracle.verdict(&roles_of(deck, &prefix)) == Verdict::Incomplete {
            return prefix;
        }
    }
}

/// Star total recounted from the raw ledger.
pub fn recount_stars(ledger: &[ActivityAttempt]) -> u64 {
    let mut total = 0;
    for attempt in ledger {
        if attempt.stars_awarded == 1 {
            total += 1;
        }
    }
    total
}

fn draft(activity: Activity, category: Option<Category>, descriptor: serde_json::Value, response: serde_json::Value, eval: &EvaluationResult) -> AttemptDraft {
    AttemptDraft {
        activity,
        category,
        prompt_descriptor: descriptor,
        response,
        correct: eval.correct,
        stars_awarded: eval.stars_awarded,
    }
}

/// Plays one round of `activity` through the engine, answering correctly
/// with probability `accuracy`, and returns the draft to record.
pub fn play_round(deck: &Deck, oracle: &GrammarOracle, activity: Activity, accuracy: f64, rng: &mut StdRng) -> AttemptDraft {
    let right = rng.random_bool(accuracy);
    let seed: u64 = rng.random();
    match activity {
        Activity::SingleWord => {
            let card = deck.cards().choose(rng).unwrap();
            let tap = activity::record_single_word_tap(deck, &card.id).unwrap();
            AttemptDraft {
                activity,
                category: Some(card.category),
                prompt_descriptor: json!({"card_id": tap.card_id}),
                response: json!({"tapped": true}),
                correct: true,
                stars_awarded: 0,
            }
        }
        Activity::Differentiate => {
            let categories = [Category::Animals, Category::Fruits, Category::Shapes, Category::Food];
            let category = *categories.choose(rng).unwrap();
            let task = activity::gen_discrimination_task(deck, category, 3, seed).unwrap();
            let chosen = if right {
                task.target.clone()
            } else {
                task.options.iter().find(|o| **o != task.target).unwrap().clone()
            };
            let eval = activity::evaluate_discrimination(&task, &chosen).unwrap();
            draft(activity, Some(category), json!({"task_id": task.task_id}), json!({"chosen": chosen}), &eval)
        }
        Activity::PecsBook => {
            let mut strip = random_sentence(oracle, deck, rng);
            if !right {
                strip.reverse();
            }
            let eval = activity::evaluate_strip_submission(deck, &strip).unwrap();
            let category = deck.get(strip.last().unwrap()).map(|c| c.category);
            draft(activity, category, json!({}), json!({"card_ids": strip}), &eval)
        }
        Activity::Qa => {
            let q = activity::gen_question(deck, Phase::FOUR, seed).unwrap();
            let chosen = if right { q.correct_index } else { (q.correct_index + 1) % 3 };
            let eval = activity::evaluate_answer(&q, chosen).unwrap();
            let category = deck.get(&q.prompt_card).map(|c| c.category);
            draft(activity, category, json!({"question_id": q.question_id}), json!({"chosen_index": chosen}), &eval)
        }
    }
}

pub struct SimulationOutcome {
    /// Attempt count at which phase four was entered, if it was.
    pub reached_phase_four_after: Option<usize>,
    pub phase_history: Vec<PhaseEntry>,
}

/// A child who always works on their current gate activity, answering
/// correctly with probability `accuracy`.
pub fn simulate_learner(seed: u64, accuracy: f64, max_attempts: usize) -> SimulationOutcome {
    let deck = reference_deck();
    let oracle = GrammarOracle::new(pecs_core::MAX_STRIP_LEN);
    let mut rng = StdRng::seed_from_u64(seed);
    let mut reg = LearnerRegistry::new(AdvancementRule::default(), TEST_KDF_ROUNDS);
    let id = reg
        .register("sim", "simulated-pw", AccountRole::Child, BTreeMap::new(), 0)
        .unwrap()
        .learner_id
        .clone();
    let mut reached = None;
    for n in 1..=max_attempts {
        let phase = reg.profile(&id).unwrap().current_phase;
        let Some(gate) = phase.gate_activity() else { break };
        let d = play_round(&deck, &oracle, gate, accuracy, &mut rng);
        let out = reg.record_attempt(&id, d, n as u64 * 1_000).unwrap();
        if out.advancement.new_phase == Phase::FOUR {
            reached = Some(n);
            break;
        }
    }
    SimulationOutcome {
        reached_phase_four_after: reached,
        phase_history: reg.profile(&id).unwrap().phase_history.clone(),
    }
}
