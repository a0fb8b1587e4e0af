//! The four main-menu activities: single-word learning, the PECS sentence
//! book, differentiate (drag-match) and question/answer.
//!
//! Generators are pure functions of `(deck, parameters, seed)`. Evaluations
//! award one star per correct act and always explain a miss.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{Card, Category, Deck, Role};
use crate::grammar::{validate_strip, SentenceError, StripState};
use crate::learner::Phase;
use crate::rng::SplitMix64;

pub const MIN_OPTIONS: usize = 2;
pub const MAX_OPTIONS: usize = 6;
pub const QUESTION_OPTIONS: usize = 3;
pub const WANT_PROMPT: &str = "What do you want?";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Activity {
    SingleWord,
    PecsBook,
    Differentiate,
    Qa,
}

impl Activity {
    pub const ALL: [Activity; 4] = [
        Activity::SingleWord,
        Activity::PecsBook,
        Activity::Differentiate,
        Activity::Qa,
    ];

    /// Phase at which the activity unlocks. Lower-phase activities stay open.
    pub fn unlocked_at(self) -> Phase {
        match self {
            Activity::SingleWord => Phase::ONE,
            Activity::Differentiate => Phase::TWO,
            Activity::PecsBook => Phase::THREE,
            Activity::Qa => Phase::FOUR,
        }
    }

    pub fn is_unlocked(self, phase: Phase) -> bool {
        phase >= self.unlocked_at()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Activity::SingleWord => "SINGLE_WORD",
            Activity::PecsBook => "PECS_BOOK",
            Activity::Differentiate => "DIFFERENTIATE",
            Activity::Qa => "QA",
        }
    }
}

impl fmt::Display for Activity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ActivityError {
    #[error("not enough cards: need {needed} {what}, deck has {available}")]
    InsufficientCards {
        what: String,
        needed: usize,
        available: usize,
    },
    #[error("a task needs between {MIN_OPTIONS} and {MAX_OPTIONS} options, got {0}")]
    InvalidOptionCount(usize),
    #[error("card {0:?} is not one of the task's options")]
    ChoiceNotInOptions(String),
    #[error("answer index {0} is out of range")]
    IndexOutOfRange(usize),
    #[error(transparent)]
    Sentence(#[from] SentenceError),
}

impl ActivityError {
    pub fn code(&self) -> &'static str {
        match self {
            ActivityError::InsufficientCards { .. } => "InsufficientCards",
            ActivityError::InvalidOptionCount(_) => "InvalidOptionCount",
            ActivityError::ChoiceNotInOptions(_) => "ChoiceNotInOptions",
            ActivityError::IndexOutOfRange(_) => "IndexOutOfRange",
            ActivityError::Sentence(e) => e.code(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluationResult {
    pub correct: bool,
    pub stars_awarded: u8,
    pub feedback_text: String,
}

impl EvaluationResult {
    fn success(feedback: &str) -> EvaluationResult {
        EvaluationResult {
            correct: true,
            stars_awarded: 1,
            feedback_text: feedback.to_string(),
        }
    }

    fn miss(feedback: String) -> EvaluationResult {
        EvaluationResult {
            correct: false,
            stars_awarded: 0,
            feedback_text: feedback,
        }
    }
}

/// A drag-and-match round: find the target among cards from other categories.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscriminationTask {
    pub task_id: String,
    pub category: Category,
    pub target: String,
    pub target_word: String,
    pub options: Vec<String>,
    pub seed: u64,
}

pub fn gen_discrimination_task(
    deck: &Deck,
    target_category: Category,
    n_options: usize,
    seed: u64,
) -> Result<DiscriminationTask, ActivityError> {
    if !(MIN_OPTIONS..=MAX_OPTIONS).contains(&n_options) {
        return Err(ActivityError::InvalidOptionCount(n_options));
    }
    let targets: Vec<&Card> = deck
        .cards()
        .iter()
        .filter(|c| c.category == target_category)
        .collect();
    // Core function words have no picture to match against.
    let others: Vec<&Card> = deck
        .cards()
        .iter()
        .filter(|c| c.category != target_category && c.category != Category::Core)
        .collect();
    if targets.is_empty() {
        return Err(ActivityError::InsufficientCards {
            what: format!("{target_category} card"),
            needed: 1,
            available: 0,
        });
    }
    if others.len() < n_options - 1 {
        return Err(ActivityError::InsufficientCards {
            what: format!("picture cards outside {target_category}"),
            needed: n_options - 1,
            available: others.len(),
        });
    }

    let mut rng = SplitMix64::new(seed);
    let target = targets[rng.below(targets.len())];
    let mut options: Vec<String> = rng
        .sample(&others, n_options - 1)
        .into_iter()
        .map(|c| c.id.clone())
        .collect();
    options.push(target.id.clone());
    rng.shuffle(&mut options);

    Ok(DiscriminationTask {
        task_id: format!("differentiate:{target_category}:{n_options}:{seed}"),
        category: target_category,
        target: target.id.clone(),
        target_word: target.word.clone(),
        options,
        seed,
    })
}

pub fn evaluate_discrimination(task: &DiscriminationTask, chosen: &str) -> Result<EvaluationResult, ActivityError> {
    if !task.options.iter().any(|o| o == chosen) {
        return Err(ActivityError::ChoiceNotInOptions(chosen.to_string()));
    }
    if chosen == task.target {
        Ok(EvaluationResult::success("Great matching!"))
    } else {
        Ok(EvaluationResult::miss(format!("Try again — find the {}", task.target_word)))
    }
}

/// A three-option question. In phase four the prompt is "What do you want?"
/// shown with the picture of the wanted item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub question_id: String,
    pub phase: Phase,
    pub prompt_text: String,
    pub prompt_card: String,
    pub options: Vec<String>,
    pub correct_index: usize,
    pub answer_word: String,
    pub seed: u64,
}

pub fn gen_question(deck: &Deck, phase: Phase, seed: u64) -> Result<Question, ActivityError> {
    let pool: Vec<&Card> = deck
        .cards()
        .iter()
        .filter(|c| matches!(c.role, Role::Noun | Role::Action))
        .collect();
    if pool.len() < QUESTION_OPTIONS {
        return Err(ActivityError::InsufficientCards {
            what: "NOUN or ACTION cards".into(),
            needed: QUESTION_OPTIONS,
            available: pool.len(),
        });
    }

    let mut rng = SplitMix64::new(seed);
    let answer = pool[rng.below(pool.len())];
    let rest: Vec<&Card> = pool.iter().copied().filter(|c| c.id != answer.id).collect();
    let same: Vec<&Card> = rest.iter().copied().filter(|c| c.category == answer.category).collect();
    let different: Vec<&Card> = rest.iter().copied().filter(|c| c.category != answer.category).collect();
    // Early phases contrast unlike pictures; later phases ask for finer distinctions.
    let preferred = if phase >= Phase::THREE { &same } else { &different };
    let distractors = if preferred.len() >= QUESTION_OPTIONS - 1 {
        rng.sample(preferred, QUESTION_OPTIONS - 1)
    } else {
        rng.sample(&rest, QUESTION_OPTIONS - 1)
    };

    let mut options: Vec<String> = distractors.into_iter().map(|c| c.id.clone()).collect();
    options.push(answer.id.clone());
    rng.shuffle(&mut options);
    let correct_index = options.iter().position(|o| *o == answer.id).unwrap();

    let prompt_text = if phase == Phase::FOUR {
        WANT_PROMPT.to_string()
    } else {
        format!("Which one is the {}?", answer.word)
    };
    Ok(Question {
        question_id: format!("qa:{}:{seed}", phase.get()),
        phase,
        prompt_text,
        prompt_card: answer.id.clone(),
        options,
        correct_index,
        answer_word: answer.word.clone(),
        seed,
    })
}

pub fn evaluate_answer(question: &Question, chosen_index: usize) -> Result<EvaluationResult, ActivityError> {
    if chosen_index >= question.options.len() {
        return Err(ActivityError::IndexOutOfRange(chosen_index));
    }
    if chosen_index == question.correct_index {
        Ok(EvaluationResult::success("That's right!"))
    } else {
        Ok(EvaluationResult::miss(format!("Try again — find the {}", question.answer_word)))
    }
}

/// Scores a sentence built in the PECS book.
pub fn evaluate_strip_submission<S: AsRef<str>>(deck: &Deck, card_ids: &[S]) -> Result<EvaluationResult, ActivityError> {
    Ok(match validate_strip(deck, card_ids)? {
        StripState::Valid => EvaluationResult::success("Great sentence!"),
        StripState::Incomplete => EvaluationResult::miss("sentence not finished".into()),
        StripState::Invalid { position, .. } => EvaluationResult::miss(format!("Check card {}", position + 1)),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TapEvent {
    pub card_id: String,
    pub audio_ref: Option<String>,
    pub word: String,
}

/// Looks up what to play and show when a card is tapped.
pub fn record_single_word_tap(deck: &Deck, card_id: &str) -> Result<TapEvent, ActivityError> {
    let card = deck
        .get(card_id)
        .ok_or_else(|| SentenceError::UnknownCardId(card_id.to_string()))?;
    Ok(TapEvent {
        card_id: card.id.clone(),
        audio_ref: card.audio_ref.clone(),
        word: card.word.clone(),
    })
}
