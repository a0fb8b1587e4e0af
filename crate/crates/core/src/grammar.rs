//! Sentence-strip grammar for the PECS sentence book.
//!
//! Strips are checked against
//!
//! ```text
//! S  -> STARTER VERB NP | STARTER VERB ACTION
//! NP -> ADJECTIVE* NOUN [PREPOSITION NP]
//! ```
//!
//! with at most [`MAX_STRIP_LEN`] cards. The language is regular, so the
//! validator is a small state machine over card roles. A sequence is
//! `Incomplete` when it is a proper prefix of some valid sentence that fits in
//! the length cap, and `Invalid` at the first position where no such sentence
//! can continue.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{Card, Deck, Role};

pub const MAX_STRIP_LEN: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StripState {
    Incomplete,
    Valid,
    Invalid { position: usize, reason: String },
}

impl StripState {
    pub fn is_valid(&self) -> bool {
        matches!(self, StripState::Valid)
    }

    pub fn is_incomplete(&self) -> bool {
        matches!(self, StripState::Incomplete)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SentenceError {
    #[error("unknown card id {0:?}")]
    UnknownCardId(String),
    #[error("strip has {0} cards; at most {MAX_STRIP_LEN} are allowed")]
    StripTooLong(usize),
    #[error("prefix cannot be extended (it is {0:?})")]
    PrefixNotExtendable(StripState),
    #[error("only valid sentences can train the prediction model")]
    StripNotValid,
}

impl SentenceError {
    pub fn code(&self) -> &'static str {
        match self {
            SentenceError::UnknownCardId(_) => "UnknownCardId",
            SentenceError::StripTooLong(_) => "StripTooLong",
            SentenceError::PrefixNotExtendable(_) => "PrefixNotExtendable",
            SentenceError::StripNotValid => "StripNotValid",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Parse {
    Start,
    AfterStarter,
    AfterVerb,
    /// Inside a noun phrase, before its noun.
    InPhrase,
    AfterNoun,
    AfterAction,
}

impl Parse {
    fn step(self, role: Role) -> Option<Parse> {
        use Parse::*;
        use Role::*;
        match (self, role) {
            (Start, Starter) => Some(AfterStarter),
            (AfterStarter, Verb) => Some(AfterVerb),
            (AfterVerb, Action) => Some(AfterAction),
            (AfterVerb | InPhrase, Adjective) => Some(InPhrase),
            (AfterVerb | InPhrase, Noun) => Some(AfterNoun),
            (AfterNoun, Preposition) => Some(InPhrase),
            _ => None,
        }
    }

    fn accepting(self) -> bool {
        matches!(self, Parse::AfterNoun | Parse::AfterAction)
    }

    /// Fewest cards still needed to reach an accepting state.
    fn cards_to_finish(self) -> usize {
        match self {
            Parse::Start => 3,
            Parse::AfterStarter => 2,
            Parse::AfterVerb | Parse::InPhrase => 1,
            Parse::AfterNoun | Parse::AfterAction => 0,
        }
    }

    fn expected(self) -> &'static str {
        match self {
            Parse::Start => "a starter card such as \"I\"",
            Parse::AfterStarter => "a verb",
            Parse::AfterVerb => "an action, a describing word or a thing",
            Parse::InPhrase => "a describing word or a thing",
            Parse::AfterNoun => "a place word or the end of the sentence",
            Parse::AfterAction => "the end of the sentence",
        }
    }
}

/// Classifies a role sequence. Sequences longer than the cap are always
/// invalid at the first position past it.
pub fn classify_roles(roles: &[Role]) -> StripState {
    let mut state = Parse::Start;
    for (position, &role) in roles.iter().enumerate() {
        let next = match state.step(role) {
            Some(next) => next,
            None => {
                return StripState::Invalid {
                    position,
                    reason: format!("expected {}, found {}", state.expected(), role),
                }
            }
        };
        if position + 1 + next.cards_to_finish() > MAX_STRIP_LEN {
            return StripState::Invalid {
                position,
                reason: format!("a sentence can hold at most {MAX_STRIP_LEN} cards"),
            };
        }
        state = next;
    }
    if state.accepting() {
        StripState::Valid
    } else {
        StripState::Incomplete
    }
}

pub(crate) fn resolve<'d, S: AsRef<str>>(
    deck: &'d Deck,
    card_ids: &[S],
) -> Result<Vec<&'d Card>, SentenceError> {
    card_ids
        .iter()
        .map(|id| {
            deck.get(id.as_ref())
                .ok_or_else(|| SentenceError::UnknownCardId(id.as_ref().to_string()))
        })
        .collect()
}

/// Grammar verdict for a strip of card ids.
pub fn validate_strip<S: AsRef<str>>(deck: &Deck, card_ids: &[S]) -> Result<StripState, SentenceError> {
    let cards = resolve(deck, card_ids)?;
    if cards.len() > MAX_STRIP_LEN {
        return Err(SentenceError::StripTooLong(cards.len()));
    }
    let roles: Vec<Role> = cards.iter().map(|c| c.role).collect();
    Ok(classify_roles(&roles))
}

/// An ordered card sequence whose grammar state is always current.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SentenceStrip {
    card_ids: Vec<String>,
    state: StripState,
}

impl SentenceStrip {
    pub fn new<S: AsRef<str>>(deck: &Deck, card_ids: &[S]) -> Result<SentenceStrip, SentenceError> {
        let state = validate_strip(deck, card_ids)?;
        Ok(SentenceStrip {
            card_ids: card_ids.iter().map(|s| s.as_ref().to_string()).collect(),
            state,
        })
    }

    pub fn empty() -> SentenceStrip {
        SentenceStrip {
            card_ids: Vec::new(),
            state: StripState::Incomplete,
        }
    }

    pub fn card_ids(&self) -> &[String] {
        &self.card_ids
    }

    pub fn state(&self) -> &StripState {
        &self.state
    }

    pub fn len(&self) -> usize {
        self.card_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.card_ids.is_empty()
    }

    /// Places a card at the end of the strip.
    pub fn push(&mut self, deck: &Deck, card_id: &str) -> Result<&StripState, SentenceError> {
        if !deck.contains(card_id) {
            return Err(SentenceError::UnknownCardId(card_id.to_string()));
        }
        if self.card_ids.len() == MAX_STRIP_LEN {
            return Err(SentenceError::StripTooLong(MAX_STRIP_LEN + 1));
        }
        self.card_ids.push(card_id.to_string());
        self.state = validate_strip(deck, &self.card_ids)?;
        Ok(&self.state)
    }

    /// Takes the card at `index` off the strip.
    pub fn remove(&mut self, deck: &Deck, index: usize) -> Result<Option<String>, SentenceError> {
        if index >= self.card_ids.len() {
            return Ok(None);
        }
        let removed = self.card_ids.remove(index);
        self.state = validate_strip(deck, &self.card_ids)?;
        Ok(Some(removed))
    }
}

/// Card words joined by single spaces, whatever the strip's state.
pub fn render_strip_text(deck: &Deck, strip: &SentenceStrip) -> Result<String, SentenceError> {
    render_ids_text(deck, strip.card_ids())
}

pub fn render_ids_text<S: AsRef<str>>(deck: &Deck, card_ids: &[S]) -> Result<String, SentenceError> {
    let words: Vec<&str> = resolve(deck, card_ids)?.iter().map(|c| c.word.as_str()).collect();
    Ok(words.join(" "))
}

/// Audio cues to play for the strip, in order, skipping silent cards.
pub fn audio_sequence(deck: &Deck, strip: &SentenceStrip) -> Result<Vec<String>, SentenceError> {
    audio_sequence_ids(deck, strip.card_ids())
}

pub fn audio_sequence_ids<S: AsRef<str>>(deck: &Deck, card_ids: &[S]) -> Result<Vec<String>, SentenceError> {
    Ok(resolve(deck, card_ids)?
        .into_iter()
        .filter_map(|c| c.audio_ref.clone())
        .collect())
}
