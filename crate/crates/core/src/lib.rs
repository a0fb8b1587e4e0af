//! Engine for a picture-card (PECS) learning app.
//!
//! - [`catalog`]: cards, decks, the deck interchange format and the bundled deck.
//! - [`grammar`]: the sentence-strip grammar, strip text and audio order.
//! - [`prediction`]: the bigram picture-prediction ranker.
//! - [`activity`]: task generators and scoring for the four activities.
//! - [`learner`]: accounts, sessions, the attempt ledger, phases and reports.
//!
//! Everything here is deterministic given its inputs. Clocks, storage and
//! transport live in the service crate.

pub mod activity;
pub mod catalog;
pub mod grammar;
pub mod learner;
pub mod prediction;
pub mod rng;

pub use activity::{
    evaluate_answer, evaluate_discrimination, evaluate_strip_submission, gen_discrimination_task, gen_question,
    record_single_word_tap, Activity, ActivityError, DiscriminationTask, EvaluationResult, Question, TapEvent,
};
pub use catalog::{
    add_custom_card, export_deck, load_deck, query_cards, reference_deck, Card, CardFilter, CatalogError, Category,
    Deck, Role,
};
pub use grammar::{
    audio_sequence, render_strip_text, validate_strip, SentenceError, SentenceStrip, StripState, MAX_STRIP_LEN,
};
pub use learner::{
    AccountRole, ActivityAttempt, AdvancementRule, AttemptDraft, LearnerError, LearnerProfile, LearnerRegistry,
    Phase, ProgressReport, SessionTable, Settings, Theme, Timestamp,
};
pub use prediction::{predict_next, update_usage_model, Prediction, UsageModel};

// Book listings, compiled as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/cards.md")]
    mod cards {}
    #[doc = include_str!("../../../book/src/sentences.md")]
    mod sentences {}
    #[doc = include_str!("../../../book/src/prediction.md")]
    mod prediction {}
    #[doc = include_str!("../../../book/src/activities.md")]
    mod activities {}
    #[doc = include_str!("../../../book/src/progress.md")]
    mod progress {}
}
