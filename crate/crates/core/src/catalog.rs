//! Picture-card vocabulary: cards, decks and the deck interchange format.
//!
//! A deck document is UTF-8 JSON:
//!
//! ```json
//! {"format_version":1,"cards":[{"id":"apple","word":"apple","category":"Fruits",
//!   "role":"NOUN","picture":"pictures/fruits/apple.png","audio":"audio/apple.ogg"}]}
//! ```
//!
//! [`export_deck`] always writes the canonical form: two-space pretty printing,
//! cards in deck order, card keys in the order `id, word, category, role,
//! picture, audio`, and a trailing newline. A card without an audio cue is
//! written with `"audio": null`.

use std::collections::HashMap;
use std::fmt;
use std::path::{Component, Path};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Deck format versions this build reads and writes.
pub const FORMAT_VERSION: u32 = 1;

const REFERENCE_DECK: &str = include_str!("../data/reference_deck.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    Animals,
    Food,
    Colours,
    Shapes,
    Fruits,
    Emotions,
    Motions,
    Vegetables,
    Core,
}

impl Category {
    pub const ALL: [Category; 9] = [
        Category::Animals,
        Category::Food,
        Category::Colours,
        Category::Shapes,
        Category::Fruits,
        Category::Emotions,
        Category::Motions,
        Category::Vegetables,
        Category::Core,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Animals => "Animals",
            Category::Food => "Food",
            Category::Colours => "Colours",
            Category::Shapes => "Shapes",
            Category::Fruits => "Fruits",
            Category::Emotions => "Emotions",
            Category::Motions => "Motions",
            Category::Vegetables => "Vegetables",
            Category::Core => "Core",
        }
    }

    pub fn parse(s: &str) -> Option<Category> {
        Category::ALL.into_iter().find(|c| c.as_str() == s)
    }

    /// Grammatical roles a card of this category may carry.
    ///
    /// Nouns: Animals, Food, Fruits, Vegetables, Shapes. Adjectives: Colours,
    /// Emotions. Actions: Motions. Core holds the function words.
    pub fn allowed_roles(self) -> &'static [Role] {
        match self {
            Category::Animals
            | Category::Food
            | Category::Fruits
            | Category::Vegetables
            | Category::Shapes => &[Role::Noun],
            Category::Colours | Category::Emotions => &[Role::Adjective],
            Category::Motions => &[Role::Action],
            Category::Core => &[Role::Starter, Role::Verb, Role::Preposition],
        }
    }

    pub fn allows(self, role: Role) -> bool {
        self.allowed_roles().contains(&role)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Role {
    Starter,
    Verb,
    Action,
    Adjective,
    Noun,
    Preposition,
}

impl Role {
    pub const ALL: [Role; 6] = [
        Role::Starter,
        Role::Verb,
        Role::Action,
        Role::Adjective,
        Role::Noun,
        Role::Preposition,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Starter => "STARTER",
            Role::Verb => "VERB",
            Role::Action => "ACTION",
            Role::Adjective => "ADJECTIVE",
            Role::Noun => "NOUN",
            Role::Preposition => "PREPOSITION",
        }
    }

    pub fn parse(s: &str) -> Option<Role> {
        Role::ALL.into_iter().find(|r| r.as_str() == s)
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One picture card.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Card {
    pub id: String,
    pub word: String,
    pub category: Category,
    pub role: Role,
    #[serde(rename = "picture")]
    pub picture_ref: String,
    /// Cards without a cue are tappable but silent.
    #[serde(rename = "audio")]
    pub audio_ref: Option<String>,
}

impl Card {
    pub fn new(
        id: impl Into<String>,
        word: impl Into<String>,
        category: Category,
        role: Role,
        picture_ref: impl Into<String>,
        audio_ref: Option<String>,
    ) -> Card {
        Card {
            id: id.into(),
            word: word.into(),
            category,
            role,
            picture_ref: picture_ref.into(),
            audio_ref,
        }
    }

    /// Checks the per-card invariants (everything except deck-level uniqueness).
    pub fn validate(&self) -> Result<(), CatalogError> {
        if self.id.trim().is_empty() {
            return Err(CatalogError::InvalidCard {
                card_id: self.id.clone(),
                reason: "id is empty".into(),
            });
        }
        if self.word.trim().is_empty() {
            return Err(CatalogError::InvalidCard {
                card_id: self.id.clone(),
                reason: "word is empty".into(),
            });
        }
        if !self.category.allows(self.role) {
            return Err(CatalogError::RoleCategoryMismatch {
                card_id: self.id.clone(),
                category: self.category,
                role: self.role,
            });
        }
        check_asset_path(&self.id, "picture", &self.picture_ref)?;
        if let Some(audio) = &self.audio_ref {
            check_asset_path(&self.id, "audio", audio)?;
        }
        Ok(())
    }
}

fn check_asset_path(card_id: &str, field: &str, path: &str) -> Result<(), CatalogError> {
    let bad = |reason: &str| CatalogError::InvalidCard {
        card_id: card_id.to_string(),
        reason: format!("{field} path {path:?} {reason}"),
    };
    if path.is_empty() {
        return Err(bad("is empty"));
    }
    if path.contains('\\') || path.contains(':') {
        return Err(bad("must use forward slashes and no drive prefix"));
    }
    for component in Path::new(path).components() {
        match component {
            Component::Normal(_) | Component::CurDir => {}
            Component::ParentDir => return Err(bad("must not traverse to a parent directory")),
            Component::RootDir | Component::Prefix(_) => return Err(bad("must be relative")),
        }
    }
    Ok(())
}

/// True for a non-empty relative path that stays inside its root.
pub fn is_safe_asset_path(path: &str) -> bool {
    check_asset_path("", "", path).is_ok()
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CatalogError {
    #[error("malformed deck document: {0}")]
    MalformedDocument(String),
    #[error("deck format version {0} is not supported")]
    VersionUnsupported(u64),
    #[error("duplicate card id {0:?}")]
    DuplicateCardId(String),
    #[error("card {card_id:?}: unknown category {category:?}")]
    UnknownCategory { card_id: String, category: String },
    #[error("card {card_id:?}: unknown role {role:?}")]
    UnknownRole { card_id: String, role: String },
    #[error("card {card_id:?}: role {role} is not allowed in category {category}")]
    RoleCategoryMismatch {
        card_id: String,
        category: Category,
        role: Role,
    },
    #[error("card {card_id:?}: {reason}")]
    InvalidCard { card_id: String, reason: String },
}

impl CatalogError {
    /// Stable machine-readable name.
    pub fn code(&self) -> &'static str {
        match self {
            CatalogError::MalformedDocument(_) => "MalformedDocument",
            CatalogError::VersionUnsupported(_) => "VersionUnsupported",
            CatalogError::DuplicateCardId(_) => "DuplicateCardId",
            CatalogError::UnknownCategory { .. } => "UnknownCategory",
            CatalogError::UnknownRole { .. } => "UnknownRole",
            CatalogError::RoleCategoryMismatch { .. } => "RoleCategoryMismatch",
            CatalogError::InvalidCard { .. } => "InvalidCard",
        }
    }
}

/// An ordered, immutable set of cards with pairwise distinct ids.
#[derive(Debug, Clone)]
pub struct Deck {
    format_version: u32,
    cards: Vec<Card>,
    index: HashMap<String, usize>,
}

impl PartialEq for Deck {
    fn eq(&self, other: &Self) -> bool {
        self.format_version == other.format_version && self.cards == other.cards
    }
}

impl Eq for Deck {}

impl Deck {
    pub fn empty() -> Deck {
        Deck {
            format_version: FORMAT_VERSION,
            cards: Vec::new(),
            index: HashMap::new(),
        }
    }

    /// Builds a deck from cards, checking every invariant.
    pub fn from_cards(cards: Vec<Card>) -> Result<Deck, CatalogError> {
        let mut deck = Deck::empty();
        for card in cards {
            deck.push(card)?;
        }
        Ok(deck)
    }

    fn push(&mut self, card: Card) -> Result<(), CatalogError> {
        card.validate()?;
        if self.index.contains_key(&card.id) {
            return Err(CatalogError::DuplicateCardId(card.id));
        }
        self.index.insert(card.id.clone(), self.cards.len());
        self.cards.push(card);
        Ok(())
    }

    pub fn format_version(&self) -> u32 {
        self.format_version
    }

    pub fn cards(&self) -> &[Card] {
        &self.cards
    }

    pub fn len(&self) -> usize {
        self.cards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cards.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Card> {
        self.index.get(id).map(|&i| &self.cards[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    /// True when the deck can back sentence-building: at least one STARTER
    /// and one VERB card.
    pub fn supports_sentences(&self) -> bool {
        let has = |role| self.cards.iter().any(|c| c.role == role);
        has(Role::Starter) && has(Role::Verb)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDocument {
    format_version: u64,
    cards: Vec<RawCard>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCard {
    id: String,
    word: String,
    category: String,
    role: String,
    picture: String,
    #[serde(default)]
    audio: Option<String>,
}

#[derive(Serialize)]
struct DocumentOut<'a> {
    format_version: u32,
    cards: &'a [Card],
}

impl RawCard {
    fn into_card(self) -> Result<Card, CatalogError> {
        let category = Category::parse(&self.category).ok_or_else(|| CatalogError::UnknownCategory {
            card_id: self.id.clone(),
            category: self.category.clone(),
        })?;
        let role = Role::parse(&self.role).ok_or_else(|| CatalogError::UnknownRole {
            card_id: self.id.clone(),
            role: self.role.clone(),
        })?;
        let card = Card {
            id: self.id,
            word: self.word,
            category,
            role,
            picture_ref: self.picture,
            audio_ref: self.audio,
        };
        card.validate()?;
        Ok(card)
    }
}

impl RawDocument {
    fn into_deck(self) -> Result<Deck, CatalogError> {
        if self.format_version == 0 {
            return Err(CatalogError::MalformedDocument(
                "format_version must be a positive integer".into(),
            ));
        }
        if self.format_version != u64::from(FORMAT_VERSION) {
            return Err(CatalogError::VersionUnsupported(self.format_version));
        }
        let mut deck = Deck::empty();
        for raw in self.cards {
            deck.push(raw.into_card()?)?;
        }
        Ok(deck)
    }
}

/// Parses and validates a deck interchange document.
pub fn load_deck(document: &str) -> Result<Deck, CatalogError> {
    let raw: RawDocument = serde_json::from_str(document)
        .map_err(|e| CatalogError::MalformedDocument(e.to_string()))?;
    raw.into_deck()
}

/// Parses one card object in interchange form.
pub fn parse_card(value: serde_json::Value) -> Result<Card, CatalogError> {
    let raw: RawCard =
        serde_json::from_value(value).map_err(|e| CatalogError::MalformedDocument(e.to_string()))?;
    raw.into_card()
}

impl Serialize for Deck {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        DocumentOut {
            format_version: self.format_version,
            cards: &self.cards,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Deck {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Deck, D::Error> {
        RawDocument::deserialize(deserializer)?
            .into_deck()
            .map_err(serde::de::Error::custom)
    }
}

/// Writes the canonical interchange form of `deck`.
pub fn export_deck(deck: &Deck) -> String {
    let mut out = serde_json::to_string_pretty(deck).expect("deck serialization cannot fail");
    out.push('\n');
    out
}

/// Returns a new deck with `card` appended; `deck` itself is left untouched.
pub fn add_custom_card(deck: &Deck, card: Card) -> Result<Deck, CatalogError> {
    let mut next = deck.clone();
    next.push(card)?;
    Ok(next)
}

/// Card filter used by the category browsing screens.
///
/// A filter built from an unrecognised category or role name matches nothing.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CardFilter {
    category: Option<Option<Category>>,
    role: Option<Option<Role>>,
}

impl CardFilter {
    pub fn all() -> CardFilter {
        CardFilter::default()
    }

    pub fn category(mut self, category: Category) -> CardFilter {
        self.category = Some(Some(category));
        self
    }

    pub fn role(mut self, role: Role) -> CardFilter {
        self.role = Some(Some(role));
        self
    }

    /// Builds a filter from query-string style names.
    pub fn from_names(category: Option<&str>, role: Option<&str>) -> CardFilter {
        CardFilter {
            category: category.map(Category::parse),
            role: role.map(Role::parse),
        }
    }

    pub fn matches(&self, card: &Card) -> bool {
        let category_ok = match self.category {
            None => true,
            Some(wanted) => wanted == Some(card.category),
        };
        let role_ok = match self.role {
            None => true,
            Some(wanted) => wanted == Some(card.role),
        };
        category_ok && role_ok
    }
}

/// Cards matching every supplied filter, in deck order.
pub fn query_cards<'d>(deck: &'d Deck, filter: &CardFilter) -> Vec<&'d Card> {
    deck.cards.iter().filter(|c| filter.matches(c)).collect()
}

/// The bundled deck: eight picture categories of five cards each plus the
/// core function words `I`, `want`, `like`, `see`, `in`, `on`, `with`.
pub fn reference_deck() -> Deck {
    load_deck(REFERENCE_DECK).expect("bundled reference deck is valid")
}

/// Canonical text of the bundled deck, exactly as shipped.
pub fn reference_deck_document() -> &'static str {
    REFERENCE_DECK
}

#[cfg(test)]
mod tests {
    use super::*;

    fn card(id: &str, category: Category, role: Role) -> Card {
        Card::new(
            id,
            id,
            category,
            role,
            format!("pictures/{id}.png"),
            Some(format!("audio/{id}.ogg")),
        )
    }

    const MINIMAL: &str = r#"{"format_version":1,"cards":[
        {"id":"i","word":"I","category":"Core","role":"STARTER","picture":"p/i.png","audio":"a/i.ogg"},
        {"id":"want","word":"want","category":"Core","role":"VERB","picture":"p/want.png","audio":"a/want.ogg"},
        {"id":"apple","word":"apple","category":"Fruits","role":"NOUN","picture":"p/apple.png","audio":"a/apple.ogg"}]}"#;

    #[test]
    fn minimal_deck_loads() {
        let deck = load_deck(MINIMAL).unwrap();
        assert_eq!(deck.len(), 3);
        assert!(deck.supports_sentences());
        assert_eq!(deck.get("want").unwrap().role, Role::Verb);
    }

    #[test]
    fn duplicate_id_is_rejected() {
        let doc = r#"{"format_version":1,"cards":[
            {"id":"apple","word":"apple","category":"Fruits","role":"NOUN","picture":"a.png","audio":null},
            {"id":"apple","word":"red apple","category":"Fruits","role":"NOUN","picture":"b.png","audio":null}]}"#;
        assert_eq!(
            load_deck(doc).unwrap_err(),
            CatalogError::DuplicateCardId("apple".into())
        );
    }

    #[test]
    fn unknown_category_and_role_name_the_card() {
        let doc = r#"{"format_version":1,"cards":[
            {"id":"zebra","word":"zebra","category":"Planets","role":"NOUN","picture":"z.png"}]}"#;
        match load_deck(doc).unwrap_err() {
            CatalogError::UnknownCategory { card_id, .. } => assert_eq!(card_id, "zebra"),
            other => panic!("unexpected {other:?}"),
        }
        let doc = r#"{"format_version":1,"cards":[
            {"id":"zebra","word":"zebra","category":"Animals","role":"THING","picture":"z.png"}]}"#;
        assert_eq!(load_deck(doc).unwrap_err().code(), "UnknownRole");
    }

    #[test]
    fn role_category_mismatch_names_the_card() {
        let doc = r#"{"format_version":1,"cards":[
            {"id":"red","word":"red","category":"Colours","role":"NOUN","picture":"r.png"}]}"#;
        assert_eq!(
            load_deck(doc).unwrap_err(),
            CatalogError::RoleCategoryMismatch {
                card_id: "red".into(),
                category: Category::Colours,
                role: Role::Noun
            }
        );
    }

    #[test]
    fn malformed_and_versioning() {
        assert_eq!(load_deck("{").unwrap_err().code(), "MalformedDocument");
        assert_eq!(
            load_deck(r#"{"format_version":1}"#).unwrap_err().code(),
            "MalformedDocument"
        );
        assert_eq!(
            load_deck(r#"{"format_version":0,"cards":[]}"#).unwrap_err().code(),
            "MalformedDocument"
        );
        assert_eq!(
            load_deck(r#"{"format_version":2,"cards":[]}"#).unwrap_err(),
            CatalogError::VersionUnsupported(2)
        );
        assert_eq!(
            load_deck(r#"{"format_version":1,"cards":[],"extra":true}"#)
                .unwrap_err()
                .code(),
            "MalformedDocument"
        );
    }

    #[test]
    fn asset_paths_must_be_relative() {
        for bad in ["/etc/passwd", "../secret.png", "pictures/../../x.png", "C:\\x.png", ""] {
            let mut c = card("cat", Category::Animals, Role::Noun);
            c.picture_ref = bad.to_string();
            assert_eq!(c.validate().unwrap_err().code(), "InvalidCard", "{bad}");
        }
        let mut c = card("cat", Category::Animals, Role::Noun);
        c.audio_ref = Some("/abs.ogg".into());
        assert!(c.validate().is_err());
        c.audio_ref = None;
        assert!(c.validate().is_ok());
    }

    #[test]
    fn empty_id_or_word_rejected() {
        let mut c = card("cat", Category::Animals, Role::Noun);
        c.word = " ".into();
        assert!(c.validate().is_err());
        let c = card("", Category::Animals, Role::Noun);
        assert!(c.validate().is_err());
    }

    #[test]
    fn reference_deck_shape() {
        let deck = reference_deck();
        assert!(deck.len() >= 38);
        assert_eq!(deck.len(), 47);
        for category in Category::ALL {
            if category == Category::Core {
                continue;
            }
            let n = query_cards(&deck, &CardFilter::all().category(category)).len();
            assert!(n >= 4, "{category} has {n} cards");
        }
        let mut pairs: Vec<_> = deck.cards().iter().map(|c| (c.word.clone(), c.category)).collect();
        pairs.sort();
        pairs.dedup();
        assert_eq!(pairs.len(), deck.len());
        assert!(deck.supports_sentences());
    }

    #[test]
    fn reference_deck_is_canonical() {
        assert_eq!(export_deck(&reference_deck()), reference_deck_document());
    }

    #[test]
    fn query_examples() {
        let deck = reference_deck();
        let fruits: Vec<_> = query_cards(&deck, &CardFilter::all().category(Category::Fruits))
            .into_iter()
            .map(|c| c.id.as_str())
            .collect();
        assert!(fruits.contains(&"apple") && fruits.contains(&"orange"));

        let starters: Vec<_> = query_cards(&deck, &CardFilter::all().role(Role::Starter))
            .into_iter()
            .map(|c| c.word.as_str())
            .collect();
        assert_eq!(starters, ["I"]);

        let all = query_cards(&deck, &CardFilter::all());
        assert_eq!(all.len(), deck.len());
        assert!(all.iter().zip(deck.cards()).all(|(a, b)| a.id == b.id));

        assert!(query_cards(&deck, &CardFilter::from_names(Some("Planets"), None)).is_empty());
        assert!(query_cards(&deck, &CardFilter::from_names(None, Some("THING"))).is_empty());
        assert_eq!(
            query_cards(&deck, &CardFilter::from_names(Some("Motions"), Some("ACTION"))).len(),
            5
        );
    }

    #[test]
    fn custom_cards() {
        let deck = reference_deck();
        let mango = Card::new("mango", "mango", Category::Fruits, Role::Noun, "pictures/mango.png", None);
        let bigger = add_custom_card(&deck, mango).unwrap();
        assert_eq!(bigger.len(), deck.len() + 1);
        assert_eq!(deck.len(), 47);
        assert_eq!(bigger.cards().last().unwrap().id, "mango");

        let dup = card("apple", Category::Fruits, Role::Noun);
        assert_eq!(
            add_custom_card(&deck, dup).unwrap_err(),
            CatalogError::DuplicateCardId("apple".into())
        );

        let run = card("run", Category::Motions, Role::Noun);
        assert_eq!(add_custom_card(&deck, run).unwrap_err().code(), "RoleCategoryMismatch");

        let doc = export_deck(&bigger);
        assert!(doc.trim_end().ends_with("\"audio\": null\n    }\n  ]\n}"));
    }

    #[test]
    fn empty_deck_export() {
        let doc = export_deck(&Deck::empty());
        assert_eq!(doc, "{\n  \"format_version\": 1,\n  \"cards\": []\n}\n");
        assert_eq!(load_deck(&doc).unwrap(), Deck::empty());
    }

    #[test]
    fn canonical_form_reorders_keys_and_fills_audio() {
        let doc = r#"{"cards":[{"role":"NOUN","audio":"a.ogg","word":"cat","id":"cat","picture":"c.png","category":"Animals"},
                               {"id":"dog","word":"dog","category":"Animals","role":"NOUN","picture":"d.png"}],
                      "format_version":1}"#;
        let out = export_deck(&load_deck(doc).unwrap());
        let expected = "{\n  \"format_version\": 1,\n  \"cards\": [\n    {\n      \"id\": \"cat\",\n      \"word\": \"cat\",\n      \"category\": \"Animals\",\n      \"role\": \"NOUN\",\n      \"picture\": \"c.png\",\n      \"audio\": \"a.ogg\"\n    },\n    {\n      \"id\": \"dog\",\n      \"word\": \"dog\",\n      \"category\": \"Animals\",\n      \"role\": \"NOUN\",\n      \"picture\": \"d.png\",\n      \"audio\": null\n    }\n  ]\n}\n";
        assert_eq!(out, expected);
        assert_eq!(export_deck(&load_deck(&out).unwrap()), out);
    }
}
