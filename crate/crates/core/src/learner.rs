//! Accounts, sessions, the attempt ledger and PECS phase progression.
//!
//! A learner moves from phase `p` to `p + 1` once they have made at least
//! [`AdvancementRule::min_attempts`] attempts at the phase's gate activity
//! since entering it, and the most recent [`AdvancementRule::window`] of those
//! reach [`AdvancementRule::min_accuracy`]. Phase four is terminal. Phases
//! only move backwards through [`LearnerRegistry::reset_phase`].
//!
//! All times are UTC milliseconds supplied by the caller. Each learner's
//! events get strictly increasing timestamps even when the clock stalls.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use pbkdf2::pbkdf2_hmac;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::Sha256;
use thiserror::Error;

use crate::activity::Activity;
use crate::catalog::Category;

pub type Timestamp = u64;

pub const MIN_PASSWORD_LEN: usize = 8;
pub const DEFAULT_KDF_ROUNDS: u32 = 100_000;
pub const SESSION_TTL_MS: u64 = 12 * 60 * 60 * 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Phase(u8);

impl Phase {
    pub const ONE: Phase = Phase(1);
    pub const TWO: Phase = Phase(2);
    pub const THREE: Phase = Phase(3);
    pub const FOUR: Phase = Phase(4);

    pub fn new(n: u8) -> Option<Phase> {
        (1..=4).contains(&n).then_some(Phase(n))
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn next(self) -> Option<Phase> {
        Phase::new(self.0 + 1)
    }

    /// Activity whose accuracy opens the next phase.
    pub fn gate_activity(self) -> Option<Activity> {
        match self.0 {
            1 => Some(Activity::SingleWord),
            2 => Some(Activity::Differentiate),
            3 => Some(Activity::PecsBook),
            _ => None,
        }
    }
}

impl TryFrom<u8> for Phase {
    type Error = String;

    fn try_from(n: u8) -> Result<Phase, String> {
        Phase::new(n).ok_or_else(|| format!("phase must be 1-4, got {n}"))
    }
}

impl From<Phase> for u8 {
    fn from(p: Phase) -> u8 {
        p.0
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AccountRole {
    Child,
    Therapist,
    Parent,
}

impl AccountRole {
    pub fn is_adult(self) -> bool {
        !matches!(self, AccountRole::Child)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Theme {
    Light,
    Dark,
    HighContrast,
}

impl Theme {
    pub fn parse(s: &str) -> Result<Theme, LearnerError> {
        match s {
            "LIGHT" => Ok(Theme::Light),
            "DARK" => Ok(Theme::Dark),
            "HIGH_CONTRAST" => Ok(Theme::HighContrast),
            other => Err(LearnerError::UnknownTheme(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Settings {
    pub background_theme: Theme,
}

impl Default for Settings {
    fn default() -> Settings {
        Settings {
            background_theme: Theme::Light,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseEntry {
    pub phase: Phase,
    pub entered_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearnerProfile {
    pub learner_id: String,
    pub username: String,
    pub password_digest: String,
    pub account_role: AccountRole,
    pub demographics: BTreeMap<String, String>,
    pub current_phase: Phase,
    pub settings: Settings,
    pub created_at: Timestamp,
    pub phase_history: Vec<PhaseEntry>,
    /// For a child: the adults allowed to follow them.
    #[serde(default)]
    pub linked_adults: BTreeSet<String>,
}

impl LearnerProfile {
    fn phase_entered_at(&self) -> Timestamp {
        self.phase_history.last().map_or(self.created_at, |e| e.entered_at)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityAttempt {
    pub attempt_id: String,
    pub learner_id: String,
    pub activity: Activity,
    /// Category credited with any star earned.
    pub category: Option<Category>,
    pub prompt_descriptor: serde_json::Value,
    pub response: serde_json::Value,
    pub correct: bool,
    pub stars_awarded: u8,
    pub timestamp: Timestamp,
}

/// An attempt before the ledger assigns its id and timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct AttemptDraft {
    pub activity: Activity,
    pub category: Option<Category>,
    pub prompt_descriptor: serde_json::Value,
    pub response: serde_json::Value,
    pub correct: bool,
    pub stars_awarded: u8,
}

impl AttemptDraft {
    /// Taps have nothing to get wrong and earn no stars; everything else earns
    /// exactly one star when correct.
    pub fn is_consistent(&self) -> bool {
        match self.activity {
            Activity::SingleWord => self.correct && self.stars_awarded == 0,
            _ => self.stars_awarded == u8::from(self.correct),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivityTally {
    pub attempts: u64,
    pub correct: u64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressReport {
    pub learner_id: String,
    pub current_phase: Phase,
    pub star_total: u64,
    pub per_activity: BTreeMap<Activity, ActivityTally>,
    pub per_category_stars: BTreeMap<Category, u64>,
    pub phase_history: Vec<PhaseEntry>,
}

impl ProgressReport {
    /// Recomputes a report from raw ledger entries.
    pub fn from_ledger(profile: &LearnerProfile, ledger: &[ActivityAttempt]) -> ProgressReport {
        let mut per_activity = BTreeMap::new();
        for activity in Activity::ALL {
            let (attempts, correct) = ledger
                .iter()
                .filter(|a| a.activity == activity)
                .fold((0u64, 0u64), |(n, c), a| (n + 1, c + u64::from(a.correct)));
            let accuracy = if attempts == 0 { 0.0 } else { correct as f64 / attempts as f64 };
            per_activity.insert(activity, ActivityTally { attempts, correct, accuracy });
        }
        let mut per_category_stars: BTreeMap<Category, u64> = Category::ALL.iter().map(|&c| (c, 0)).collect();
        for attempt in ledger {
            if let Some(category) = attempt.category {
                *per_category_stars.entry(category).or_insert(0) += u64::from(attempt.stars_awarded);
            }
        }
        ProgressReport {
            learner_id: profile.learner_id.clone(),
            current_phase: profile.current_phase,
            star_total: ledger.iter().map(|a| u64::from(a.stars_awarded)).sum(),
            per_activity,
            per_category_stars,
            phase_history: profile.phase_history.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Advancement {
    pub advanced: bool,
    pub new_phase: Phase,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttemptOutcome {
    pub attempt: ActivityAttempt,
    pub advancement: Advancement,
    pub report: ProgressReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdvancementRule {
    pub min_attempts: usize,
    pub window: usize,
    pub min_accuracy: f64,
}

impl Default for AdvancementRule {
    fn default() -> AdvancementRule {
        AdvancementRule {
            min_attempts: 10,
            window: 10,
            min_accuracy: 0.8,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LearnerError {
    #[error("username {0:?} is already taken")]
    UsernameTaken(String),
    #[error("username must not be empty")]
    InvalidUsername,
    #[error("password must be at least {MIN_PASSWORD_LEN} characters")]
    WeakPassword,
    #[error("authentication failed")]
    AuthFailed,
    #[error("session expired")]
    TokenExpired,
    #[error("unknown learner {0:?}")]
    UnknownLearner(String),
    #[error("attempt is inconsistent: stars must match correctness")]
    InconsistentAttempt,
    #[error("{activity} unlocks at phase {required}; learner is at phase {current}")]
    ActivityLocked {
        activity: Activity,
        required: Phase,
        current: Phase,
    },
    #[error("unknown theme {0:?}")]
    UnknownTheme(String),
    #[error("only a child account can be linked to an adult account")]
    InvalidLink,
}

impl LearnerError {
    pub fn code(&self) -> &'static str {
        match self {
            LearnerError::UsernameTaken(_) => "UsernameTaken",
            LearnerError::InvalidUsername => "InvalidUsername",
            LearnerError::WeakPassword => "WeakPassword",
            LearnerError::AuthFailed => "AuthFailed",
            LearnerError::TokenExpired => "TokenExpired",
            LearnerError::UnknownLearner(_) => "UnknownLearner",
            LearnerError::InconsistentAttempt => "InconsistentAttempt",
            LearnerError::ActivityLocked { .. } => "ActivityLocked",
            LearnerError::UnknownTheme(_) => "UnknownTheme",
            LearnerError::InvalidLink => "InvalidLink",
        }
    }
}

const DIGEST_SCHEME: &str = "pbkdf2-sha256";

/// Salted PBKDF2-HMAC-SHA256, encoded as `pbkdf2-sha256$<rounds>$<salt>$<hash>`.
pub fn hash_password(password: &str, rounds: u32) -> String {
    let mut salt = [0u8; 16];
    rand::rng().fill_bytes(&mut salt);
    let mut out = [0u8; 32];
    pbkdf2_hmac::<Sha256>(password.as_bytes(), &salt, rounds, &mut out);
    format!("{DIGEST_SCHEME}${rounds}${}${}", hex::encode(salt), hex::encode(out))
}

pub fn verify_password(digest: &str, password: &str) -> bool {
    let parts: Vec<&str> = digest.split('$').collect();
    let [scheme, rounds, salt, expected] = parts[..] else {
        return false;
    };
    let (Ok(rounds), Ok(salt), Ok(expected)) = (rounds.parse::<u32>(), hex::decode(salt), hex::decode(expected)) else {
        return false;
    };
    if scheme != DIGEST_SCHEME || expected.len() != 32 {
        return false;
    }
    let mut out = [0u8; 32];
    pbkdf2_hmac::<Sha256>(password.as_bytes(), &salt, rounds, &mut out);
    out.iter().zip(&expected).fold(0u8, |acc, (a, b)| acc | (a ^ b)) == 0
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Session {
    pub token: String,
    pub learner_id: String,
    pub expires_at: Timestamp,
}

/// Live login sessions. Not persisted: a restart logs everyone out.
#[derive(Debug, Default)]
pub struct SessionTable {
    sessions: HashMap<String, Session>,
    ttl_ms: u64,
}

impl SessionTable {
    pub fn new(ttl_ms: u64) -> SessionTable {
        SessionTable {
            sessions: HashMap::new(),
            ttl_ms,
        }
    }

    fn open(&mut self, learner_id: &str, now: Timestamp) -> Session {
        let mut bytes = [0u8; 32];
        rand::rng().fill_bytes(&mut bytes);
        let session = Session {
            token: hex::encode(bytes),
            learner_id: learner_id.to_string(),
            expires_at: now + self.ttl_ms,
        };
        self.sessions.insert(session.token.clone(), session.clone());
        session
    }

    /// The learner behind `token`. Expired sessions are dropped.
    pub fn validate(&mut self, token: &str, now: Timestamp) -> Result<String, LearnerError> {
        match self.sessions.get(token) {
            None => Err(LearnerError::AuthFailed),
            Some(s) if now >= s.expires_at => {
                self.sessions.remove(token);
                Err(LearnerError::TokenExpired)
            }
            Some(s) => Ok(s.learner_id.clone()),
        }
    }

    pub fn logout(&mut self, token: &str) -> bool {
        self.sessions.remove(token).is_some()
    }
}

/// Every account and its attempt ledger.
#[derive(Debug, Clone)]
pub struct LearnerRegistry {
    profiles: BTreeMap<String, LearnerProfile>,
    ledgers: BTreeMap<String, Vec<ActivityAttempt>>,
    usernames: HashMap<String, String>,
    rule: AdvancementRule,
    kdf_rounds: u32,
    dummy_digest: String,
}

impl Default for LearnerRegistry {
    fn default() -> LearnerRegistry {
        LearnerRegistry::new(AdvancementRule::default(), DEFAULT_KDF_ROUNDS)
    }
}

impl LearnerRegistry {
    pub fn new(rule: AdvancementRule, kdf_rounds: u32) -> LearnerRegistry {
        LearnerRegistry {
            profiles: BTreeMap::new(),
            ledgers: BTreeMap::new(),
            usernames: HashMap::new(),
            rule,
            kdf_rounds,
            dummy_digest: hash_password("not a real account", kdf_rounds),
        }
    }

    /// Rebuilds a registry from persisted profiles and ledgers.
    pub fn from_parts(
        profiles: BTreeMap<String, LearnerProfile>,
        mut ledgers: BTreeMap<String, Vec<ActivityAttempt>>,
        rule: AdvancementRule,
        kdf_rounds: u32,
    ) -> LearnerRegistry {
        let mut registry = LearnerRegistry::new(rule, kdf_rounds);
        for (id, profile) in profiles {
            registry.usernames.insert(profile.username.clone(), id.clone());
            registry.ledgers.insert(id.clone(), ledgers.remove(&id).unwrap_or_default());
            registry.profiles.insert(id, profile);
        }
        registry
    }

    pub fn profiles(&self) -> &BTreeMap<String, LearnerProfile> {
        &self.profiles
    }

    pub fn ledgers(&self) -> &BTreeMap<String, Vec<ActivityAttempt>> {
        &self.ledgers
    }

    pub fn rule(&self) -> AdvancementRule {
        self.rule
    }

    pub fn profile(&self, learner_id: &str) -> Result<&LearnerProfile, LearnerError> {
        self.profiles
            .get(learner_id)
            .ok_or_else(|| LearnerError::UnknownLearner(learner_id.to_string()))
    }

    pub fn ledger(&self, learner_id: &str) -> Result<&[ActivityAttempt], LearnerError> {
        self.profile(learner_id)?;
        Ok(self.ledgers.get(learner_id).map_or(&[], |l| l.as_slice()))
    }

    pub fn find_by_username(&self, username: &str) -> Option<&LearnerProfile> {
        self.usernames.get(username).and_then(|id| self.profiles.get(id))
    }

    fn profile_mut(&mut self, learner_id: &str) -> Result<&mut LearnerProfile, LearnerError> {
        self.profiles
            .get_mut(learner_id)
            .ok_or_else(|| LearnerError::UnknownLearner(learner_id.to_string()))
    }

    /// Next timestamp for a learner's event: `now`, or one past their latest event.
    fn next_timestamp(&self, learner_id: &str, now: Timestamp) -> Timestamp {
        let profile = &self.profiles[learner_id];
        let last_attempt = self
            .ledgers
            .get(learner_id)
            .and_then(|l| l.last())
            .map_or(0, |a| a.timestamp);
        let high = profile.created_at.max(profile.phase_entered_at()).max(last_attempt);
        now.max(high + 1)
    }

    pub fn register(
        &mut self,
        username: &str,
        password: &str,
        account_role: AccountRole,
        demographics: BTreeMap<String, String>,
        now: Timestamp,
    ) -> Result<&LearnerProfile, LearnerError> {
        let username = username.trim();
        if username.is_empty() {
            return Err(LearnerError::InvalidUsername);
        }
        if self.usernames.contains_key(username) {
            return Err(LearnerError::UsernameTaken(username.to_string()));
        }
        if password.chars().count() < MIN_PASSWORD_LEN {
            return Err(LearnerError::WeakPassword);
        }
        let learner_id = format!("learner-{}", self.profiles.len() + 1);
        let profile = LearnerProfile {
            learner_id: learner_id.clone(),
            username: username.to_string(),
            password_digest: hash_password(password, self.kdf_rounds),
            account_role,
            demographics,
            current_phase: Phase::ONE,
            settings: Settings::default(),
            created_at: now,
            phase_history: vec![PhaseEntry {
                phase: Phase::ONE,
                entered_at: now,
            }],
            linked_adults: BTreeSet::new(),
        };
        self.usernames.insert(username.to_string(), learner_id.clone());
        self.ledgers.insert(learner_id.clone(), Vec::new());
        Ok(self.profiles.entry(learner_id).or_insert(profile))
    }

    /// Checks credentials and opens a session. Unknown users and wrong
    /// passwords fail identically, and take the same work to reject.
    pub fn authenticate(
        &self,
        sessions: &mut SessionTable,
        username: &str,
        password: &str,
        now: Timestamp,
    ) -> Result<Session, LearnerError> {
        match self.find_by_username(username.trim()) {
            Some(profile) if verify_password(&profile.password_digest, password) => {
                Ok(sessions.open(&profile.learner_id, now))
            }
            Some(_) => Err(LearnerError::AuthFailed),
            None => {
                verify_password(&self.dummy_digest, password);
                Err(LearnerError::AuthFailed)
            }
        }
    }

    /// Appends an attempt to the learner's ledger and runs the phase check.
    pub fn record_attempt(
        &mut self,
        learner_id: &str,
        draft: AttemptDraft,
        now: Timestamp,
    ) -> Result<AttemptOutcome, LearnerError> {
        let phase = self.profile(learner_id)?.current_phase;
        if !draft.is_consistent() {
            return Err(LearnerError::InconsistentAttempt);
        }
        if !draft.activity.is_unlocked(phase) {
            return Err(LearnerError::ActivityLocked {
                activity: draft.activity,
                required: draft.activity.unlocked_at(),
                current: phase,
            });
        }
        let timestamp = self.next_timestamp(learner_id, now);
        let ledger = self.ledgers.entry(learner_id.to_string()).or_default();
        let attempt = ActivityAttempt {
            attempt_id: format!("{learner_id}-a{}", ledger.len() + 1),
            learner_id: learner_id.to_string(),
            activity: draft.activity,
            category: draft.category,
            prompt_descriptor: draft.prompt_descriptor,
            response: draft.response,
            correct: draft.correct,
            stars_awarded: draft.stars_awarded,
            timestamp,
        };
        ledger.push(attempt.clone());
        let advancement = self.check_phase_advancement_at(learner_id, timestamp)?;
        Ok(AttemptOutcome {
            attempt,
            advancement,
            report: self.progress_chart(learner_id)?,
        })
    }

    pub fn check_phase_advancement(&mut self, learner_id: &str, now: Timestamp) -> Result<Advancement, LearnerError> {
        self.profile(learner_id)?;
        let ts = self.next_timestamp(learner_id, now);
        self.check_phase_advancement_at(learner_id, ts)
    }

    fn check_phase_advancement_at(&mut self, learner_id: &str, entered_at: Timestamp) -> Result<Advancement, LearnerError> {
        let profile = self.profile(learner_id)?;
        let phase = profile.current_phase;
        let stay = Advancement {
            advanced: false,
            new_phase: phase,
        };
        let (Some(gate), Some(next)) = (phase.gate_activity(), phase.next()) else {
            return Ok(stay);
        };
        let since = profile.phase_entered_at();
        let gate_attempts: Vec<&ActivityAttempt> = self.ledgers[learner_id]
            .iter()
            .filter(|a| a.activity == gate && a.timestamp > since)
            .collect();
        let rule = self.rule;
        if rule.window == 0 || gate_attempts.len() < rule.min_attempts.max(rule.window) {
            return Ok(stay);
        }
        let recent = &gate_attempts[gate_attempts.len() - rule.window..];
        let correct = recent.iter().filter(|a| a.correct).count();
        if (correct as f64) / (rule.window as f64) < rule.min_accuracy {
            return Ok(stay);
        }
        let profile = self.profile_mut(learner_id)?;
        profile.current_phase = next;
        profile.phase_history.push(PhaseEntry { phase: next, entered_at });
        Ok(Advancement {
            advanced: true,
            new_phase: next,
        })
    }

    /// Explicit therapist reset. History keeps only the phases below the
    /// target, so it stays strictly increasing.
    pub fn reset_phase(&mut self, learner_id: &str, phase: Phase, now: Timestamp) -> Result<&LearnerProfile, LearnerError> {
        self.profile(learner_id)?;
        let ts = self.next_timestamp(learner_id, now);
        let profile = self.profile_mut(learner_id)?;
        profile.phase_history.retain(|e| e.phase < phase);
        profile.phase_history.push(PhaseEntry { phase, entered_at: ts });
        profile.current_phase = phase;
        Ok(profile)
    }

    pub fn progress_chart(&self, learner_id: &str) -> Result<ProgressReport, LearnerError> {
        let profile = self.profile(learner_id)?;
        Ok(ProgressReport::from_ledger(profile, self.ledger(learner_id)?))
    }

    pub fn update_settings(&mut self, learner_id: &str, settings: Settings) -> Result<&LearnerProfile, LearnerError> {
        let profile = self.profile_mut(learner_id)?;
        profile.settings = settings;
        Ok(profile)
    }

    /// Lets `adult_id` follow and message `child_id`.
    pub fn link(&mut self, child_id: &str, adult_id: &str) -> Result<(), LearnerError> {
        let adult = self.profile(adult_id)?;
        let child = self.profile(child_id)?;
        if child.account_role != AccountRole::Child || !adult.account_role.is_adult() {
            return Err(LearnerError::InvalidLink);
        }
        self.profile_mut(child_id)?.linked_adults.insert(adult_id.to_string());
        Ok(())
    }

    /// Whether `viewer` may see `learner_id`'s progress and settings.
    pub fn can_view(&self, viewer: &str, learner_id: &str) -> bool {
        viewer == learner_id
            || self
                .profiles
                .get(learner_id)
                .is_some_and(|p| p.linked_adults.contains(viewer))
    }

    /// Child and linked adult, or two adults linked to the same child.
    pub fn can_message(&self, a: &str, b: &str) -> bool {
        if a == b || !self.profiles.contains_key(a) || !self.profiles.contains_key(b) {
            return false;
        }
        if self.can_view(a, b) || self.can_view(b, a) {
            return true;
        }
        self.profiles
            .values()
            .any(|p| p.linked_adults.contains(a) && p.linked_adults.contains(b))
    }
}
