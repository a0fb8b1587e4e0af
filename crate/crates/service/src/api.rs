//! Transport-independent request handling.
//!
//! [`Service::handle_request`] takes a method, a path with query string,
//! headers and a body, and returns a status with a JSON (or asset) body. The
//! axum server in [`crate::server`] is a thin adapter over it, and tests drive
//! it directly.

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};

use pecs_core::catalog::parse_card;
use pecs_core::grammar::{audio_sequence_ids, render_ids_text};
use pecs_core::learner::{ActivityAttempt, LearnerProfile, SESSION_TTL_MS};
use pecs_core::{
    add_custom_card, evaluate_answer, evaluate_discrimination, evaluate_strip_submission, gen_discrimination_task,
    gen_question, predict_next, query_cards, record_single_word_tap, update_usage_model, AccountRole, Activity,
    ActivityError, AdvancementRule, AttemptDraft, CardFilter, CatalogError, Category, Deck, EvaluationResult,
    LearnerError, Phase, Question, SentenceError, SentenceStrip, SessionTable, Settings, Theme, Timestamp,
    UsageModel,
};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::clock::Clock;
use crate::messaging::{list_messages, send_message, MessageError};
use crate::store::{FileStore, State, StoreError, REFERENCE_DECK_ID};

pub const DEFAULT_PREDICTION_K: usize = 5;
const RATE_WINDOW_MS: u64 = 60_000;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub kdf_rounds: u32,
    pub session_ttl_ms: u64,
    pub rule: AdvancementRule,
    /// Requests allowed per token in each one-minute window.
    pub request_cap_per_minute: u32,
    /// Directory served under `/assets/`.
    pub assets_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> ServiceConfig {
        ServiceConfig {
            kdf_rounds: pecs_core::learner::DEFAULT_KDF_ROUNDS,
            session_ttl_ms: SESSION_TTL_MS,
            rule: AdvancementRule::default(),
            request_cap_per_minute: 600,
            assets_dir: None,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Request {
    pub method: String,
    /// Path including any query string.
    pub path: String,
    pub headers: Vec<(String, String)>,
    pub body: Vec<u8>,
}

impl Request {
    pub fn new(method: &str, path: &str) -> Request {
        Request {
            method: method.to_string(),
            path: path.to_string(),
            ..Request::default()
        }
    }

    pub fn bearer(mut self, token: &str) -> Request {
        self.headers.push(("Authorization".into(), format!("Bearer {token}")));
        self
    }

    pub fn json(mut self, body: &Value) -> Request {
        self.headers.push(("Content-Type".into(), "application/json".into()));
        self.body = serde_json::to_vec(body).expect("json body");
        self
    }

    fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Body {
    Json(Value),
    Bytes { content_type: &'static str, data: Vec<u8> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Response {
    pub status: u16,
    pub body: Body,
}

impl Response {
    fn ok(body: Value) -> Response {
        Response {
            status: 200,
            body: Body::Json(body),
        }
    }

    fn created(body: Value) -> Response {
        Response {
            status: 201,
            body: Body::Json(body),
        }
    }

    /// The JSON body, or `null` for asset responses.
    pub fn json(&self) -> &Value {
        match &self.body {
            Body::Json(v) => v,
            Body::Bytes { .. } => &Value::Null,
        }
    }

    /// The machine-readable error code, if this is an error response.
    pub fn error_code(&self) -> Option<&str> {
        self.json().get("error").and_then(Value::as_str)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: u16,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: u16, code: &'static str, message: impl Into<String>) -> ApiError {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    fn malformed(message: impl Into<String>) -> ApiError {
        ApiError::new(400, "MalformedRequest", message)
    }

    fn forbidden(viewer: &str, learner: &str) -> ApiError {
        ApiError::new(403, "NotLinked", format!("{viewer:?} may not act for {learner:?}"))
    }

    fn into_response(self) -> Response {
        Response {
            status: self.status,
            body: Body::Json(json!({"error": self.code, "message": self.message})),
        }
    }
}

impl From<LearnerError> for ApiError {
    fn from(e: LearnerError) -> ApiError {
        let status = match e {
            LearnerError::UsernameTaken(_) => 409,
            LearnerError::AuthFailed | LearnerError::TokenExpired => 401,
            LearnerError::UnknownLearner(_) => 404,
            LearnerError::ActivityLocked { .. } => 403,
            LearnerError::InvalidUsername
            | LearnerError::WeakPassword
            | LearnerError::InconsistentAttempt
            | LearnerError::UnknownTheme(_)
            | LearnerError::InvalidLink => 400,
        };
        ApiError::new(status, e.code(), e.to_string())
    }
}

impl From<CatalogError> for ApiError {
    fn from(e: CatalogError) -> ApiError {
        let status = if matches!(e, CatalogError::DuplicateCardId(_)) { 409 } else { 400 };
        ApiError::new(status, e.code(), e.to_string())
    }
}

impl From<ActivityError> for ApiError {
    fn from(e: ActivityError) -> ApiError {
        ApiError::new(400, e.code(), e.to_string())
    }
}

impl From<SentenceError> for ApiError {
    fn from(e: SentenceError) -> ApiError {
        ApiError::new(400, e.code(), e.to_string())
    }
}

impl From<MessageError> for ApiError {
    fn from(e: MessageError) -> ApiError {
        let status = if matches!(e, MessageError::NotLinked(..)) { 403 } else { 400 };
        ApiError::new(status, e.code(), e.to_string())
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> ApiError {
        ApiError::new(500, e.code(), e.to_string())
    }
}

type ApiResult = Result<Response, ApiError>;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Route {
    Register,
    Login,
    Logout,
    Decks,
    Deck(String),
    Cards,
    AddCard,
    ValidateStrip,
    Predict,
    Differentiate,
    Qa,
    Attempts,
    Progress(String),
    Profile(String),
    Settings(String),
    SendMessage,
    ListMessages,
    Links,
    Asset(String),
}

fn route(method: &str, path: &str) -> Result<Route, ApiError> {
    if let Some(found) = match_route(method, path) {
        return Ok(found);
    }
    // Same path under another method is a 405, anything else a 404.
    if ["GET", "POST", "PUT"].iter().any(|m| match_route(m, path).is_some()) {
        Err(ApiError::new(405, "MethodNotAllowed", format!("{method} is not supported on {path}")))
    } else {
        Err(ApiError::new(404, "NotFound", format!("no route for {path}")))
    }
}

fn match_route(method: &str, path: &str) -> Option<Route> {
    let segments: Vec<&str> = path.trim_matches('/').split('/').collect();
    let found = match (method, segments.as_slice()) {
        ("POST", ["register"]) => Route::Register,
        ("POST", ["login"]) => Route::Login,
        ("POST", ["logout"]) => Route::Logout,
        ("GET", ["decks"]) => Route::Decks,
        ("GET", ["decks", id]) => Route::Deck(id.to_string()),
        ("GET", ["cards"]) => Route::Cards,
        ("POST", ["cards"]) => Route::AddCard,
        ("POST", ["strips", "validate"]) => Route::ValidateStrip,
        ("GET", ["predict"]) => Route::Predict,
        ("POST", ["tasks", "differentiate"]) => Route::Differentiate,
        ("POST", ["tasks", "qa"]) => Route::Qa,
        ("POST", ["attempts"]) => Route::Attempts,
        ("GET", ["progress", id]) => Route::Progress(id.to_string()),
        ("GET", ["profile", id]) => Route::Profile(id.to_string()),
        ("PUT", ["settings", id]) => Route::Settings(id.to_string()),
        ("POST", ["messages"]) => Route::SendMessage,
        ("GET", ["messages"]) => Route::ListMessages,
        ("POST", ["links"]) => Route::Links,
        ("GET", ["assets", rest @ ..]) if !rest.is_empty() => Route::Asset(rest.join("/")),
        _ => return None,
    };
    Some(found)
}

fn parse_body<T: DeserializeOwned>(req: &Request) -> Result<T, ApiError> {
    let bytes: &[u8] = if req.body.is_empty() { b"{}" } else { &req.body };
    serde_json::from_slice(bytes).map_err(|e| ApiError::malformed(format!("invalid JSON body: {e}")))
}

fn query_map(query: &str) -> HashMap<String, String> {
    url::form_urlencoded::parse(query.as_bytes()).into_owned().collect()
}

fn parse_query_num<T: std::str::FromStr>(query: &HashMap<String, String>, key: &str) -> Result<Option<T>, ApiError> {
    match query.get(key) {
        None => Ok(None),
        Some(s) if s.is_empty() => Ok(None),
        Some(s) => s
            .parse()
            .map(Some)
            .map_err(|_| ApiError::malformed(format!("query parameter {key} is not a number"))),
    }
}

fn parse_category(name: &str) -> Result<Category, ApiError> {
    Category::parse(name).ok_or_else(|| ApiError::new(400, "UnknownCategory", format!("unknown category {name:?}")))
}

fn parse_phase(n: u8) -> Result<Phase, ApiError> {
    Phase::new(n).ok_or_else(|| ApiError::new(400, "InvalidPhase", format!("phase must be 1-4, got {n}")))
}

/// Seeds chosen by the server stay below 2^53 so JavaScript clients can echo them back.
fn fresh_seed() -> u64 {
    rand::random::<u64>() >> 11
}

/// A profile as shown over the wire: everything except the password digest.
pub fn profile_view(profile: &LearnerProfile) -> Value {
    let mut v = serde_json::to_value(profile).expect("profile serializes");
    if let Some(map) = v.as_object_mut() {
        map.remove("password_digest");
    }
    v
}

/// A question as shown to the learner, without its answer.
pub fn question_view(q: &Question) -> Value {
    json!({
        "question_id": q.question_id,
        "phase": q.phase,
        "prompt_text": q.prompt_text,
        "prompt_card": q.prompt_card,
        "options": q.options,
        "seed": q.seed,
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RegisterBody {
    username: String,
    password: String,
    #[serde(default = "child_role")]
    account_role: AccountRole,
    #[serde(default)]
    demographics: BTreeMap<String, String>,
}

fn child_role() -> AccountRole {
    AccountRole::Child
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LoginBody {
    username: String,
    password: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AddCardBody {
    deck_id: Option<String>,
    card: Value,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StripBody {
    deck_id: Option<String>,
    card_ids: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DifferentiateBody {
    deck_id: Option<String>,
    category: String,
    n_options: usize,
    seed: Option<u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct QaBody {
    deck_id: Option<String>,
    learner_id: Option<String>,
    phase: Option<u8>,
    seed: Option<u64>,
}

#[derive(Deserialize)]
struct AttemptBody {
    learner_id: Option<String>,
    deck_id: Option<String>,
    #[serde(flatten)]
    kind: AttemptKind,
}

/// What the learner did. The server regenerates the task from its seed and
/// scores the response itself.
#[derive(Deserialize)]
#[serde(tag = "activity", rename_all = "SCREAMING_SNAKE_CASE")]
enum AttemptKind {
    SingleWord {
        card_id: String,
    },
    PecsBook {
        card_ids: Vec<String>,
    },
    Differentiate {
        category: String,
        n_options: usize,
        seed: u64,
        chosen: String,
    },
    Qa {
        phase: Option<u8>,
        seed: u64,
        chosen_index: usize,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SettingsBody {
    background_theme: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MessageBody {
    to_learner_id: String,
    body: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkBody {
    adult_id: String,
}

struct Inner {
    state: State,
    sessions: SessionTable,
    /// token -> (window start, requests in window)
    request_counts: HashMap<String, (Timestamp, u32)>,
}

struct Caller {
    learner_id: String,
    token: String,
}

pub struct Service {
    inner: Mutex<Inner>,
    clock: Arc<dyn Clock>,
    store: Option<FileStore>,
    config: ServiceConfig,
}

impl Service {
    /// An in-memory service.
    pub fn new(state: State, clock: Arc<dyn Clock>, config: ServiceConfig) -> Service {
        Service::build(state, clock, None, config)
    }

    /// A service backed by a store file, created on first write if missing.
    pub fn open(store: FileStore, clock: Arc<dyn Clock>, config: ServiceConfig) -> Result<Service, StoreError> {
        let state = store.load_or_init(config.rule, config.kdf_rounds)?;
        Ok(Service::build(state, clock, Some(store), config))
    }

    fn build(state: State, clock: Arc<dyn Clock>, store: Option<FileStore>, config: ServiceConfig) -> Service {
        Service {
            inner: Mutex::new(Inner {
                state,
                sessions: SessionTable::new(config.session_ttl_ms),
                request_counts: HashMap::new(),
            }),
            clock,
            store,
            config,
        }
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// A copy of the current state.
    pub fn state(&self) -> State {
        self.lock().state.clone()
    }

    pub fn handle_request(&self, req: &Request) -> Response {
        self.dispatch(req).unwrap_or_else(ApiError::into_response)
    }

    fn dispatch(&self, req: &Request) -> ApiResult {
        let (path, query) = req.path.split_once('?').unwrap_or((req.path.as_str(), ""));
        let method = req.method.to_ascii_uppercase();
        let route = route(&method, path)?;
        let query = query_map(query);

        match &route {
            Route::Asset(rel) => return self.asset(rel),
            Route::Register => return self.register(req),
            Route::Login => return self.login(req),
            _ => {}
        }

        let mut inner = self.lock();
        let now = self.clock.now_ms();
        let caller = self.authorize(&mut inner, req, now)?;
        let me = caller.learner_id.as_str();
        match route {
            Route::Logout => {
                inner.sessions.logout(&caller.token);
                inner.request_counts.remove(&caller.token);
                Ok(Response::ok(json!({"logged_out": true})))
            }
            Route::Decks => Ok(Response::ok(decks_summary(&inner.state))),
            Route::Deck(id) => Ok(Response::ok(serde_json::to_value(deck(&inner.state, Some(&id))?).unwrap())),
            Route::Cards => cards(&inner.state, &query),
            Route::AddCard => self.add_card(&mut inner, req),
            Route::ValidateStrip => validate(&inner.state, req),
            Route::Predict => predict(&inner.state, me, &query),
            Route::Differentiate => differentiate(&inner.state, req),
            Route::Qa => qa(&inner.state, me, req),
            Route::Attempts => self.attempt(&mut inner, me, req, now),
            Route::Progress(id) => {
                let learner = viewable(&inner.state, me, &id)?;
                Ok(Response::ok(serde_json::to_value(inner.state.learners.progress_chart(&learner)?).unwrap()))
            }
            Route::Profile(id) => {
                let learner = viewable(&inner.state, me, &id)?;
                Ok(Response::ok(profile_view(inner.state.learners.profile(&learner)?)))
            }
            Route::Settings(id) => self.settings(&mut inner, me, &id, req),
            Route::SendMessage => self.send(&mut inner, me, req, now),
            Route::ListMessages => {
                let peer = query
                    .get("peer")
                    .ok_or_else(|| ApiError::malformed("query parameter peer is required"))?;
                let since = parse_query_num::<u64>(&query, "since")?;
                let listed = list_messages(&inner.state.messages, &inner.state.learners, me, peer, since)?;
                Ok(Response::ok(json!({ "messages": listed })))
            }
            Route::Links => self.link(&mut inner, me, req),
            Route::Register | Route::Login | Route::Asset(_) => unreachable!("handled before authentication"),
        }
    }

    fn authorize(&self, inner: &mut Inner, req: &Request, now: Timestamp) -> Result<Caller, ApiError> {
        let token = req
            .header("authorization")
            .and_then(|h| h.strip_prefix("Bearer "))
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .ok_or_else(|| ApiError::new(401, "AuthFailed", "missing bearer token"))?;
        let learner_id = match inner.sessions.validate(token, now) {
            Ok(id) => id,
            Err(e) => {
                inner.request_counts.remove(token);
                return Err(e.into());
            }
        };
        let cap = self.config.request_cap_per_minute;
        let entry = inner.request_counts.entry(token.to_string()).or_insert((now, 0));
        if now.saturating_sub(entry.0) >= RATE_WINDOW_MS {
            *entry = (now, 0);
        }
        if entry.1 >= cap {
            return Err(ApiError::new(429, "RateLimited", format!("more than {cap} requests in a minute")));
        }
        entry.1 += 1;
        Ok(Caller {
            learner_id,
            token: token.to_string(),
        })
    }

    /// Applies `change` and persists the result. On any failure the state is
    /// left exactly as it was.
    fn commit<T>(
        &self,
        inner: &mut Inner,
        change: impl FnOnce(&mut State) -> Result<(T, Vec<ActivityAttempt>), ApiError>,
    ) -> Result<T, ApiError> {
        let backup = inner.state.clone();
        let (out, attempts) = match change(&mut inner.state) {
            Ok(done) => done,
            Err(e) => {
                inner.state = backup;
                return Err(e);
            }
        };
        if let Some(store) = &self.store {
            if let Err(e) = store.save(&inner.state) {
                inner.state = backup;
                return Err(e.into());
            }
            // The snapshot already holds these; the log is only an audit trail.
            if let Err(e) = store.append_attempts(&attempts) {
                eprintln!("pecs: could not append to attempt log: {e}");
            }
        }
        Ok(out)
    }

    fn register(&self, req: &Request) -> ApiResult {
        let body: RegisterBody = parse_body(req)?;
        let mut inner = self.lock();
        let now = self.clock.now_ms();
        let profile = self.commit(&mut inner, |state| {
            let p = state
                .learners
                .register(&body.username, &body.password, body.account_role, body.demographics, now)?;
            Ok((profile_view(p), Vec::new()))
        })?;
        Ok(Response::created(profile))
    }

    fn login(&self, req: &Request) -> ApiResult {
        let body: LoginBody = parse_body(req)?;
        let mut inner = self.lock();
        let now = self.clock.now_ms();
        let Inner { state, sessions, .. } = &mut *inner;
        let session = state.learners.authenticate(sessions, &body.username, &body.password, now)?;
        Ok(Response::ok(serde_json::to_value(session).unwrap()))
    }

    fn add_card(&self, inner: &mut Inner, req: &Request) -> ApiResult {
        let body: AddCardBody = parse_body(req)?;
        let deck_id = body.deck_id.unwrap_or_else(|| REFERENCE_DECK_ID.to_string());
        let card = parse_card(body.card)?;
        let out = self.commit(inner, |state| {
            let current = deck(state, Some(&deck_id))?;
            let next = add_custom_card(current, card.clone())?;
            let count = next.len();
            state.decks.insert(deck_id.clone(), next);
            Ok((json!({"deck_id": deck_id, "card": card, "card_count": count}), Vec::new()))
        })?;
        Ok(Response::created(out))
    }

    fn attempt(&self, inner: &mut Inner, me: &str, req: &Request, now: Timestamp) -> ApiResult {
        let body: AttemptBody = parse_body(req)?;
        let learner = actor(&inner.state, me, body.learner_id.as_deref())?;
        let deck_id = body.deck_id.unwrap_or_else(|| REFERENCE_DECK_ID.to_string());
        let out = self.commit(inner, |state| run_attempt(state, &learner, &deck_id, body.kind, now))?;
        Ok(Response::ok(out))
    }

    fn settings(&self, inner: &mut Inner, me: &str, id: &str, req: &Request) -> ApiResult {
        let learner = viewable(&inner.state, me, id)?;
        let body: SettingsBody = parse_body(req)?;
        let theme = Theme::parse(&body.background_theme)?;
        let out = self.commit(inner, |state| {
            let p = state.learners.update_settings(&learner, Settings { background_theme: theme })?;
            Ok((profile_view(p), Vec::new()))
        })?;
        Ok(Response::ok(out))
    }

    fn send(&self, inner: &mut Inner, me: &str, req: &Request, now: Timestamp) -> ApiResult {
        let body: MessageBody = parse_body(req)?;
        let out = self.commit(inner, |state| {
            let m = send_message(&mut state.messages, &state.learners, me, &body.to_learner_id, &body.body, now)?;
            Ok((serde_json::to_value(m).unwrap(), Vec::new()))
        })?;
        Ok(Response::created(out))
    }

    fn link(&self, inner: &mut Inner, me: &str, req: &Request) -> ApiResult {
        let body: LinkBody = parse_body(req)?;
        let out = self.commit(inner, |state| {
            state.learners.link(me, &body.adult_id)?;
            Ok((json!({"child_id": me, "adult_id": body.adult_id}), Vec::new()))
        })?;
        Ok(Response::ok(out))
    }

    fn asset(&self, rel: &str) -> ApiResult {
        let not_found = || ApiError::new(404, "UnknownAsset", format!("no asset {rel:?}"));
        let root = self.config.assets_dir.as_ref().ok_or_else(not_found)?;
        if !pecs_core::catalog::is_safe_asset_path(rel) {
            return Err(not_found());
        }
        let data = std::fs::read(root.join(rel)).map_err(|_| not_found())?;
        let content_type = match rel.rsplit('.').next().unwrap_or("") {
            "png" => "image/png",
            "jpg" | "jpeg" => "image/jpeg",
            "svg" => "image/svg+xml",
            "ogg" => "audio/ogg",
            "mp3" => "audio/mpeg",
            "wav" => "audio/wav",
            _ => "application/octet-stream",
        };
        Ok(Response {
            status: 200,
            body: Body::Bytes { content_type, data },
        })
    }
}

fn deck<'s>(state: &'s State, id: Option<&str>) -> Result<&'s Deck, ApiError> {
    let id = id.filter(|s| !s.is_empty()).unwrap_or(REFERENCE_DECK_ID);
    state
        .decks
        .get(id)
        .ok_or_else(|| ApiError::new(404, "UnknownDeck", format!("unknown deck {id:?}")))
}

/// The learner `me` is acting for: themself, or a child they are linked to.
fn actor(state: &State, me: &str, requested: Option<&str>) -> Result<String, ApiError> {
    match requested {
        None => Ok(me.to_string()),
        Some(id) => viewable(state, me, id),
    }
}

fn viewable(state: &State, me: &str, id: &str) -> Result<String, ApiError> {
    state.learners.profile(id)?;
    if state.learners.can_view(me, id) {
        Ok(id.to_string())
    } else {
        Err(ApiError::forbidden(me, id))
    }
}

fn decks_summary(state: &State) -> Value {
    let decks: Vec<Value> = state
        .decks
        .iter()
        .map(|(id, d)| {
            json!({
                "deck_id": id,
                "format_version": d.format_version(),
                "card_count": d.len(),
                "supports_sentences": d.supports_sentences(),
            })
        })
        .collect();
    json!({ "decks": decks })
}

fn cards(state: &State, query: &HashMap<String, String>) -> ApiResult {
    let d = deck(state, query.get("deck_id").map(String::as_str))?;
    let nonempty = |k: &str| query.get(k).map(String::as_str).filter(|s| !s.is_empty());
    let filter = CardFilter::from_names(nonempty("category"), nonempty("role"));
    Ok(Response::ok(json!({ "cards": query_cards(d, &filter) })))
}

fn validate(state: &State, req: &Request) -> ApiResult {
    let body: StripBody = parse_body(req)?;
    let d = deck(state, body.deck_id.as_deref())?;
    let strip_state = pecs_core::validate_strip(d, &body.card_ids)?;
    let mut out = serde_json::to_value(&strip_state).unwrap();
    out["text"] = json!(render_ids_text(d, &body.card_ids)?);
    out["audio"] = json!(audio_sequence_ids(d, &body.card_ids)?);
    Ok(Response::ok(out))
}

fn predict(state: &State, me: &str, query: &HashMap<String, String>) -> ApiResult {
    let d = deck(state, query.get("deck_id").map(String::as_str))?;
    let learner = actor(state, me, query.get("learner_id").map(String::as_str))?;
    let prefix: Vec<&str> = query
        .get("prefix")
        .map(|p| p.split(',').map(str::trim).filter(|s| !s.is_empty()).collect())
        .unwrap_or_default();
    let k = parse_query_num::<usize>(query, "k")?.unwrap_or(DEFAULT_PREDICTION_K);
    let empty = UsageModel::new();
    let model = state.usage_models.get(&learner).unwrap_or(&empty);
    let predictions = predict_next(d, &prefix, model, k)?;
    Ok(Response::ok(json!({ "predictions": predictions })))
}

fn differentiate(state: &State, req: &Request) -> ApiResult {
    let body: DifferentiateBody = parse_body(req)?;
    let d = deck(state, body.deck_id.as_deref())?;
    let category = parse_category(&body.category)?;
    let seed = body.seed.unwrap_or_else(fresh_seed);
    let task = gen_discrimination_task(d, category, body.n_options, seed)?;
    Ok(Response::ok(serde_json::to_value(task).unwrap()))
}

fn qa(state: &State, me: &str, req: &Request) -> ApiResult {
    let body: QaBody = parse_body(req)?;
    let d = deck(state, body.deck_id.as_deref())?;
    let learner = actor(state, me, body.learner_id.as_deref())?;
    let phase = match body.phase {
        Some(n) => parse_phase(n)?,
        None => state.learners.profile(&learner)?.current_phase,
    };
    let seed = body.seed.unwrap_or_else(fresh_seed);
    Ok(Response::ok(question_view(&gen_question(d, phase, seed)?)))
}

/// Scores one attempt and appends it to `learner`'s ledger.
///
/// A Q&A answer to a question the learner already got wrong is a retry: it is
/// scored for feedback but earns no star and is not recorded.
fn run_attempt(
    state: &mut State,
    learner: &str,
    deck_id: &str,
    kind: AttemptKind,
    now: Timestamp,
) -> Result<(Value, Vec<ActivityAttempt>), ApiError> {
    let d = deck(state, Some(deck_id))?.clone();
    let mut extra = serde_json::Map::new();
    let (activity, category, prompt, response, evaluation, valid_strip) = match kind {
        AttemptKind::SingleWord { card_id } => {
            let tap = record_single_word_tap(&d, &card_id)?;
            let category = d.get(&card_id).map(|c| c.category);
            extra.insert("tap".into(), serde_json::to_value(&tap).unwrap());
            let evaluation = EvaluationResult {
                correct: true,
                stars_awarded: 0,
                feedback_text: tap.word.clone(),
            };
            let prompt = json!({"deck_id": deck_id, "card_id": card_id});
            (Activity::SingleWord, category, prompt, json!({"tapped": card_id}), evaluation, None)
        }
        AttemptKind::PecsBook { card_ids } => {
            let evaluation = evaluate_strip_submission(&d, &card_ids)?;
            let category = card_ids.last().and_then(|id| d.get(id)).map(|c| c.category);
            let strip = evaluation.correct.then(|| SentenceStrip::new(&d, &card_ids)).transpose()?;
            let prompt = json!({"deck_id": deck_id});
            (Activity::PecsBook, category, prompt, json!({"card_ids": card_ids}), evaluation, strip)
        }
        AttemptKind::Differentiate {
            category,
            n_options,
            seed,
            chosen,
        } => {
            let category = parse_category(&category)?;
            let task = gen_discrimination_task(&d, category, n_options, seed)?;
            let evaluation = evaluate_discrimination(&task, &chosen)?;
            let prompt = json!({
                "deck_id": deck_id,
                "task_id": task.task_id,
                "category": category,
                "n_options": n_options,
                "seed": seed,
            });
            (Activity::Differentiate, Some(category), prompt, json!({"chosen": chosen}), evaluation, None)
        }
        AttemptKind::Qa {
            phase,
            seed,
            chosen_index,
        } => {
            let phase = match phase {
                Some(n) => parse_phase(n)?,
                None => state.learners.profile(learner)?.current_phase,
            };
            let question = gen_question(&d, phase, seed)?;
            let evaluation = evaluate_answer(&question, chosen_index)?;
            let category = d.get(&question.prompt_card).map(|c| c.category);
            let prompt = json!({
                "deck_id": deck_id,
                "question_id": question.question_id,
                "phase": phase,
                "seed": seed,
            });
            let missed_before = state.learners.ledger(learner)?.iter().any(|a| {
                a.activity == Activity::Qa && a.prompt_descriptor == prompt && !a.correct
            });
            if missed_before && Activity::Qa.is_unlocked(state.learners.profile(learner)?.current_phase) {
                let report = state.learners.progress_chart(learner)?;
                let evaluation = EvaluationResult {
                    stars_awarded: 0,
                    ..evaluation
                };
                let out = json!({
                    "recorded": false,
                    "retry": true,
                    "evaluation": evaluation,
                    "attempt": null,
                    "advancement": {"advanced": false, "new_phase": report.current_phase},
                    "report": report,
                });
                return Ok((out, Vec::new()));
            }
            (Activity::Qa, category, prompt, json!({"chosen_index": chosen_index}), evaluation, None)
        }
    };

    let draft = AttemptDraft {
        activity,
        category,
        prompt_descriptor: prompt,
        response,
        correct: evaluation.correct,
        stars_awarded: evaluation.stars_awarded,
    };
    let outcome = state.learners.record_attempt(learner, draft, now)?;
    if let Some(strip) = valid_strip {
        let model = state.usage_models.entry(learner.to_string()).or_default();
        *model = update_usage_model(model, &strip)?;
    }
    let mut out = serde_json::Map::new();
    out.insert("recorded".into(), json!(true));
    out.insert("retry".into(), json!(false));
    out.insert("evaluation".into(), serde_json::to_value(&evaluation).unwrap());
    out.insert("attempt".into(), serde_json::to_value(&outcome.attempt).unwrap());
    out.insert("advancement".into(), serde_json::to_value(outcome.advancement).unwrap());
    out.insert("report".into(), serde_json::to_value(&outcome.report).unwrap());
    out.extend(extra);
    Ok((Value::Object(out), vec![outcome.attempt]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn routes_resolve() {
        assert_eq!(route("GET", "/progress/learner-1").unwrap(), Route::Progress("learner-1".into()));
        assert_eq!(route("GET", "/assets/pictures/fruits/apple.png").unwrap(), Route::Asset("pictures/fruits/apple.png".into()));
        assert_eq!(route("DELETE", "/cards").unwrap_err().status, 405);
        assert_eq!(route("GET", "/nope").unwrap_err().status, 404);
        assert_eq!(route("GET", "/assets/").unwrap_err().status, 404);
    }

    #[test]
    fn learner_errors_map_to_statuses() {
        let status = |e: LearnerError| ApiError::from(e).status;
        assert_eq!(status(LearnerError::UsernameTaken("a".into())), 409);
        assert_eq!(status(LearnerError::AuthFailed), 401);
        assert_eq!(status(LearnerError::TokenExpired), 401);
        assert_eq!(status(LearnerError::UnknownLearner("x".into())), 404);
        assert_eq!(status(LearnerError::WeakPassword), 400);
    }

    #[test]
    fn questions_go_out_without_answers() {
        let q = gen_question(&pecs_core::reference_deck(), Phase::FOUR, 1).unwrap();
        let v = question_view(&q);
        assert!(v.get("correct_index").is_none());
        assert!(v.get("answer_word").is_none());
        assert_eq!(v["prompt_text"], "What do you want?");
    }
}
