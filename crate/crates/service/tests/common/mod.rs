#![allow(dead_code)]

use std::sync::Arc;

use pecs_core::AdvancementRule;
use pecs_service::{FileStore, ManualClock, Request, Response, Service, ServiceConfig, State};
use pecs_testkit::TEST_KDF_ROUNDS;
use serde_json::{json, Value};

pub const PASSWORD: &str = "sunflower9";

pub fn config() -> ServiceConfig {
    ServiceConfig {
        kdf_rounds: TEST_KDF_ROUNDS,
        ..ServiceConfig::default()
    }
}

pub struct Client {
    pub service: Service,
    pub clock: Arc<ManualClock>,
}

impl Client {
    pub fn new() -> Client {
        Client::with_config(config())
    }

    pub fn with_config(config: ServiceConfig) -> Client {
        let clock = Arc::new(ManualClock::new(1_700_000_000_000));
        let state = State::new(AdvancementRule::default(), config.kdf_rounds);
        Client {
            service: Service::new(state, clock.clone(), config),
            clock,
        }
    }

    pub fn open(store: FileStore) -> Client {
        let clock = Arc::new(ManualClock::new(1_700_000_000_000));
        Client {
            service: Service::open(store, clock.clone(), config()).unwrap(),
            clock,
        }
    }

    pub fn call(&self, method: &str, path: &str, token: Option<&str>, body: Option<Value>) -> Response {
        let mut req = Request::new(method, path);
        if let Some(t) = token {
            req = req.bearer(t);
        }
        if let Some(b) = body {
            req = req.json(&b);
        }
        self.clock.advance(7);
        self.service.handle_request(&req)
    }

    /// Calls and asserts a 2xx status, returning the JSON body.
    pub fn ok(&self, method: &str, path: &str, token: &str, body: Option<Value>) -> Value {
        let resp = self.call(method, path, Some(token), body);
        assert!(resp.status < 300, "{method} {path} -> {} {}", resp.status, resp.json());
        resp.json().clone()
    }

    pub fn register(&self, username: &str, role: &str) -> String {
        let resp = self.call(
            "POST",
            "/register",
            None,
            Some(json!({"username": username, "password": PASSWORD, "account_role": role})),
        );
        assert_eq!(resp.status, 201, "{}", resp.json());
        resp.json()["learner_id"].as_str().unwrap().to_string()
    }

    pub fn login(&self, username: &str) -> String {
        let resp = self.call("POST", "/login", None, Some(json!({"username": username, "password": PASSWORD})));
        assert_eq!(resp.status, 200, "{}", resp.json());
        resp.json()["token"].as_str().unwrap().to_string()
    }

    /// Registers and logs in; returns (learner_id, token).
    pub fn account(&self, username: &str, role: &str) -> (String, String) {
        let id = self.register(username, role);
        (id, self.login(username))
    }
}

/// One correct attempt at `activity`, chosen by the API's own task endpoints.
pub fn correct_attempt(client: &Client, token: &str, activity: &str, seed: u64) -> Value {
    let body = match activity {
        "SINGLE_WORD" => json!({"activity": "SINGLE_WORD", "card_id": "apple"}),
        "DIFFERENTIATE" => {
            let task = client.ok(
                "POST",
                "/tasks/differentiate",
                token,
                Some(json!({"category": "Fruits", "n_options": 3, "seed": seed})),
            );
            json!({"activity": "DIFFERENTIATE", "category": "Fruits", "n_options": 3, "seed": seed,
                   "chosen": task["target"]})
        }
        "PECS_BOOK" => json!({"activity": "PECS_BOOK", "card_ids": ["i", "want", "food"]}),
        "QA" => {
            let q = pecs_core::gen_question(&pecs_core::reference_deck(), pecs_core::Phase::FOUR, seed).unwrap();
            json!({"activity": "QA", "seed": seed, "chosen_index": q.correct_index})
        }
        other => panic!("unknown activity {other}"),
    };
    client.ok("POST", "/attempts", token, Some(body))
}

/// Plays perfect gate rounds over the API until the caller reaches `phase`.
pub fn advance_to(client: &Client, token: &str, phase: u64) {
    let gates = ["SINGLE_WORD", "DIFFERENTIATE", "PECS_BOOK"];
    let mut current = 1;
    let mut seed = 0;
    while current < phase {
        let out = correct_attempt(client, token, gates[current as usize - 1], seed);
        seed += 1;
        current = out["report"]["current_phase"].as_u64().unwrap();
        assert!(seed < 100, "no advancement after {seed} rounds");
    }
}
