mod common;

use common::Client;
use serde_json::{json, Value};

struct World {
    c: Client,
    child: (String, String),
    therapist: (String, String),
    parent: (String, String),
    other_child: (String, String),
    stranger: (String, String),
}

fn world() -> World {
    let c = Client::new();
    let child = c.account("amal", "CHILD");
    let therapist = c.account("dr-lee", "THERAPIST");
    let parent = c.account("mum", "PARENT");
    let other_child = c.account("noor", "CHILD");
    let stranger = c.account("sam", "THERAPIST");
    c.ok("POST", "/links", &child.1, Some(json!({"adult_id": therapist.0})));
    c.ok("POST", "/links", &child.1, Some(json!({"adult_id": parent.0})));
    World {
        c,
        child,
        therapist,
        parent,
        other_child,
        stranger,
    }
}

/// Every way of reading or changing `target`'s data, as (method, path, body).
fn probes(target: &str) -> Vec<(&'static str, String, Option<Value>)> {
    vec![
        ("GET", format!("/progress/{target}"), None),
        ("GET", format!("/profile/{target}"), None),
        ("PUT", format!("/settings/{target}"), Some(json!({"background_theme": "DARK"}))),
        ("GET", format!("/predict?prefix=i&learner_id={target}"), None),
        ("POST", "/tasks/qa".to_string(), Some(json!({"seed": 1, "learner_id": target}))),
        (
            "POST",
            "/attempts".to_string(),
            Some(json!({"activity": "SINGLE_WORD", "card_id": "apple", "learner_id": target})),
        ),
    ]
}

fn status(w: &World, token: &str, probe: &(&str, String, Option<Value>)) -> u16 {
    w.c.call(probe.0, &probe.1, Some(token), probe.2.clone()).status
}

#[test]
fn self_and_linked_adults_may_act_for_a_child() {
    let w = world();
    for probe in probes(&w.child.0) {
        for token in [&w.child.1, &w.therapist.1, &w.parent.1] {
            assert!(status(&w, token, &probe) < 300, "{probe:?}");
        }
    }
}

#[test]
fn everyone_else_is_refused() {
    let w = world();
    for probe in probes(&w.child.0) {
        for token in [&w.other_child.1, &w.stranger.1] {
            let resp = w.c.call(probe.0, &probe.1, Some(token), probe.2.clone());
            assert_eq!(resp.status, 403, "{probe:?}");
            assert_eq!(resp.error_code(), Some("NotLinked"));
            assert!(resp.json().get("star_total").is_none());
        }
    }
    // A link lets the adult see the child, not the other way round.
    for probe in probes(&w.therapist.0) {
        assert_eq!(status(&w, &w.child.1, &probe), 403, "{probe:?}");
    }
}

#[test]
fn refused_requests_change_nothing() {
    let w = world();
    let before = pecs_service::save_store(&w.c.service.state());
    for probe in probes(&w.child.0) {
        status(&w, &w.stranger.1, &probe);
    }
    assert_eq!(pecs_service::save_store(&w.c.service.state()), before);
}

#[test]
fn message_links() {
    let w = world();
    let send = |from: &(String, String), to: &(String, String)| {
        w.c.call("POST", "/messages", Some(&from.1), Some(json!({"to_learner_id": to.0, "body": "hello"})))
            .status
    };
    assert_eq!(send(&w.therapist, &w.child), 201);
    assert_eq!(send(&w.child, &w.parent), 201);
    // Adults sharing a linked child may talk to each other.
    assert_eq!(send(&w.parent, &w.therapist), 201);
    assert_eq!(send(&w.stranger, &w.child), 403);
    assert_eq!(send(&w.other_child, &w.child), 403);
    assert_eq!(send(&w.child, &w.child), 403);

    let peek = w.c.call("GET", &format!("/messages?peer={}", w.child.0), Some(&w.stranger.1), None);
    assert_eq!(peek.status, 403);
}
