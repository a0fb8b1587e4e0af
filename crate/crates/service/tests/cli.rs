mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::Client;
use pecs_core::{export_deck, reference_deck};
use pecs_service::FileStore;

fn pecs(store: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pecs"))
        .arg("--store")
        .arg(store)
        .args(args)
        .env_remove("PECS_STORE")
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn ingest_then_export_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store.json");
    let deck_file = dir.path().join("animals.json");
    let cards: Vec<_> = reference_deck()
        .cards()
        .iter()
        .filter(|c| c.category == pecs_core::Category::Animals)
        .cloned()
        .collect();
    let doc = export_deck(&pecs_core::Deck::from_cards(cards).unwrap());
    std::fs::write(&deck_file, &doc).unwrap();

    assert!(stdout(&pecs(&store, &["ingest", deck_file.to_str().unwrap()])).contains("\"animals\" (5 cards)"));
    assert_eq!(stdout(&pecs(&store, &["export", "animals"])), doc);
    assert_eq!(stdout(&pecs(&store, &["export", "reference"])), export_deck(&reference_deck()));

    let again = pecs(&store, &["ingest", deck_file.to_str().unwrap()]);
    assert!(!again.status.success());
    assert!(pecs(&store, &["ingest", "--replace", deck_file.to_str().unwrap()]).status.success());
}

#[test]
fn bad_decks_are_rejected_with_their_error_code() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store.json");
    let deck_file = dir.path().join("bad.json");
    std::fs::write(
        &deck_file,
        r#"{"format_version": 1, "cards": [{"id": "x", "word": "x", "category": "Fruits", "role": "VERB", "picture": "x.png", "audio": null}]}"#,
    )
    .unwrap();
    let out = pecs(&store, &["ingest", deck_file.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("RoleCategoryMismatch"));
    assert!(!store.exists());
}

#[test]
fn env_var_supplies_the_store_path() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("from-env.json");
    let deck_file = dir.path().join("ref.json");
    std::fs::write(&deck_file, export_deck(&reference_deck())).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_pecs"))
        .args(["ingest", "--id", "copy", deck_file.to_str().unwrap()])
        .env("PECS_STORE", &store)
        .output()
        .unwrap();
    stdout(&out);
    assert!(std::fs::read_to_string(&store).unwrap().contains("\"copy\""));
}

#[test]
fn report_reset_and_link() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store.json");
    let (child, therapist) = {
        let c = Client::open(FileStore::new(&store));
        let (child, token) = c.account("amal", "CHILD");
        let therapist = c.register("dr-lee", "THERAPIST");
        common::advance_to(&c, &token, 3);
        (child, therapist)
    };

    let report: serde_json::Value = serde_json::from_str(&stdout(&pecs(&store, &["report", "--learner", &child]))).unwrap();
    assert_eq!(report["current_phase"], 3);

    let profile: serde_json::Value =
        serde_json::from_str(&stdout(&pecs(&store, &["reset-phase", "--learner", &child, "--phase", "2"]))).unwrap();
    assert_eq!(profile["current_phase"], 2);
    assert!(profile.get("password_digest").is_none());
    let report: serde_json::Value = serde_json::from_str(&stdout(&pecs(&store, &["report", "--learner", &child]))).unwrap();
    let phases: Vec<u64> = report["phase_history"].as_array().unwrap().iter().map(|e| e["phase"].as_u64().unwrap()).collect();
    assert_eq!(phases, [1, 2]);

    assert!(!pecs(&store, &["reset-phase", "--learner", &child, "--phase", "5"]).status.success());
    let missing = pecs(&store, &["report", "--learner", "learner-99"]);
    assert!(String::from_utf8_lossy(&missing.stderr).contains("UnknownLearner"));

    stdout(&pecs(&store, &["link", "--child", &child, "--adult", &therapist]));
    let snapshot = pecs_service::StoreSnapshot::parse(&std::fs::read_to_string(&store).unwrap()).unwrap();
    assert!(snapshot.profiles[&child].linked_adults.contains(&therapist));
}
