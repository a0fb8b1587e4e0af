use pecs_core::{predict_next, reference_deck, update_usage_model, validate_strip, SentenceStrip, UsageModel, MAX_STRIP_LEN};
use pecs_testkit::cfg::GrammarOracle;
use pecs_testkit::ranking::{expected_ranking, Counts};
use pecs_testkit::{random_open_prefix, random_sentence, ten_card_deck};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn trained(deck: &pecs_core::Deck, oracle: &GrammarOracle, n: usize, rng: &mut StdRng) -> (UsageModel, Vec<Vec<String>>) {
    let mut model = UsageModel::new();
    let mut log = Vec::new();
    for _ in 0..n {
        let s = random_sentence(oracle, deck, rng);
        let strip = SentenceStrip::new(deck, &s).unwrap();
        model = update_usage_model(&model, &strip).unwrap();
        log.push(s);
    }
    (model, log)
}

#[test]
fn ranking_matches_sort_oracle() {
    let oracle = GrammarOracle::new(MAX_STRIP_LEN);
    let mut rng = StdRng::seed_from_u64(2024);
    for deck in [reference_deck(), ten_card_deck()] {
        for case in 0..100 {
            let n = rng.random_range(0..40);
            let (model, _) = trained(&deck, &oracle, n, &mut rng);
            let prefix = random_open_prefix(&oracle, &deck, &mut rng);
            let k = rng.random_range(1..12);
            let got = predict_next(&deck, &prefix, &model, k).unwrap();
            let prefix_refs: Vec<&str> = prefix.iter().map(String::as_str).collect();
            let want = expected_ranking(&oracle, &deck, &prefix_refs, &Counts::from_model(&model), k);
            assert_eq!(got.len(), want.len(), "case {case}");
            for (g, (id, score)) in got.iter().zip(&want) {
                assert_eq!(&g.card_id, id, "case {case} prefix {prefix:?}");
                assert!((g.score - score).abs() < 1e-12);
            }
            for g in &got {
                let mut extended = prefix.clone();
                extended.push(g.card_id.clone());
                let state = validate_strip(&deck, &extended).unwrap();
                assert!(state.is_valid() || state.is_incomplete());
            }
        }
    }
}

#[test]
fn counts_match_recount_after_random_training() {
    let deck = reference_deck();
    let oracle = GrammarOracle::new(MAX_STRIP_LEN);
    let mut rng = StdRng::seed_from_u64(7);
    let (model, log) = trained(&deck, &oracle, 100, &mut rng);
    assert_eq!(Counts::from_model(&model), Counts::recount(&log));
    let cards: u64 = log.iter().map(|s| s.len() as u64).sum();
    assert_eq!(model.total(), cards);
    assert!(model.is_consistent());
}
