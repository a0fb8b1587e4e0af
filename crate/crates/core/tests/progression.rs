use std::collections::BTreeMap;

use pecs_core::learner::{AccountRole, AdvancementRule, LearnerRegistry, ProgressReport};
use pecs_core::{reference_deck, Activity, Phase, MAX_STRIP_LEN};
use pecs_testkit::cfg::GrammarOracle;
use pecs_testkit::{play_round, recount_stars, simulate_learner, TEST_KDF_ROUNDS};
use rand::rngs::StdRng;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};

#[test]
fn stars_match_ledger_after_random_attempts() {
    let deck = reference_deck();
    let oracle = GrammarOracle::new(MAX_STRIP_LEN);
    let mut reg = LearnerRegistry::new(AdvancementRule::default(), TEST_KDF_ROUNDS);
    let id = reg
        .register("amal", "sunflower9", AccountRole::Child, BTreeMap::new(), 0)
        .unwrap()
        .learner_id
        .clone();
    reg.reset_phase(&id, Phase::FOUR, 0).unwrap();
    let mut rng = StdRng::seed_from_u64(99);
    let mut awarded = 0u64;
    for n in 0..1000u64 {
        let activity = *Activity::ALL.choose(&mut rng).unwrap();
        let accuracy = rng.random_range(0.0..1.0);
        let draft = play_round(&deck, &oracle, activity, accuracy, &mut rng);
        awarded += u64::from(draft.stars_awarded);
        let out = reg.record_attempt(&id, draft, n * 10).unwrap();
        assert_eq!(out.report.star_total, recount_stars(reg.ledger(&id).unwrap()));
    }
    let report = reg.progress_chart(&id).unwrap();
    assert_eq!(report.star_total, awarded);
    assert_eq!(report.star_total, recount_stars(reg.ledger(&id).unwrap()));
    let attempts: u64 = report.per_activity.values().map(|t| t.attempts).sum();
    assert_eq!(attempts, 1000);
    let category_stars: u64 = report.per_category_stars.values().sum();
    assert_eq!(category_stars, report.star_total);
    assert_eq!(report, ProgressReport::from_ledger(reg.profile(&id).unwrap(), reg.ledger(&id).unwrap()));

    let ledger = reg.ledger(&id).unwrap();
    assert!(ledger.windows(2).all(|w| w[0].timestamp < w[1].timestamp));
}

#[test]
fn ninety_percent_learner_reaches_phase_four() {
    let mut reached = 0;
    for seed in 0..100 {
        let out = simulate_learner(seed, 0.9, 200);
        if out.reached_phase_four_after.is_some() {
            reached += 1;
        }
        let phases: Vec<u8> = out.phase_history.iter().map(|e| e.phase.get()).collect();
        assert!(phases.windows(2).all(|w| w[1] == w[0] + 1), "{phases:?}");
        assert!(out.phase_history.windows(2).all(|w| w[0].entered_at < w[1].entered_at));
    }
    assert!(reached >= 99, "{reached}/100");
}

#[test]
fn weak_learner_stalls() {
    let out = simulate_learner(1, 0.3, 200);
    assert!(out.reached_phase_four_after.is_none());
}
