use std::collections::HashSet;
use std::sync::Arc;

use beacon_core::bandit::{accuracy, featurize, fit, label_pairs, log_loss, pair_label, score, train_bandit, BoostedScorer, RelationalExample, TrainOptions};
use beacon_core::catalog::{load_catalog, Catalog};
use beacon_core::r3::{parse_recipe, FoodRole};
use beacon_core::select::{select, BanditParams, Method, SelectorState};
use beacon_core::users::{generate_cohort, CohortSpec, Prefs, TernaryPref, UserProfile};
use proptest::prelude::*;

fn shipped() -> Catalog {
    load_catalog(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/recipes")).unwrap()
}

/// Examples whose label is exactly "the recipe has nuts".
fn nut_task(catalog: &Catalog) -> Vec<RelationalExample> {
    let cohort = generate_cohort(&CohortSpec::preset("c2", 11).unwrap()).unwrap();
    let mut out = Vec::new();
    for u in &cohort {
        for r in catalog.recipes() {
            out.push(RelationalExample::new(u, r, r.has_nuts, 1.0));
        }
    }
    out
}

#[test]
fn separable_task_is_learned() {
    let c = shipped();
    let (s, holdout) = train_bandit(&nut_task(&c), 5, 0.2).unwrap();
    assert!(!holdout.is_empty());
    assert_eq!(accuracy(&s, &holdout), 1.0);
    assert!(log_loss(&s, &holdout) < 0.1);
    for e in &holdout {
        let p = s.probability(e.features);
        assert_eq!(p > 0.5, e.label);
    }
}

#[test]
fn duplicated_data_gives_the_same_scorer() {
    let c = shipped();
    let cohort = generate_cohort(&CohortSpec::preset("c1", 3).unwrap()).unwrap();
    let ex = label_pairs(&cohort, &c);
    let doubled: Vec<_> = ex.iter().chain(ex.iter()).cloned().collect();
    let opts = TrainOptions::default();
    assert_eq!(fit(&ex, &opts).unwrap(), fit(&doubled, &opts).unwrap());
}

#[test]
fn holdout_beats_the_constant_predictor() {
    let c = shipped();
    for (preset, seed) in [("c1", 1), ("c2", 2), ("c3", 3)] {
        let cohort = generate_cohort(&CohortSpec::preset(preset, seed).unwrap()).unwrap();
        let (s, hold) = train_bandit(&label_pairs(&cohort, &c), seed, 0.2).unwrap();
        assert!(log_loss(&s, &hold) <= std::f64::consts::LN_2, "{preset}");
    }
}

#[test]
fn trained_scores_follow_labels() {
    let c = shipped();
    let cohort = generate_cohort(&CohortSpec::preset("c2", 9).unwrap()).unwrap();
    let (s, _) = train_bandit(&label_pairs(&cohort, &c), 9, 0.0).unwrap();
    let u = &cohort[0];
    let mut seen = std::collections::HashMap::new();
    for r in c.recipes() {
        let p = score(&s, u, &r.id, &c).unwrap();
        // identical features, identical probability
        if let Some(q) = seen.insert(featurize(&u.prefs, r), p) {
            assert_eq!(p, q);
        }
    }
    assert!(score(&s, u, "no-such-recipe", &c).is_err());
}

#[test]
fn top1_selection_is_the_argmax() {
    let c = shipped();
    let cohort = generate_cohort(&CohortSpec::preset("c1", 4).unwrap()).unwrap();
    let s = Arc::new(fit(&label_pairs(&cohort, &c), &TrainOptions::default()).unwrap());
    let params = BanditParams { top_k: 1, ..BanditParams::default() };
    for u in &cohort {
        for role in FoodRole::ALL {
            let mut st = SelectorState::new(Method::Bandit, 1).with_scorer(s.clone()).with_params(params);
            let got = select(&mut st, u, role, &c, &HashSet::new()).unwrap();
            let best = c
                .eligible(role)
                .iter()
                .max_by(|a, b| {
                    let pa = score(&s, u, a, &c).unwrap();
                    let pb = score(&s, u, b, &c).unwrap();
                    // earlier catalog position wins ties
                    pa.total_cmp(&pb).then(c.position(b).cmp(&c.position(a)))
                })
                .unwrap();
            assert_eq!(&got, best);
        }
    }
}

#[test]
fn pair_labels_on_a_single_recipe() {
    let r = parse_recipe(r#"{"recipe_name": "Nutty", "food_role": ["Dessert"], "hasNuts": true}"#).unwrap();
    let c = Catalog::new(vec![r]);
    let users = [
        UserProfile::new("a", Prefs::new(TernaryPref::Neutral, TernaryPref::Neutral, TernaryPref::Negative)),
        UserProfile::new("b", Prefs::default()),
    ];
    let ex = label_pairs(&users, &c);
    assert_eq!(ex.iter().map(|e| e.label).collect::<Vec<_>>(), [false, true]);
    assert!(!pair_label(&users[0].prefs, &c.recipes()[0]));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn scorer_is_deterministic(seed in 0u64..1000) {
        let c = shipped();
        let cohort = generate_cohort(&CohortSpec::preset("c2", seed).unwrap()).unwrap();
        let ex = label_pairs(&cohort, &c);
        let a = train_bandit(&ex, seed, 0.2).unwrap();
        let b = train_bandit(&ex, seed, 0.2).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn model_file_survives_a_round_trip() {
    let c = shipped();
    let s = fit(&nut_task(&c), &TrainOptions::default()).unwrap();
    let text = s.to_model_json();
    assert_eq!(BoostedScorer::from_model_json(&text).unwrap(), s);
}
