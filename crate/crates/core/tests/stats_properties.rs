use beacon_core::catalog::{stats, Catalog};
use beacon_core::r3::parse_recipe;
use proptest::prelude::*;

fn arb_catalog() -> impl Strategy<Value = Catalog> {
    prop::collection::vec((0usize..4, any::<bool>(), any::<bool>(), any::<bool>()), 1..40).prop_map(|rows| {
        Catalog::new(
            rows.into_iter()
                .enumerate()
                .map(|(i, (cat, dairy, meat, nuts))| {
                    parse_recipe(&format!(
                        r#"{{"recipe_name": "R{i}", "category": "K{cat}", "food_role": ["Side"],
                            "hasDairy": {dairy}, "hasMeat": {meat}, "hasNuts": {nuts}}}"#
                    ))
                    .unwrap()
                })
                .collect(),
        )
    })
}

proptest! {
    #[test]
    fn percentages_match_brute_force(c in arb_catalog()) {
        for row in stats(&c) {
            let members: Vec<_> = c
                .recipes()
                .iter()
                .filter(|r| row.category == "all" || r.category == row.category)
                .collect();
            prop_assert_eq!(row.total, members.len());
            let count = |f: fn(&&beacon_core::r3::Recipe) -> bool| members.iter().filter(|r| f(r)).count();
            prop_assert_eq!(row.n_nuts, count(|r| r.has_nuts));
            prop_assert_eq!(row.n_meat, count(|r| r.has_meat));
            prop_assert_eq!(row.n_dairy, count(|r| r.has_dairy));
            let exact = 100.0 * row.n_meat as f64 / row.total as f64;
            prop_assert!((row.pct_meat - exact).abs() <= 0.05 + 1e-9);
        }
    }
}
