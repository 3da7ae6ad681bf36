//! Meal-plan recommendation over R3 structured recipes.
//!
//! Load a [`catalog::Catalog`] of R3 documents, describe users with
//! ternary ingredient preferences, build plans with one of three selectors
//! and score them with the goodness metrics in [`metrics`].

pub mod bandit;
pub mod catalog;
pub mod decode;
pub mod error;
pub mod harness;
pub mod keyset;
pub mod metrics;
pub mod planner;
pub mod r3;
pub mod select;
mod syntax;
pub mod users;

pub use bandit::{label_pairs, score, train_bandit, BoostedScorer, RelationalExample};
pub use catalog::{load_catalog, stats, Catalog, CategoryStats};
pub use decode::{lenient_decode, DecodeReport};
pub use harness::{emit_csv, run_grid, ExperimentGrid, ResultRow};
pub use keyset::{build_reference_keyset, key_nesting_set, syntactic_similarity, KeyNestingSet};
pub use metrics::{goodness, GoodnessReport, MealInstance};
pub use planner::{build_plan, emit_plan, parse_plan, MealPlan};
pub use r3::{parse_recipe, FoodRole, Recipe};
pub use select::{select, Method, SelectorState};
pub use users::{default_meal_config, generate_cohort, CohortSpec, MealConfig, UserProfile};
