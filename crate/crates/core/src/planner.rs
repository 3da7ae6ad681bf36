//! Plan assembly and the plan document format.

use std::collections::HashSet;

use serde_json::{json, Map, Value};

use crate::catalog::Catalog;
use crate::error::PlanError;
use crate::metrics::{Assignment, MealInstance};
use crate::r3::FoodRole;
use crate::select::{select, Dedupe, Method, SelectorState};
use crate::users::{MealConfig, MealSlotSpec, UserProfile};

#[derive(Debug, Clone, PartialEq)]
pub struct MealPlan {
    pub user_id: String,
    pub method: Method,
    pub seed: u64,
    pub days: Vec<Vec<MealInstance>>,
}

impl MealPlan {
    pub fn meals(&self) -> impl Iterator<Item = &MealInstance> {
        self.days.iter().flatten()
    }

    /// All meals in day order, the shape the metrics take.
    pub fn flat_meals(&self) -> Vec<MealInstance> {
        self.meals().cloned().collect()
    }

    pub fn assignment_ids(&self) -> impl Iterator<Item = &str> {
        self.meals().flat_map(|m| m.filled_ids())
    }
}

/// Fill every role of every meal of every day, in declared slot order and
/// fixed role order within a slot.
pub fn build_plan(
    state: &mut SelectorState,
    user: &UserProfile,
    config: &MealConfig,
    catalog: &Catalog,
) -> Result<MealPlan, PlanError> {
    config.validate().map_err(PlanError::Config)?;
    let dedupe = state.params.dedupe;
    let mut plan_ids: HashSet<String> = HashSet::new();
    let mut days = Vec::with_capacity(config.horizon_days);
    for day in 0..config.horizon_days {
        let mut meals = Vec::with_capacity(config.slots.len());
        for slot in &config.slots {
            let mut meal_ids: HashSet<String> = HashSet::new();
            let mut assignments = Vec::with_capacity(slot.components.len());
            for role in slot.roles() {
                let empty = HashSet::new();
                let exclude = match dedupe {
                    Dedupe::None => &empty,
                    Dedupe::WithinMeal => &meal_ids,
                    Dedupe::AcrossPlan => &plan_ids,
                };
                let id = select(state, user, role, catalog, exclude).map_err(|source| {
                    PlanError::Selection {
                        day,
                        meal: slot.meal_name.clone(),
                        role,
                        source,
                    }
                })?;
                meal_ids.insert(id.clone());
                plan_ids.insert(id.clone());
                assignments.push(Assignment::filled(role, id));
            }
            meals.push(MealInstance {
                slot: slot.clone(),
                assignments,
            });
        }
        days.push(meals);
    }
    Ok(MealPlan {
        user_id: user.id.clone(),
        method: state.method,
        seed: state.rng_seed,
        days,
    })
}

/// Plan as a JSON value: days (1-based) of meals, one key per requested role.
pub fn plan_to_value(plan: &MealPlan) -> Value {
    let days: Vec<Value> = plan
        .days
        .iter()
        .enumerate()
        .map(|(d, meals)| {
            let meals: Vec<Value> = meals.iter().map(meal_to_value).collect();
            json!({"day": d + 1, "meals": meals})
        })
        .collect();
    json!({
        "user_id": plan.user_id,
        "method": plan.method,
        "seed": plan.seed,
        "days": days,
    })
}

pub fn meal_to_value(meal: &MealInstance) -> Value {
    let mut obj = Map::new();
    obj.insert("meal_name".into(), meal.slot.meal_name.clone().into());
    if let Some(t) = &meal.slot.time_of_day {
        obj.insert("time_of_day".into(), t.clone().into());
    }
    for a in &meal.assignments {
        obj.insert(a.role.plan_key().into(), a.recipe_id.clone().into());
    }
    Value::Object(obj)
}

/// Pretty JSON with a trailing newline; byte-identical for equal plans.
pub fn emit_plan(plan: &MealPlan) -> String {
    let mut s = serde_json::to_string_pretty(&plan_to_value(plan)).expect("plan serializes");
    s.push('\n');
    s
}

pub fn parse_plan(raw: &str) -> Result<MealPlan, PlanError> {
    let v: Value = serde_json::from_str(raw).map_err(|e| PlanError::Document(e.to_string()))?;
    plan_from_value(&v)
}

pub fn plan_from_value(v: &Value) -> Result<MealPlan, PlanError> {
    let bad = |m: &str| PlanError::Document(m.to_owned());
    let user_id = v["user_id"].as_str().ok_or_else(|| bad("user_id: expected a string"))?;
    let method = v["method"]
        .as_str()
        .ok_or_else(|| bad("method: expected a string"))?
        .parse::<Method>()
        .map_err(|e| bad(&format!("method: {e}")))?;
    let seed = v["seed"].as_u64().ok_or_else(|| bad("seed: expected an integer"))?;
    let days_v = v["days"].as_array().ok_or_else(|| bad("days: expected an array"))?;
    let mut days = Vec::with_capacity(days_v.len());
    for (d, day) in days_v.iter().enumerate() {
        let meals_v = day["meals"]
            .as_array()
            .ok_or_else(|| bad(&format!("days[{d}].meals: expected an array")))?;
        let mut meals = Vec::with_capacity(meals_v.len());
        for (m, meal) in meals_v.iter().enumerate() {
            let at = format!("days[{d}].meals[{m}]");
            let obj = meal
                .as_object()
                .ok_or_else(|| bad(&format!("{at}: expected an object")))?;
            let name = obj
                .get("meal_name")
                .and_then(Value::as_str)
                .ok_or_else(|| bad(&format!("{at}.meal_name: expected a string")))?;
            let mut slot = MealSlotSpec::new(name, &[]);
            slot.time_of_day = obj.get("time_of_day").and_then(Value::as_str).map(str::to_owned);
            let mut assignments = Vec::new();
            for role in FoodRole::ALL {
                if let Some(id) = obj.get(role.plan_key()) {
                    let recipe_id = match id {
                        Value::String(s) => Some(s.clone()),
                        Value::Null => None,
                        _ => return Err(bad(&format!("{at}.{}: expected a recipe id", role.plan_key()))),
                    };
                    slot.components.insert(role);
                    assignments.push(Assignment { role, recipe_id });
                }
            }
            for key in obj.keys() {
                if !matches!(key.as_str(), "meal_name" | "time_of_day") && FoodRole::from_plan_key(key).is_none() {
                    return Err(bad(&format!("{at}.{key}: unknown key")));
                }
            }
            meals.push(MealInstance { slot, assignments });
        }
        days.push(meals);
    }
    Ok(MealPlan {
        user_id: user_id.to_owned(),
        method,
        seed,
        days,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bandit::BoostedScorer;
    use crate::r3::parse_recipe;
    use crate::select::BanditParams;
    use crate::users::{default_meal_config, Prefs};
    use std::sync::Arc;

    fn catalog() -> Catalog {
        let roles = ["Main Course", "Side", "Dessert", "Beverage", "Main Course", "Side"];
        Catalog::new(
            roles
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    parse_recipe(&format!(r#"{{"recipe_name": "R{i}", "food_role": ["{r}"]}}"#)).unwrap()
                })
                .collect(),
        )
    }

    fn user() -> UserProfile {
        UserProfile::new("u1", Prefs::default())
    }

    #[test]
    fn default_config_counts() {
        let c = catalog();
        let mut s = SelectorState::new(Method::Random, 3);
        let p = build_plan(&mut s, &user(), &default_meal_config(), &c).unwrap();
        assert_eq!(p.days.len(), 1);
        assert_eq!(p.meals().count(), 3);
        assert_eq!(p.assignment_ids().count(), 9);
        let mut s = SelectorState::new(Method::Random, 3);
        let p = build_plan(&mut s, &user(), &default_meal_config().with_horizon(5), &c).unwrap();
        assert_eq!(p.meals().count(), 15);
    }

    #[test]
    fn emitted_keys_follow_the_config() {
        let c = catalog();
        let mut s = SelectorState::new(Method::Sequential, 0);
        let p = build_plan(&mut s, &user(), &default_meal_config(), &c).unwrap();
        let v = plan_to_value(&p);
        let sizes: Vec<usize> = v["days"][0]["meals"]
            .as_array()
            .unwrap()
            .iter()
            .map(|m| m.as_object().unwrap().len() - 1)
            .collect();
        assert_eq!(sizes, [2, 3, 4]);
        assert!(v["days"][0]["meals"][2].get("dessert").is_some());
        assert!(v["days"][0]["meals"][0].get("dessert").is_none());
        assert_eq!(parse_plan(&emit_plan(&p)).unwrap(), p);
    }

    #[test]
    fn forced_single_beverage() {
        let c = catalog();
        let cfg = MealConfig {
            slots: vec![MealSlotSpec::new("Drink", &[FoodRole::Beverage])],
            horizon_days: 1,
        };
        let mut s = SelectorState::new(Method::Bandit, 0)
            .with_scorer(Arc::new(BoostedScorer::empty(0.1)))
            .with_params(BanditParams {
                top_k: 1,
                ..BanditParams::default()
            });
        let p = build_plan(&mut s, &user(), &cfg, &c).unwrap();
        assert_eq!(p.assignment_ids().collect::<Vec<_>>(), ["r3"]);
    }

    #[test]
    fn selection_errors_name_the_slot() {
        let c = Catalog::new(vec![parse_recipe(r#"{"recipe_name": "T", "food_role": ["Side"]}"#).unwrap()]);
        let mut s = SelectorState::new(Method::Bandit, 0).with_scorer(Arc::new(BoostedScorer::empty(0.1)));
        let err = build_plan(&mut s, &user(), &default_meal_config(), &c).unwrap_err();
        assert!(matches!(err, PlanError::Selection { day: 0, ref meal, role: FoodRole::MainCourse, .. } if meal == "Breakfast"));
    }

    #[test]
    fn within_meal_dedupe() {
        // one multi-role recipe plus one main course: with dedupe the second
        // role of the meal must avoid the first pick when it can
        let c = Catalog::new(vec![
            parse_recipe(r#"{"recipe_name": "Both", "food_role": ["Main Course", "Side"]}"#).unwrap(),
            parse_recipe(r#"{"recipe_name": "Other", "food_role": ["Side"]}"#).unwrap(),
        ]);
        let cfg = MealConfig {
            slots: vec![MealSlotSpec::new("Lunch", &[FoodRole::MainCourse, FoodRole::Side])],
            horizon_days: 1,
        };
        let params = BanditParams {
            top_k: 1,
            dedupe: Dedupe::WithinMeal,
            ..BanditParams::default()
        };
        let mut s = SelectorState::new(Method::Bandit, 0)
            .with_scorer(Arc::new(BoostedScorer::empty(0.1)))
            .with_params(params);
        let p = build_plan(&mut s, &user(), &cfg, &c).unwrap();
        assert_eq!(p.assignment_ids().collect::<Vec<_>>(), ["both", "other"]);
    }
}
