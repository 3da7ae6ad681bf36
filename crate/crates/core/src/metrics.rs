//! Plan goodness: duplicate (dm), coverage (mc) and user-constraint (uc)
//! scores and their combinations.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::error::MetricsError;
use crate::r3::{FoodRole, Recipe};
use crate::users::{MealSlotSpec, TernaryPref, UserProfile};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub role: FoodRole,
    /// `None` marks a role left unfilled.
    pub recipe_id: Option<String>,
}

impl Assignment {
    pub fn filled(role: FoodRole, id: impl Into<String>) -> Assignment {
        Assignment {
            role,
            recipe_id: Some(id.into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MealInstance {
    pub slot: MealSlotSpec,
    pub assignments: Vec<Assignment>,
}

impl MealInstance {
    pub fn filled_ids(&self) -> impl Iterator<Item = &str> {
        self.assignments.iter().filter_map(|a| a.recipe_id.as_deref())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MealScores {
    pub dm: f64,
    pub mc: f64,
    pub uc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Combos {
    pub uc_dm_mc: f64,
    pub uc_dm: f64,
    pub uc_mc: f64,
    pub dm_mc: f64,
}

impl Combos {
    pub fn of(uc: f64, dm: f64, mc: f64) -> Combos {
        Combos {
            uc_dm_mc: (uc + dm + mc) / 3.0,
            uc_dm: (uc + dm) / 2.0,
            uc_mc: (uc + mc) / 2.0,
            dm_mc: (dm + mc) / 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoodnessReport {
    pub dm: f64,
    pub mc: f64,
    pub uc: f64,
    pub combos: Combos,
    pub weighted_g: f64,
    pub per_meal: Vec<MealScores>,
}

/// Column order of [`GoodnessReport::csv_row`].
pub const CSV_COLUMNS: [&str; 7] = ["uc", "dm", "mc", "uc_dm_mc", "uc_dm", "uc_mc", "dm_mc"];

impl GoodnessReport {
    pub fn csv_row(&self) -> [String; 7] {
        let c = &self.combos;
        [self.uc, self.dm, self.mc, c.uc_dm_mc, c.uc_dm, c.uc_mc, c.dm_mc].map(|v| format!("{v:.3}"))
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn lookup<'a>(catalog: &'a Catalog, id: &str) -> Result<&'a Recipe, MetricsError> {
    catalog
        .get(id)
        .ok_or_else(|| MetricsError::UnknownRecipe(id.to_owned()))
}

/// Unique over filled items per meal; a meal with nothing filled scores 0.
pub fn duplicate_score(plan: &[MealInstance]) -> Result<(f64, Vec<f64>), MetricsError> {
    if plan.is_empty() {
        return Err(MetricsError::EmptyPlan);
    }
    let per: Vec<f64> = plan
        .iter()
        .map(|m| {
            let ids: Vec<&str> = m.filled_ids().collect();
            if ids.is_empty() {
                return 0.0;
            }
            let unique: HashSet<&str> = ids.iter().copied().collect();
            unique.len() as f64 / ids.len() as f64
        })
        .collect();
    Ok((mean(&per), per))
}

/// `max(0, (fulfilled - misaligned) / R)` per meal, R = requested roles.
pub fn coverage_score(
    plan: &[MealInstance],
    catalog: &Catalog,
) -> Result<(f64, Vec<f64>), MetricsError> {
    if plan.is_empty() {
        return Err(MetricsError::EmptyPlan);
    }
    let mut per = Vec::with_capacity(plan.len());
    for m in plan {
        let requested = m.slot.components.len().max(1) as f64;
        let (mut fulfilled, mut misaligned) = (0i64, 0i64);
        for a in &m.assignments {
            let Some(id) = &a.recipe_id else { continue };
            if lookup(catalog, id)?.has_role(a.role) {
                fulfilled += 1;
            } else {
                misaligned += 1;
            }
        }
        per.push(((fulfilled - misaligned) as f64 / requested).max(0.0));
    }
    Ok((mean(&per), per))
}

/// Fraction of satisfied (item, non-neutral feature) checks per meal.
/// A meal with no checks scores 1.
pub fn user_constraint_score(
    plan: &[MealInstance],
    user: &UserProfile,
    catalog: &Catalog,
) -> Result<(f64, Vec<f64>), MetricsError> {
    if plan.is_empty() {
        return Err(MetricsError::EmptyPlan);
    }
    let active: Vec<_> = user.prefs.non_neutral().collect();
    let mut per = Vec::with_capacity(plan.len());
    for m in plan {
        let (mut checks, mut satisfied) = (0usize, 0usize);
        for id in m.filled_ids() {
            let recipe = lookup(catalog, id)?;
            for &(f, pref) in &active {
                checks += 1;
                let has = f.present_in(recipe);
                let ok = match pref {
                    TernaryPref::Negative => !has,
                    TernaryPref::Positive => has || !user.penalize_missing_positive,
                    TernaryPref::Neutral => true,
                };
                satisfied += ok as usize;
            }
        }
        per.push(if checks == 0 {
            1.0
        } else {
            satisfied as f64 / checks as f64
        });
    }
    Ok((mean(&per), per))
}

pub fn goodness(
    plan: &[MealInstance],
    user: &UserProfile,
    catalog: &Catalog,
) -> Result<GoodnessReport, MetricsError> {
    let (dm, dms) = duplicate_score(plan)?;
    let (mc, mcs) = coverage_score(plan, catalog)?;
    let (uc, ucs) = user_constraint_score(plan, user, catalog)?;
    let w = user.weights;
    let wsum = w.dm + w.mc + w.uc;
    let weighted_g = if wsum > 0.0 {
        (w.dm * dm + w.mc * mc + w.uc * uc) / wsum
    } else {
        (dm + mc + uc) / 3.0
    };
    Ok(GoodnessReport {
        dm,
        mc,
        uc,
        combos: Combos::of(uc, dm, mc),
        weighted_g,
        per_meal: dms
            .into_iter()
            .zip(mcs)
            .zip(ucs)
            .map(|((dm, mc), uc)| MealScores { dm, mc, uc })
            .collect(),
    })
}

/// Share of filled items whose recipe already appeared in an earlier meal
/// of the plan. Reported alongside dm, never folded into it.
pub fn cross_meal_repeat_rate(plan: &[MealInstance]) -> f64 {
    let mut seen: HashSet<&str> = HashSet::new();
    let (mut total, mut repeats) = (0usize, 0usize);
    for m in plan {
        let ids: HashSet<&str> = m.filled_ids().collect();
        for id in m.filled_ids() {
            total += 1;
            repeats += seen.contains(id) as usize;
        }
        seen.extend(ids);
    }
    if total == 0 {
        0.0
    } else {
        repeats as f64 / total as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::r3::parse_recipe;
    use crate::users::{Prefs, TernaryPref::*};
    use FoodRole::*;

    fn cat() -> Catalog {
        let mk = |name: &str, role: &str, nuts: bool, meat: bool| {
            parse_recipe(&format!(
                r#"{{"recipe_name": "{name}", "food_role": ["{role}"], "hasNuts": {nuts}, "hasMeat": {meat}}}"#
            ))
            .unwrap()
        };
        Catalog::new(vec![
            mk("A", "Main Course", false, true),
            mk("B", "Side", true, false),
            mk("C", "Beverage", false, false),
            mk("D", "Dessert", true, false),
        ])
    }

    fn meal(roles: &[FoodRole], ids: &[&str]) -> MealInstance {
        MealInstance {
            slot: MealSlotSpec::new("M", roles),
            assignments: roles
                .iter()
                .zip(ids)
                .map(|(r, id)| Assignment::filled(*r, *id))
                .collect(),
        }
    }

    #[test]
    fn duplicate_examples() {
        let all = meal(&[MainCourse, Side, Beverage], &["a", "b", "c"]);
        let dup = meal(&[MainCourse, Side, Beverage], &["a", "a", "b"]);
        assert_eq!(duplicate_score(&[all.clone()]).unwrap().0, 1.0);
        assert!((duplicate_score(&[dup]).unwrap().0 - 2.0 / 3.0).abs() < 1e-12);
        let half = meal(&[MainCourse, Side], &["a", "a"]);
        assert_eq!(duplicate_score(&[all, half]).unwrap().0, 0.75);
        assert!(duplicate_score(&[]).is_err());
    }

    #[test]
    fn coverage_examples() {
        let c = cat();
        let ok = meal(&[MainCourse, Side, Beverage], &["a", "b", "c"]);
        assert_eq!(coverage_score(&[ok], &c).unwrap().0, 1.0);
        // beverage placed as a side
        let bev_side = meal(&[MainCourse, Side, Beverage], &["a", "c", "c"]);
        assert!((coverage_score(&[bev_side], &c).unwrap().0 - 1.0 / 3.0).abs() < 1e-12);
        let none = meal(&[MainCourse, Side, Beverage], &["c", "a", "b"]);
        assert_eq!(coverage_score(&[none], &c).unwrap().0, 0.0);
        let unknown = meal(&[MainCourse], &["zz"]);
        assert_eq!(
            coverage_score(&[unknown], &c),
            Err(MetricsError::UnknownRecipe("zz".into()))
        );
    }

    #[test]
    fn user_constraint_examples() {
        let c = cat();
        let m = meal(&[MainCourse, Side], &["a", "b"]);
        let neutral = UserProfile::new("n", Prefs::default());
        assert_eq!(user_constraint_score(&[m.clone()], &neutral, &c).unwrap().0, 1.0);
        let no_nuts = UserProfile::new("x", Prefs::new(Neutral, Neutral, Negative));
        assert_eq!(user_constraint_score(&[m.clone()], &no_nuts, &c).unwrap().0, 0.5);
        let mut meat = UserProfile::new("y", Prefs::new(Neutral, Positive, Neutral));
        assert_eq!(user_constraint_score(&[m.clone()], &meat, &c).unwrap().0, 1.0);
        meat.penalize_missing_positive = true;
        assert_eq!(user_constraint_score(&[m], &meat, &c).unwrap().0, 0.5);
    }

    #[test]
    fn goodness_combos_and_weights() {
        let c = cat();
        let m = meal(&[MainCourse, Side], &["a", "b"]);
        let mut u = UserProfile::new("x", Prefs::default());
        let r = goodness(&[m.clone()], &u, &c).unwrap();
        assert_eq!(r.combos, Combos::of(1.0, 1.0, 1.0));
        assert_eq!(r.weighted_g, 1.0);
        let k = Combos::of(0.5, 1.0, 0.5);
        assert!((k.uc_dm_mc - 2.0 / 3.0).abs() < 1e-12);
        u.prefs = Prefs::new(Neutral, Neutral, Negative);
        u.weights = crate::users::Weights { dm: 0.0, mc: 0.0, uc: 1.0 };
        let r = goodness(&[m], &u, &c).unwrap();
        assert_eq!(r.weighted_g, r.uc);
        assert_eq!(r.csv_row()[0], "0.500");
    }

    #[test]
    fn cross_meal_repeats() {
        let a = meal(&[MainCourse, Side], &["a", "b"]);
        let b = meal(&[MainCourse, Side], &["a", "c"]);
        assert_eq!(cross_meal_repeat_rate(&[a.clone(), b]), 0.25);
        assert_eq!(cross_meal_repeat_rate(&[a]), 0.0);
    }
}
