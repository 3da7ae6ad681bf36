//! User profiles, ternary preferences, meal formats and simulated cohorts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::UserError;
use crate::r3::{FoodRole, Recipe};

pub const MAX_HORIZON_DAYS: usize = 5;

/// Ingredient features a user can hold a preference on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Feature {
    Dairy,
    Meat,
    Nuts,
}

impl Feature {
    pub const ALL: [Feature; 3] = [Feature::Dairy, Feature::Meat, Feature::Nuts];

    pub fn name(self) -> &'static str {
        match self {
            Feature::Dairy => "dairy",
            Feature::Meat => "meat",
            Feature::Nuts => "nuts",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn present_in(self, recipe: &Recipe) -> bool {
        match self {
            Feature::Dairy => recipe.has_dairy,
            Feature::Meat => recipe.has_meat,
            Feature::Nuts => recipe.has_nuts,
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A -1 / 0 / +1 stance, serialized as that integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum TernaryPref {
    Negative,
    #[default]
    Neutral,
    Positive,
}

impl TernaryPref {
    pub fn value(self) -> i8 {
        match self {
            TernaryPref::Negative => -1,
            TernaryPref::Neutral => 0,
            TernaryPref::Positive => 1,
        }
    }

    pub fn from_value(v: i64) -> Option<TernaryPref> {
        match v {
            -1 => Some(TernaryPref::Negative),
            0 => Some(TernaryPref::Neutral),
            1 => Some(TernaryPref::Positive),
            _ => None,
        }
    }
}

impl Serialize for TernaryPref {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_i8(self.value())
    }
}

impl<'de> Deserialize<'de> for TernaryPref {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = i64::deserialize(d)?;
        TernaryPref::from_value(v)
            .ok_or_else(|| serde::de::Error::custom(format!("preference must be -1, 0 or 1, got {v}")))
    }
}

/// Preferences on exactly the three features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Prefs {
    pub dairy: TernaryPref,
    pub meat: TernaryPref,
    pub nuts: TernaryPref,
}

impl Prefs {
    pub fn new(dairy: TernaryPref, meat: TernaryPref, nuts: TernaryPref) -> Prefs {
        Prefs { dairy, meat, nuts }
    }

    pub fn get(&self, f: Feature) -> TernaryPref {
        match f {
            Feature::Dairy => self.dairy,
            Feature::Meat => self.meat,
            Feature::Nuts => self.nuts,
        }
    }

    pub fn set(&mut self, f: Feature, p: TernaryPref) {
        match f {
            Feature::Dairy => self.dairy = p,
            Feature::Meat => self.meat = p,
            Feature::Nuts => self.nuts = p,
        }
    }

    /// Features with a non-neutral preference, in feature order.
    pub fn non_neutral(&self) -> impl Iterator<Item = (Feature, TernaryPref)> + '_ {
        Feature::ALL
            .into_iter()
            .map(|f| (f, self.get(f)))
            .filter(|(_, p)| *p != TernaryPref::Neutral)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Condition {
    #[default]
    #[serde(alias = "healthy")]
    Healthy,
    #[serde(alias = "diabetic", alias = "diabetes")]
    Diabetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    #[serde(default = "one")]
    pub dm: f64,
    #[serde(default = "one")]
    pub mc: f64,
    #[serde(default = "one")]
    pub uc: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            dm: 1.0,
            mc: 1.0,
            uc: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anthropometrics {
    pub height_cm: f64,
    pub weight_kg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    #[serde(default)]
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub condition: Condition,
    pub prefs: Prefs,
    #[serde(default)]
    pub weights: Weights,
    #[serde(default)]
    pub penalize_missing_positive: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anthropometrics: Option<Anthropometrics>,
    /// Daily limit per nutrient name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nutrition_goals: Option<BTreeMap<String, f64>>,
}

impl UserProfile {
    pub fn new(id: impl Into<String>, prefs: Prefs) -> UserProfile {
        UserProfile {
            id: id.into(),
            name: None,
            condition: Condition::Healthy,
            prefs,
            weights: Weights::default(),
            penalize_missing_positive: false,
            anthropometrics: None,
            nutrition_goals: None,
        }
    }

    pub fn validate(&self) -> Result<(), UserError> {
        let bad = |path: &str, message: &str| {
            Err(UserError::InvalidProfile {
                path: path.into(),
                message: message.into(),
            })
        };
        let w = self.weights;
        for (name, v) in [("dm", w.dm), ("mc", w.mc), ("uc", w.uc)] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(&format!("weights.{name}"), "weight must be a non-negative number");
            }
        }
        if w.dm + w.mc + w.uc <= 0.0 {
            return bad("weights", "weights must not all be zero");
        }
        if let Some(a) = self.anthropometrics {
            if !(a.height_cm.is_finite() && a.height_cm > 0.0) {
                return bad("anthropometrics.height_cm", "height must be positive");
            }
            if !(a.weight_kg.is_finite() && a.weight_kg > 0.0) {
                return bad("anthropometrics.weight_kg", "weight must be positive");
            }
        }
        if let Some(goals) = &self.nutrition_goals {
            for (k, v) in goals {
                if !(v.is_finite() && *v >= 0.0) {
                    return bad(&format!("nutrition_goals.{k}"), "limit must be a non-negative number");
                }
            }
        }
        Ok(())
    }
}

/// Parse and validate a profile document; errors carry the field path.
pub fn parse_profile(raw: &str) -> Result<UserProfile, UserError> {
    let de = &mut serde_json::Deserializer::from_str(raw);
    let profile: UserProfile = serde_path_to_error::deserialize(de).map_err(|e| {
        let mut path = e.path().to_string();
        let message = e.inner().to_string();
        if let Some(field) = message
            .strip_prefix("missing field `")
            .and_then(|s| s.split('`').next())
        {
            path = if path == "." {
                field.to_owned()
            } else {
                format!("{path}.{field}")
            };
        }
        UserError::InvalidProfile { path, message }
    })?;
    profile.validate()?;
    Ok(profile)
}

/// One named meal of the day and the roles it asks for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MealSlotSpec {
    pub meal_name: String,
    pub components: BTreeSet<FoodRole>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_of_day: Option<String>,
}

impl MealSlotSpec {
    pub fn new(meal_name: &str, components: &[FoodRole]) -> MealSlotSpec {
        MealSlotSpec {
            meal_name: meal_name.to_owned(),
            components: components.iter().copied().collect(),
            time_of_day: None,
        }
    }

    /// Requested roles in fill order.
    pub fn roles(&self) -> impl Iterator<Item = FoodRole> + '_ {
        self.components.iter().copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MealConfig {
    pub slots: Vec<MealSlotSpec>,
    #[serde(default = "one_day")]
    pub horizon_days: usize,
}

fn one_day() -> usize {
    1
}

impl MealConfig {
    pub fn with_horizon(mut self, days: usize) -> MealConfig {
        self.horizon_days = days;
        self
    }

    pub fn roles_per_day(&self) -> usize {
        self.slots.iter().map(|s| s.components.len()).sum()
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.slots.is_empty() {
            return Err("slots: at least one meal is required".into());
        }
        for (i, s) in self.slots.iter().enumerate() {
            if s.meal_name.trim().is_empty() {
                return Err(format!("slots[{i}].meal_name: must not be empty"));
            }
            if s.components.is_empty() {
                return Err(format!("slots[{i}].components: must not be empty"));
            }
        }
        if !(1..=MAX_HORIZON_DAYS).contains(&self.horizon_days) {
            return Err(format!(
                "horizon_days: must be between 1 and {MAX_HORIZON_DAYS}, got {}",
                self.horizon_days
            ));
        }
        Ok(())
    }
}

/// Breakfast, lunch and dinner over one day.
pub fn default_meal_config() -> MealConfig {
    use FoodRole::*;
    MealConfig {
        slots: vec![
            MealSlotSpec::new("Breakfast", &[MainCourse, Beverage]),
            MealSlotSpec::new("Lunch", &[MainCourse, Side, Beverage]),
            MealSlotSpec::new("Dinner", &[MainCourse, Side, Dessert, Beverage]),
        ],
        horizon_days: 1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FeatureCounts {
    pub n_neg: usize,
    pub n_pos: usize,
}

/// Simulated population: per feature, how many users are negative and
/// positive; the rest are neutral.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortSpec {
    #[serde(default)]
    pub name: String,
    pub n_users: usize,
    pub dairy: FeatureCounts,
    pub meat: FeatureCounts,
    pub nuts: FeatureCounts,
    pub seed: u64,
}

impl CohortSpec {
    /// Same negative and positive count on every feature.
    pub fn uniform(name: &str, n_users: usize, n_neg: usize, n_pos: usize, seed: u64) -> CohortSpec {
        let c = FeatureCounts { n_neg, n_pos };
        CohortSpec {
            name: name.to_owned(),
            n_users,
            dairy: c,
            meat: c,
            nuts: c,
            seed,
        }
    }

    /// `c1` = 12/0/12, `c2` = 8/8/8, `c3` = 2/20/2 over 24 users
    /// (negative / neutral / positive).
    pub fn preset(name: &str, seed: u64) -> Result<CohortSpec, UserError> {
        let (neg, pos) = match name {
            "c1" => (12, 12),
            "c2" => (8, 8),
            "c3" => (2, 2),
            other => return Err(UserError::UnknownPreset(other.to_owned())),
        };
        Ok(CohortSpec::uniform(name, 24, neg, pos, seed))
    }

    pub fn counts(&self, f: Feature) -> FeatureCounts {
        match f {
            Feature::Dairy => self.dairy,
            Feature::Meat => self.meat,
            Feature::Nuts => self.nuts,
        }
    }

    pub fn with_seed(&self, seed: u64) -> CohortSpec {
        CohortSpec {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), UserError> {
        for f in Feature::ALL {
            let c = self.counts(f);
            if c.n_neg + c.n_pos > self.n_users {
                return Err(UserError::CohortOverflow {
                    feature: f.name(),
                    n_neg: c.n_neg,
                    n_pos: c.n_pos,
                    n_users: self.n_users,
                });
            }
        }
        Ok(())
    }
}

/// Draw a cohort. Each feature is assigned by its own shuffle (a separate
/// ChaCha stream per feature), so features are independent and the result
/// depends only on the [`CohortSpec`].
pub fn generate_cohort(spec: &CohortSpec) -> Result<Vec<UserProfile>, UserError> {
    spec.validate()?;
    let width = spec.n_users.to_string().len().max(2);
    let mut users: Vec<UserProfile> = (0..spec.n_users)
        .map(|i| UserProfile::new(format!("u{:0width$}", i + 1), Prefs::default()))
        .collect();
    for f in Feature::ALL {
        let c = spec.counts(f);
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(f.index() as u64);
        let mut order: Vec<usize> = (0..spec.n_users).collect();
        order.shuffle(&mut rng);
        for (k, &u) in order.iter().enumerate() {
            let p = if k < c.n_neg {
                TernaryPref::Negative
            } else if k < c.n_neg + c.n_pos {
                TernaryPref::Positive
            } else {
                TernaryPref::Neutral
            };
            users[u].prefs.set(f, p);
        }
    }
    Ok(users)
}

/// Seed of the fixed cohort that anchors bandit training outside the grid.
pub const REFERENCE_COHORT_SEED: u64 = 20_240_601;

/// The c2 cohort at [`REFERENCE_COHORT_SEED`], ids prefixed with `ref-` so
/// they never collide with real users.
pub fn reference_cohort() -> Vec<UserProfile> {
    let spec = CohortSpec::preset("c2", REFERENCE_COHORT_SEED).expect("preset exists");
    generate_cohort(&spec)
        .expect("preset is valid")
        .into_iter()
        .map(|mut u| {
            u.id = format!("ref-{}", u.id);
            u
        })
        .collect()
}

impl FromStr for Feature {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Feature::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown feature `{s}`"))
    }
}
