//! The R3 (rich recipe representation) document model.
//!
//! One recipe per JSON document. Field names follow the published R3 layout
//! (`food_role`, `hasDairy`, `background_knowledge`, ...); unknown top-level
//! keys are kept in [`Recipe::extra`] so the document survives a round trip.

use std::collections::BTreeSet;
use std::fmt;

use serde::de::{self, MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};

use crate::error::R3Error;

/// The role a recipe can play inside a meal.
///
/// Declaration order is the fill order used by the planner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FoodRole {
    #[serde(rename = "Main Course", alias = "Main", alias = "main_course")]
    MainCourse,
    #[serde(alias = "Side Dish", alias = "side")]
    Side,
    #[serde(alias = "dessert")]
    Dessert,
    #[serde(alias = "beverage")]
    Beverage,
}

impl FoodRole {
    pub const ALL: [FoodRole; 4] = [
        FoodRole::MainCourse,
        FoodRole::Side,
        FoodRole::Dessert,
        FoodRole::Beverage,
    ];

    /// Display label as written in R3 documents.
    pub fn label(self) -> &'static str {
        match self {
            FoodRole::MainCourse => "Main Course",
            FoodRole::Side => "Side",
            FoodRole::Dessert => "Dessert",
            FoodRole::Beverage => "Beverage",
        }
    }

    /// snake_case key used in emitted meal plans.
    pub fn plan_key(self) -> &'static str {
        match self {
            FoodRole::MainCourse => "main_course",
            FoodRole::Side => "side",
            FoodRole::Dessert => "dessert",
            FoodRole::Beverage => "beverage",
        }
    }

    pub fn from_plan_key(key: &str) -> Option<FoodRole> {
        FoodRole::ALL.into_iter().find(|r| r.plan_key() == key)
    }
}

impl fmt::Display for FoodRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for FoodRole {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace([' ', '-'], "_");
        match norm.as_str() {
            "main" | "main_course" | "maincourse" => Ok(FoodRole::MainCourse),
            "side" | "side_dish" => Ok(FoodRole::Side),
            "dessert" => Ok(FoodRole::Dessert),
            "beverage" | "drink" => Ok(FoodRole::Beverage),
            _ => Err(format!("unknown food role `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quantity {
    pub measure: String,
    #[serde(default)]
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Allergies {
    #[serde(default)]
    pub id: String,
    #[serde(default)]
    pub category: Vec<String>,
    #[serde(default, rename = "ref")]
    pub references: Vec<String>,
    #[serde(default)]
    pub details: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ingredient {
    pub name: String,
    pub quantity: Quantity,
    #[serde(default)]
    pub allergies: Allergies,
    #[serde(default)]
    pub alternative: String,
    #[serde(default)]
    pub quality_characteristic: String,
    #[serde(default)]
    pub image: String,
}

impl Ingredient {
    pub fn allergen_categories(&self) -> BTreeSet<&str> {
        self.allergies.category.iter().map(String::as_str).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NutrientAmount {
    pub name: String,
    pub measure: String,
    pub unit: String,
}

impl NutrientAmount {
    /// Parsed numeric amount. Validated recipes always have one.
    pub fn amount(&self) -> Option<f64> {
        self.measure.trim().parse::<f64>().ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BackgroundKnowledge {
    #[serde(default)]
    pub tool: Vec<String>,
    #[serde(default)]
    pub failure: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionTask {
    pub action_name: String,
    #[serde(default)]
    pub output_quality: Vec<String>,
    #[serde(default)]
    pub background_knowledge: BackgroundKnowledge,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Modality {
    #[serde(default)]
    pub image: Vec<String>,
    #[serde(default)]
    pub video: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Instruction {
    #[serde(default)]
    pub original_text: String,
    #[serde(default)]
    pub input_condition: Vec<String>,
    #[serde(default, alias = "task")]
    pub tasks: Vec<InstructionTask>,
    #[serde(default)]
    pub output_condition: Vec<String>,
    #[serde(default)]
    pub modality: Modality,
}

/// A recipe in the R3 representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recipe {
    /// Catalog key. Not part of the document; derived from the name.
    #[serde(skip)]
    pub id: String,
    pub recipe_name: String,
    #[serde(default)]
    pub category: String,
    pub food_role: Vec<FoodRole>,
    #[serde(default, with = "nutrient_map")]
    pub macronutrients: Vec<NutrientAmount>,
    #[serde(default)]
    pub ingredients: Vec<Ingredient>,
    #[serde(default, rename = "hasDairy")]
    pub has_dairy: bool,
    #[serde(default, rename = "hasMeat")]
    pub has_meat: bool,
    #[serde(default, rename = "hasNuts")]
    pub has_nuts: bool,
    #[serde(default)]
    pub prep_time: u32,
    #[serde(default)]
    pub cook_time: u32,
    #[serde(default = "one")]
    pub serves: u32,
    #[serde(default)]
    pub instructions: Vec<Instruction>,
    /// Top-level keys outside the schema, preserved verbatim.
    #[serde(flatten, skip_deserializing)]
    pub extra: Map<String, Value>,
}

fn one() -> u32 {
    1
}

impl Recipe {
    pub fn has_role(&self, role: FoodRole) -> bool {
        self.food_role.contains(&role)
    }

    pub fn roles(&self) -> BTreeSet<FoodRole> {
        self.food_role.iter().copied().collect()
    }

    pub fn nutrient(&self, name: &str) -> Option<&NutrientAmount> {
        self.macronutrients
            .iter()
            .find(|n| n.name.eq_ignore_ascii_case(name))
    }

    /// Canonical document form: two-space pretty JSON with a trailing newline.
    pub fn to_canonical_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("recipe serializes");
        out.push('\n');
        out
    }
}

/// Lowercase ASCII slug: runs of non-alphanumerics collapse to one `-`.
pub fn slugify(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    let mut pending_dash = false;
    for c in name.chars() {
        if c.is_ascii_alphanumeric() {
            if pending_dash && !out.is_empty() {
                out.push('-');
            }
            pending_dash = false;
            out.push(c.to_ascii_lowercase());
        } else if c == '\'' {
            // "McDonald's" -> "mcdonalds"
        } else {
            pending_dash = true;
        }
    }
    if out.is_empty() {
        out.push_str("recipe");
    }
    out
}

const KNOWN_KEYS: [&str; 12] = [
    "recipe_name",
    "category",
    "food_role",
    "macronutrients",
    "ingredients",
    "hasDairy",
    "hasMeat",
    "hasNuts",
    "prep_time",
    "cook_time",
    "serves",
    "instructions",
];

/// Parse and validate one R3 document.
pub fn parse_recipe(raw: &str) -> Result<Recipe, R3Error> {
    let value: Value = serde_json::from_str(raw).map_err(|e| R3Error::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    recipe_from_value(&value)
}

/// Build a recipe from an already-parsed document.
pub fn recipe_from_value(value: &Value) -> Result<Recipe, R3Error> {
    let mut recipe: Recipe = serde_path_to_error::deserialize(value).map_err(|err| {
        let mut path = err.path().to_string();
        let message = strip_position(&err.inner().to_string());
        if let Some(field) = message
            .strip_prefix("missing field `")
            .and_then(|rest| rest.split('`').next())
        {
            path = if path == "." {
                field.to_owned()
            } else {
                format!("{path}.{field}")
            };
        }
        R3Error::Schema { path, message }
    })?;
    if let Value::Object(map) = value {
        recipe.extra = map
            .iter()
            .filter(|(k, _)| !KNOWN_KEYS.contains(&k.as_str()))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
    }
    validate(&recipe)?;
    recipe.id = slugify(&recipe.recipe_name);
    Ok(recipe)
}

fn strip_position(msg: &str) -> String {
    match msg.find(" at line ") {
        Some(i) => msg[..i].to_owned(),
        None => msg.to_owned(),
    }
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> R3Error {
    R3Error::Schema {
        path: path.into(),
        message: message.into(),
    }
}

fn is_condition_token(s: &str) -> bool {
    !s.is_empty()
        && s.split('_').all(|part| {
            !part.is_empty()
                && part
                    .chars()
                    .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit())
        })
}

/// Check the invariants serde cannot express.
pub fn validate(recipe: &Recipe) -> Result<(), R3Error> {
    if recipe.recipe_name.trim().is_empty() {
        return Err(schema("recipe_name", "must not be empty"));
    }
    if recipe.food_role.is_empty() {
        return Err(schema("food_role", "at least one food role is required"));
    }
    let mut seen = BTreeSet::new();
    for (i, role) in recipe.food_role.iter().enumerate() {
        if !seen.insert(*role) {
            return Err(schema(format!("food_role[{i}]"), format!("duplicate role {role}")));
        }
    }
    if recipe.serves == 0 {
        return Err(schema("serves", "must be at least 1"));
    }
    for (i, ing) in recipe.ingredients.iter().enumerate() {
        if ing.name.trim().is_empty() {
            return Err(schema(format!("ingredients[{i}].name"), "must not be empty"));
        }
        if ing.quantity.measure.trim().is_empty() {
            return Err(schema(
                format!("ingredients[{i}].quantity.measure"),
                "must not be empty",
            ));
        }
    }
    for n in &recipe.macronutrients {
        match n.amount() {
            Some(v) if v >= 0.0 && v.is_finite() => {}
            _ => {
                return Err(schema(
                    format!("macronutrients.{}.measure", n.name),
                    format!("`{}` is not a non-negative number", n.measure),
                ))
            }
        }
    }
    for (i, ins) in recipe.instructions.iter().enumerate() {
        if !ins.original_text.trim().is_empty() && ins.tasks.is_empty() {
            return Err(schema(
                format!("instructions[{i}].tasks"),
                "an instruction with text needs at least one task",
            ));
        }
        for (j, task) in ins.tasks.iter().enumerate() {
            if task.action_name.trim().is_empty() {
                return Err(schema(
                    format!("instructions[{i}].tasks[{j}].action_name"),
                    "must not be empty",
                ));
            }
        }
        for (field, tokens) in [
            ("input_condition", &ins.input_condition),
            ("output_condition", &ins.output_condition),
        ] {
            if let Some((j, bad)) = tokens
                .iter()
                .enumerate()
                .find(|(_, t)| !is_condition_token(t))
            {
                return Err(schema(
                    format!("instructions[{i}].{field}[{j}]"),
                    format!("`{bad}` is not a snake_case condition token"),
                ));
            }
        }
    }
    Ok(())
}

/// `macronutrients` is an object keyed by nutrient name; keep document order.
mod nutrient_map {
    use super::*;

    #[derive(Serialize, Deserialize)]
    struct Amount {
        measure: String,
        #[serde(default)]
        unit: String,
    }

    pub fn serialize<S: Serializer>(v: &[NutrientAmount], s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(v.len()))?;
        for n in v {
            map.serialize_entry(
                &n.name,
                &Amount {
                    measure: n.measure.clone(),
                    unit: n.unit.clone(),
                },
            )?;
        }
        map.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<NutrientAmount>, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Vec<NutrientAmount>;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an object of nutrient name to {measure, unit}")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Self::Value, A::Error> {
                let mut out: Vec<NutrientAmount> = Vec::new();
                while let Some((name, amount)) = map.next_entry::<String, Amount>()? {
                    if out.iter().any(|n| n.name == name) {
                        return Err(de::Error::custom(format!("duplicate nutrient `{name}`")));
                    }
                    out.push(NutrientAmount {
                        name,
                        measure: amount.measure,
                        unit: amount.unit,
                    });
                }
                Ok(out)
            }
        }
        d.deserialize_map(V)
    }
}
