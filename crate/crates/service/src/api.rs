use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path, Query, Request, State};
use axum::http::StatusCode;
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use beacon_core::bandit::{fit, label_pairs, BoostedScorer, RelationalExample, TrainOptions};
use beacon_core::catalog::Catalog;
use beacon_core::metrics::{goodness, GoodnessReport, MealInstance};
use beacon_core::planner::{build_plan, plan_to_value};
use beacon_core::r3::{FoodRole, Recipe};
use beacon_core::select::{BanditParams, Dedupe, Method, SelectorState};
use beacon_core::users::{default_meal_config, reference_cohort, MealConfig, MealSlotSpec, UserProfile};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::ApiError;
use crate::store::{
    Action, FeedbackEvent, ItemDetail, MealDetail, NutrientTotal, PlanRecord, PlanResponse, Store,
};

/// Seed of the fixed reference cohort mixed into every base training pool,
/// so the pool always holds both labels.
#[derive(Debug, Clone)]
pub struct ModelEntry {
    pub version: u64,
    pub scorer: Arc<BoostedScorer>,
}

pub struct AppState {
    pub catalog: Arc<Catalog>,
    pub store: Store,
    pub api_key: Option<String>,
    pub train: TrainOptions,
    user_locks: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
    models: RwLock<HashMap<String, ModelEntry>>,
}

impl AppState {
    pub fn new(catalog: Catalog, store: Store, api_key: Option<String>) -> Arc<AppState> {
        Arc::new(AppState {
            catalog: Arc::new(catalog),
            store,
            api_key,
            train: TrainOptions::default(),
            user_locks: Mutex::new(HashMap::new()),
            models: RwLock::new(HashMap::new()),
        })
    }

    fn user_lock(&self, id: &str) -> Arc<tokio::sync::Mutex<()>> {
        self.user_locks
            .lock()
            .expect("lock table poisoned")
            .entry(id.to_owned())
            .or_default()
            .clone()
    }

    /// Latest model for the user, from memory or the store.
    pub fn current_model(&self, user_id: &str) -> Result<Option<ModelEntry>, ApiError> {
        if let Some(m) = self.models.read().expect("model table poisoned").get(user_id) {
            return Ok(Some(m.clone()));
        }
        let Some((version, scorer)) = self.store.latest_model(user_id)? else {
            return Ok(None);
        };
        let entry = ModelEntry {
            version,
            scorer: Arc::new(scorer),
        };
        self.models
            .write()
            .expect("model table poisoned")
            .insert(user_id.to_owned(), entry.clone());
        Ok(Some(entry))
    }

    /// Labelled pairs of every stored user and of the reference cohort.
    pub fn base_pool(&self) -> Result<Vec<RelationalExample>, ApiError> {
        let mut users = self.store.list_users()?;
        users.extend(reference_cohort());
        Ok(label_pairs(&users, &self.catalog))
    }

    fn training_pool(&self, user_id: &str) -> Result<Vec<RelationalExample>, ApiError> {
        let mut pool = self.base_pool()?;
        pool.extend(self.store.feedback(user_id)?.examples);
        Ok(pool)
    }

    /// Train on the current pool, persist as the next version and swap it in.
    fn retrain(&self, user_id: &str) -> Result<(ModelEntry, usize), ApiError> {
        let pool = self.training_pool(user_id)?;
        let scorer = fit(&pool, &self.train).map_err(|e| ApiError::conflict(e.to_string(), format!("/users/{user_id}/retrain")))?;
        let version = self.current_model(user_id)?.map_or(1, |m| m.version + 1);
        self.store.put_model(user_id, version, &scorer)?;
        let entry = ModelEntry {
            version,
            scorer: Arc::new(scorer),
        };
        self.models
            .write()
            .expect("model table poisoned")
            .insert(user_id.to_owned(), entry.clone());
        Ok((entry, pool.len()))
    }
}

type Shared = Arc<AppState>;

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/users", post(create_user))
        .route("/users/{id}", get(get_user))
        .route("/users/{id}/plan", post(create_plan))
        .route("/users/{id}/feedback", post(post_feedback))
        .route("/users/{id}/retrain", post(retrain))
        .route("/users/{id}/history", get(history))
        .route("/plans/{id}", get(get_plan))
        .route("/plans/{id}/ingredients", get(plan_ingredients))
        .route("/recipes", get(list_recipes))
        .route("/recipes/{id}", get(get_recipe))
        .layer(middleware::from_fn_with_state(state.clone(), require_key))
        .route("/health", get(|| async { Json(json!({"status": "ok"})) }))
        .fallback(|req: Request| async move { ApiError::not_found("route", req.uri().path()) })
        .with_state(state)
}

async fn require_key(State(state): State<Shared>, req: Request, next: Next) -> Response {
    if let Some(key) = &state.api_key {
        let given = req.headers().get("x-api-key").and_then(|v| v.to_str().ok());
        if given != Some(key.as_str()) {
            return ApiError::unauthorized().into_response();
        }
    }
    next.run(req).await
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Deserialize a JSON body, reporting the failing field path.
fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let mut path = e.path().to_string();
        let message = e.inner().to_string();
        if let Some(field) = message.strip_prefix("missing field `").and_then(|s| s.split('`').next()) {
            path = if path == "." { field.to_owned() } else { format!("{path}.{field}") };
        }
        ApiError::invalid(message, path)
    })
}

fn load_user(state: &AppState, id: &str) -> Result<UserProfile, ApiError> {
    state
        .store
        .get_user(id)?
        .ok_or_else(|| ApiError::not_found("user", format!("/users/{id}")))
}

async fn create_user(State(state): State<Shared>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let mut profile: UserProfile = parse_body(&body)?;
    profile.validate().map_err(|e| match e {
        beacon_core::error::UserError::InvalidProfile { path, message } => ApiError::invalid(message, path),
        other => ApiError::invalid(other.to_string(), ""),
    })?;
    profile.id = state.store.new_user_id();
    state.store.put_user(&profile)?;
    Ok((StatusCode::CREATED, Json(json!({"id": profile.id}))))
}

async fn get_user(State(state): State<Shared>, Path(id): Path<String>) -> Result<Json<UserProfile>, ApiError> {
    Ok(Json(load_user(&state, &id)?))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanRequest {
    #[serde(default = "one")]
    days: usize,
    #[serde(default = "default_method")]
    method: Method,
    #[serde(default)]
    meal_config: Option<MealConfigBody>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    dedupe: Dedupe,
}

#[derive(Debug, Deserialize)]
struct MealConfigBody {
    slots: Vec<MealSlotSpec>,
}

fn one() -> usize {
    1
}

fn default_method() -> Method {
    Method::Bandit
}

/// Seeds stay below 2^53 so they survive a round trip through JavaScript.
fn fresh_seed() -> u64 {
    rand::random::<u64>() >> 11
}

fn nutrition(recipes: &[&Recipe]) -> Vec<NutrientTotal> {
    let mut out: Vec<NutrientTotal> = Vec::new();
    for r in recipes {
        for n in &r.macronutrients {
            let amount = n.amount().unwrap_or(0.0);
            match out.iter_mut().find(|t| t.name == n.name && t.unit == n.unit) {
                Some(t) => t.amount += amount,
                None => out.push(NutrientTotal {
                    name: n.name.clone(),
                    amount,
                    unit: n.unit.clone(),
                }),
            }
        }
    }
    out
}

fn meal_detail(catalog: &Catalog, day_index: usize, meal_index: usize, meal: &MealInstance) -> MealDetail {
    let recipes: Vec<&Recipe> = meal.filled_ids().filter_map(|id| catalog.get(id)).collect();
    MealDetail {
        day_index,
        meal_index,
        meal_name: meal.slot.meal_name.clone(),
        items: meal
            .assignments
            .iter()
            .filter_map(|a| {
                let id = a.recipe_id.as_ref()?;
                Some(ItemDetail {
                    role: a.role.plan_key().to_owned(),
                    recipe_id: id.clone(),
                    recipe_name: catalog.get(id).map(|r| r.recipe_name.clone()).unwrap_or_default(),
                })
            })
            .collect(),
        nutrition: nutrition(&recipes),
    }
}

async fn create_plan(
    State(state): State<Shared>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<PlanResponse>, ApiError> {
    let req: PlanRequest = parse_body(&body)?;
    let lock = state.user_lock(&id);
    let _guard = lock.lock().await;
    let user = load_user(&state, &id)?;
    if state.catalog.is_empty() {
        return Err(ApiError::conflict("catalog is empty", "/recipes"));
    }
    let config = match req.meal_config {
        Some(c) => MealConfig {
            slots: c.slots,
            horizon_days: req.days,
        },
        None => default_meal_config().with_horizon(req.days),
    };
    config.validate().map_err(|msg| {
        let (path, message) = msg.split_once(": ").unwrap_or(("meal_config", msg.as_str()));
        let path = if path == "horizon_days" { "days".to_owned() } else { format!("meal_config.{path}") };
        ApiError::invalid(message, path)
    })?;
    let seed = req.seed.unwrap_or_else(fresh_seed);
    let mut selector = SelectorState::new(req.method, seed).with_params(BanditParams {
        dedupe: req.dedupe,
        ..BanditParams::default()
    });
    let mut model_version = None;
    if req.method == Method::Bandit {
        let entry = match state.current_model(&id)? {
            Some(m) => m,
            None => state.retrain(&id)?.0,
        };
        model_version = Some(entry.version);
        selector = selector.with_scorer(entry.scorer);
    }
    let plan = build_plan(&mut selector, &user, &config, &state.catalog)
        .map_err(|e| ApiError::conflict(e.to_string(), format!("/users/{id}/plan")))?;
    let report = goodness(&plan.flat_meals(), &user, &state.catalog).map_err(|e| ApiError::internal(e.to_string()))?;
    let meals = plan
        .days
        .iter()
        .enumerate()
        .flat_map(|(d, ms)| ms.iter().enumerate().map(move |(m, meal)| (d, m, meal)))
        .map(|(d, m, meal)| meal_detail(&state.catalog, d, m, meal))
        .collect();
    let response = PlanResponse {
        plan_id: state.store.new_plan_id(),
        user_id: id,
        method: req.method,
        seed,
        model_version,
        meal_config: config,
        plan: plan_to_value(&plan),
        report,
        meals,
    };
    state.store.put_plan(&PlanRecord {
        created_at_ms: now_ms(),
        response: response.clone(),
    })?;
    Ok(Json(response))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeedbackRequest {
    plan_id: String,
    day_index: usize,
    meal_index: usize,
    action: Action,
    #[serde(default)]
    timestamp_ms: Option<u64>,
}

#[derive(Debug, Serialize)]
struct FeedbackResponse {
    pool_size: usize,
    added: usize,
    duplicate: bool,
}

async fn post_feedback(
    State(state): State<Shared>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<FeedbackResponse>, ApiError> {
    let req: FeedbackRequest = parse_body(&body)?;
    let lock = state.user_lock(&id);
    let _guard = lock.lock().await;
    let user = load_user(&state, &id)?;
    let record = state
        .store
        .get_plan(&req.plan_id)?
        .filter(|p| p.response.user_id == id)
        .ok_or_else(|| ApiError::not_found("plan", format!("/plans/{}", req.plan_id)))?;
    let days = record.response.plan["days"].as_array().cloned().unwrap_or_default();
    let meal = days
        .get(req.day_index)
        .and_then(|d| d["meals"].as_array().and_then(|m| m.get(req.meal_index)).cloned())
        .ok_or_else(|| {
            ApiError::conflict(
                format!("no meal at day {} index {}", req.day_index, req.meal_index),
                format!("/plans/{}", req.plan_id),
            )
        })?;
    let mut log = state.store.feedback(&id)?;
    let duplicate = log.events.iter().any(|e| {
        e.plan_id == req.plan_id && e.day_index == req.day_index && e.meal_index == req.meal_index && e.action == req.action
    });
    let mut added = 0;
    if !duplicate {
        let (label, weight) = match req.action {
            Action::Accept => (true, 1.0),
            Action::Favorite => (true, 2.0),
            Action::Reject => (false, 1.0),
        };
        for role in FoodRole::ALL {
            let Some(rid) = meal.get(role.plan_key()).and_then(Value::as_str) else { continue };
            let Some(recipe) = state.catalog.get(rid) else { continue };
            log.examples.push(RelationalExample::new(&user, recipe, label, weight));
            added += 1;
        }
        log.events.push(FeedbackEvent {
            user_id: id.clone(),
            plan_id: req.plan_id,
            day_index: req.day_index,
            meal_index: req.meal_index,
            action: req.action,
            timestamp_ms: req.timestamp_ms.unwrap_or_else(now_ms),
        });
        state.store.put_feedback(&id, &log)?;
    }
    let pool_size = state.base_pool()?.len() + log.examples.len();
    Ok(Json(FeedbackResponse {
        pool_size,
        added,
        duplicate,
    }))
}

async fn retrain(State(state): State<Shared>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let lock = state.user_lock(&id);
    let _guard = lock.lock().await;
    load_user(&state, &id)?;
    let (entry, pool_size) = state.retrain(&id)?;
    Ok(Json(json!({"version": entry.version, "pool_size": pool_size})))
}

#[derive(Debug, Serialize)]
struct HistoryEntry {
    plan_id: String,
    day_index: usize,
    accepted_at_ms: u64,
    meals: Vec<MealDetail>,
    report: GoodnessReport,
}

/// Accepted or favorited meals grouped by (plan, day), oldest first.
async fn history(State(state): State<Shared>, Path(id): Path<String>) -> Result<Json<Vec<HistoryEntry>>, ApiError> {
    let user = load_user(&state, &id)?;
    let log = state.store.feedback(&id)?;
    // (plan, day) -> (first timestamp, meal indices)
    let mut groups: BTreeMap<(String, usize), (u64, Vec<usize>)> = BTreeMap::new();
    for e in log.events.iter().filter(|e| matches!(e.action, Action::Accept | Action::Favorite)) {
        let g = groups.entry((e.plan_id.clone(), e.day_index)).or_insert((e.timestamp_ms, Vec::new()));
        g.0 = g.0.min(e.timestamp_ms);
        if !g.1.contains(&e.meal_index) {
            g.1.push(e.meal_index);
        }
    }
    let mut plans: HashMap<String, PlanRecord> = HashMap::new();
    let mut out = Vec::new();
    for ((plan_id, day), (ts, mut meal_idx)) in groups {
        if !plans.contains_key(&plan_id) {
            match state.store.get_plan(&plan_id)? {
                Some(p) => {
                    plans.insert(plan_id.clone(), p);
                }
                None => continue,
            }
        }
        let rec = &plans[&plan_id];
        let plan = beacon_core::planner::plan_from_value(&rec.response.plan)
            .map_err(|e| ApiError::internal(e.to_string()))?;
        meal_idx.sort_unstable();
        let meals: Vec<MealInstance> = meal_idx
            .iter()
            .filter_map(|&m| plan.days.get(day).and_then(|d| d.get(m)).cloned())
            .collect();
        if meals.is_empty() {
            continue;
        }
        let report = goodness(&meals, &user, &state.catalog).map_err(|e| ApiError::internal(e.to_string()))?;
        out.push(HistoryEntry {
            plan_id: plan_id.clone(),
            day_index: day,
            accepted_at_ms: ts,
            meals: meal_idx
                .iter()
                .zip(&meals)
                .map(|(&m, meal)| meal_detail(&state.catalog, day, m, meal))
                .collect(),
            report,
        });
    }
    out.sort_by(|a, b| {
        (a.accepted_at_ms, &a.plan_id, a.day_index).cmp(&(b.accepted_at_ms, &b.plan_id, b.day_index))
    });
    Ok(Json(out))
}

async fn get_plan(State(state): State<Shared>, Path(id): Path<String>) -> Result<Json<PlanRecord>, ApiError> {
    state
        .store
        .get_plan(&id)?
        .map(Json)
        .ok_or_else(|| ApiError::not_found("plan", format!("/plans/{id}")))
}

#[derive(Debug, Serialize)]
struct IngredientTotal {
    name: String,
    unit: String,
    /// Sum of numeric measures; absent when some measure is not a number.
    amount: Option<f64>,
    measures: Vec<String>,
    recipes: Vec<String>,
}

/// Every ingredient needed for the plan, merged by (name, unit).
async fn plan_ingredients(
    State(state): State<Shared>,
    Path(id): Path<String>,
) -> Result<Json<Vec<IngredientTotal>>, ApiError> {
    let rec = state
        .store
        .get_plan(&id)?
        .ok_or_else(|| ApiError::not_found("plan", format!("/plans/{id}")))?;
    let plan = beacon_core::planner::plan_from_value(&rec.response.plan).map_err(|e| ApiError::internal(e.to_string()))?;
    let mut out: Vec<IngredientTotal> = Vec::new();
    for rid in plan.assignment_ids() {
        let Some(recipe) = state.catalog.get(rid) else { continue };
        for ing in &recipe.ingredients {
            let key = (ing.name.to_lowercase(), ing.quantity.unit.clone());
            let pos = out.iter().position(|t| (t.name.to_lowercase(), t.unit.clone()) == key);
            let t = match pos {
                Some(i) => &mut out[i],
                None => {
                    out.push(IngredientTotal {
                        name: ing.name.clone(),
                        unit: ing.quantity.unit.clone(),
                        amount: Some(0.0),
                        measures: Vec::new(),
                        recipes: Vec::new(),
                    });
                    out.last_mut().expect("just pushed")
                }
            };
            t.amount = match (t.amount, parse_measure(&ing.quantity.measure)) {
                (Some(a), Some(b)) => Some(a + b),
                _ => None,
            };
            t.measures.push(ing.quantity.measure.clone());
            if !t.recipes.iter().any(|r| r == rid) {
                t.recipes.push(rid.to_owned());
            }
        }
    }
    Ok(Json(out))
}

/// Decimal or simple fraction ("1/2", "1 1/2").
fn parse_measure(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Ok(v) = s.parse::<f64>() {
        return Some(v);
    }
    let mut total = 0.0;
    for part in s.split_whitespace() {
        total += match part.split_once('/') {
            Some((a, b)) => a.parse::<f64>().ok()? / b.parse::<f64>().ok().filter(|d| *d != 0.0)?,
            None => part.parse::<f64>().ok()?,
        };
    }
    Some(total)
}

#[derive(Debug, Deserialize)]
struct RecipeQuery {
    role: Option<String>,
    category: Option<String>,
}

async fn list_recipes(
    State(state): State<Shared>,
    Query(q): Query<RecipeQuery>,
) -> Result<Json<Vec<Value>>, ApiError> {
    let role = match &q.role {
        Some(r) => Some(r.parse::<FoodRole>().map_err(|e| ApiError::invalid(e, "role"))?),
        None => None,
    };
    let rows = state
        .catalog
        .recipes()
        .iter()
        .filter(|r| role.is_none_or(|role| r.has_role(role)))
        .filter(|r| q.category.as_ref().is_none_or(|c| &r.category == c))
        .map(|r| {
            json!({
                "id": r.id,
                "recipe_name": r.recipe_name,
                "category": r.category,
                "food_role": r.food_role,
                "hasDairy": r.has_dairy,
                "hasMeat": r.has_meat,
                "hasNuts": r.has_nuts,
                "calories": r.nutrient("Calories").and_then(|n| n.amount()),
            })
        })
        .collect();
    Ok(Json(rows))
}

async fn get_recipe(State(state): State<Shared>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let r = state
        .catalog
        .get(&id)
        .ok_or_else(|| ApiError::not_found("recipe", format!("/recipes/{id}")))?;
    let mut v = serde_json::to_value(r).map_err(|e| ApiError::internal(e.to_string()))?;
    if let Value::Object(map) = &mut v {
        map.shift_insert(0, "id".into(), Value::String(r.id.clone()));
    }
    Ok(Json(v))
}
