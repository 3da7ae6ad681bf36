//! JSON-file persistence. Every write goes to a temporary file in the
//! store root and is renamed into place, so readers only ever see whole
//! documents.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use beacon_core::bandit::{BoostedScorer, RelationalExample};
use beacon_core::metrics::GoodnessReport;
use beacon_core::select::Method;
use beacon_core::users::{MealConfig, UserProfile};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Accept,
    Reject,
    Favorite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackEvent {
    pub user_id: String,
    pub plan_id: String,
    pub day_index: usize,
    pub meal_index: usize,
    pub action: Action,
    pub timestamp_ms: u64,
}

/// A user's feedback events and the training examples they produced.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeedbackLog {
    pub events: Vec<FeedbackEvent>,
    pub examples: Vec<RelationalExample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NutrientTotal {
    pub name: String,
    pub amount: f64,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemDetail {
    pub role: String,
    pub recipe_id: String,
    pub recipe_name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MealDetail {
    pub day_index: usize,
    pub meal_index: usize,
    pub meal_name: String,
    pub items: Vec<ItemDetail>,
    pub nutrition: Vec<NutrientTotal>,
}

/// Body of a plan response. Stored verbatim inside [`PlanRecord`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResponse {
    pub plan_id: String,
    pub user_id: String,
    pub method: Method,
    pub seed: u64,
    pub model_version: Option<u64>,
    pub meal_config: MealConfig,
    pub plan: Value,
    pub report: GoodnessReport,
    pub meals: Vec<MealDetail>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub created_at_ms: u64,
    #[serde(flatten)]
    pub response: PlanResponse,
}

pub struct Store {
    root: PathBuf,
    next_user: AtomicU64,
    next_plan: AtomicU64,
}

const DIRS: [&str; 4] = ["users", "plans", "feedback", "models"];

/// Ids are short lowercase alphanumerics; anything else cannot name a file.
pub fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit())
}

fn max_numbered(dir: &Path, prefix: &str) -> io::Result<u64> {
    let mut max = 0;
    for entry in fs::read_dir(dir)? {
        let name = entry?.file_name();
        let name = name.to_string_lossy();
        if let Some(n) = name
            .strip_suffix(".json")
            .and_then(|s| s.strip_prefix(prefix))
            .and_then(|s| s.parse::<u64>().ok())
        {
            max = max.max(n);
        }
    }
    Ok(max)
}

fn model_file(user_id: &str, version: u64) -> String {
    format!("{user_id}-v{version}.json")
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Store> {
        let root = root.into();
        for d in DIRS {
            fs::create_dir_all(root.join(d))?;
        }
        let next_user = max_numbered(&root.join("users"), "u")? + 1;
        let next_plan = max_numbered(&root.join("plans"), "p")? + 1;
        Ok(Store {
            root,
            next_user: AtomicU64::new(next_user),
            next_plan: AtomicU64::new(next_plan),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn new_user_id(&self) -> String {
        format!("u{}", self.next_user.fetch_add(1, Ordering::SeqCst))
    }

    pub fn new_plan_id(&self) -> String {
        format!("p{}", self.next_plan.fetch_add(1, Ordering::SeqCst))
    }

    fn write_json<T: Serialize>(&self, dir: &str, name: &str, value: &T) -> io::Result<()> {
        let mut text = serde_json::to_vec_pretty(value).map_err(io::Error::other)?;
        text.push(b'\n');
        let dir = self.root.join(dir);
        let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
        tmp.write_all(&text)?;
        tmp.as_file().sync_all()?;
        tmp.persist(dir.join(name)).map_err(|e| e.error)?;
        Ok(())
    }

    fn read_json<T: DeserializeOwned>(&self, dir: &str, name: &str) -> io::Result<Option<T>> {
        match fs::read(self.root.join(dir).join(name)) {
            Ok(bytes) => serde_json::from_slice(&bytes)
                .map(Some)
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{dir}/{name}: {e}"))),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn put_user(&self, user: &UserProfile) -> io::Result<()> {
        self.write_json("users", &format!("{}.json", user.id), user)
    }

    pub fn get_user(&self, id: &str) -> io::Result<Option<UserProfile>> {
        if !valid_id(id) {
            return Ok(None);
        }
        self.read_json("users", &format!("{id}.json"))
    }

    /// All stored users, ordered by numeric id.
    pub fn list_users(&self) -> io::Result<Vec<UserProfile>> {
        let mut ids: Vec<(u64, String)> = Vec::new();
        for entry in fs::read_dir(self.root.join("users"))? {
            let name = entry?.file_name().to_string_lossy().into_owned();
            if let Some(id) = name.strip_suffix(".json") {
                if let Some(n) = id.strip_prefix('u').and_then(|n| n.parse().ok()) {
                    ids.push((n, id.to_owned()));
                }
            }
        }
        ids.sort();
        let mut out = Vec::with_capacity(ids.len());
        for (_, id) in ids {
            if let Some(u) = self.get_user(&id)? {
                out.push(u);
            }
        }
        Ok(out)
    }

    pub fn put_plan(&self, plan: &PlanRecord) -> io::Result<()> {
        self.write_json("plans", &format!("{}.json", plan.response.plan_id), plan)
    }

    pub fn get_plan(&self, id: &str) -> io::Result<Option<PlanRecord>> {
        if !valid_id(id) {
            return Ok(None);
        }
        self.read_json("plans", &format!("{id}.json"))
    }

    pub fn feedback(&self, user_id: &str) -> io::Result<FeedbackLog> {
        Ok(self
            .read_json("feedback", &format!("{user_id}.json"))?
            .unwrap_or_default())
    }

    pub fn put_feedback(&self, user_id: &str, log: &FeedbackLog) -> io::Result<()> {
        self.write_json("feedback", &format!("{user_id}.json"), log)
    }

    pub fn put_model(&self, user_id: &str, version: u64, scorer: &BoostedScorer) -> io::Result<()> {
        let text = scorer.to_model_json();
        let dir = self.root.join("models");
        let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
        tmp.write_all(text.as_bytes())?;
        tmp.as_file().sync_all()?;
        tmp.persist(dir.join(model_file(user_id, version)))
            .map_err(|e| e.error)?;
        Ok(())
    }

    /// Highest stored model version for the user.
    pub fn latest_model(&self, user_id: &str) -> io::Result<Option<(u64, BoostedScorer)>> {
        let dir = self.root.join("models");
        let version = max_numbered(&dir, &format!("{user_id}-v"))?;
        if version == 0 {
            return Ok(None);
        }
        let text = fs::read_to_string(dir.join(model_file(user_id, version)))?;
        let scorer = BoostedScorer::from_model_json(&text)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))?;
        Ok(Some((version, scorer)))
    }
}
