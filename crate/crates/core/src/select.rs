//! Item selection: random, sequential rotation, and bandit sampling.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bandit::{featurize, BoostedScorer};
use crate::catalog::Catalog;
use crate::error::BanditError;
use crate::r3::FoodRole;
use crate::users::UserProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Bandit,
    Sequential,
    Random,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Bandit, Method::Sequential, Method::Random];

    pub fn name(self) -> &'static str {
        match self {
            Method::Bandit => "bandit",
            Method::Sequential => "sequential",
            Method::Random => "random",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bandit" | "m2" => Ok(Method::Bandit),
            "sequential" | "m1" => Ok(Method::Sequential),
            "random" | "m0" => Ok(Method::Random),
            _ => Err(format!("unknown method `{s}` (expected random, sequential or bandit)")),
        }
    }
}

/// Which already-chosen items the bandit avoids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dedupe {
    #[default]
    None,
    WithinMeal,
    AcrossPlan,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BanditParams {
    pub top_k: usize,
    pub softmax_temperature: f64,
    pub dedupe: Dedupe,
}

impl Default for BanditParams {
    fn default() -> Self {
        BanditParams {
            top_k: 3,
            softmax_temperature: 0.5,
            dedupe: Dedupe::None,
        }
    }
}

/// Mutable selection state for one run: the RNG stream, the sequential
/// cursor and (for the bandit) the scorer.
#[derive(Debug, Clone)]
pub struct SelectorState {
    pub method: Method,
    pub rng_seed: u64,
    pub sequential_cursor: usize,
    pub scorer: Option<Arc<BoostedScorer>>,
    pub params: BanditParams,
    rng: ChaCha8Rng,
}

impl SelectorState {
    pub fn new(method: Method, rng_seed: u64) -> SelectorState {
        SelectorState {
            method,
            rng_seed,
            sequential_cursor: 0,
            scorer: None,
            params: BanditParams::default(),
            rng: ChaCha8Rng::seed_from_u64(rng_seed),
        }
    }

    pub fn with_scorer(mut self, scorer: Arc<BoostedScorer>) -> SelectorState {
        self.scorer = Some(scorer);
        self
    }

    pub fn with_params(mut self, params: BanditParams) -> SelectorState {
        self.params = params;
        self
    }
}

/// Indices of the `k` largest scores, best first; ties keep input order.
pub fn top_k_indices(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    idx.truncate(k);
    idx
}

pub fn select(
    state: &mut SelectorState,
    user: &UserProfile,
    role: FoodRole,
    catalog: &Catalog,
    exclude: &HashSet<String>,
) -> Result<String, BanditError> {
    if catalog.is_empty() {
        return Err(BanditError::EmptyCatalog);
    }
    let all = catalog.recipes();
    match state.method {
        Method::Random => {
            let i = state.rng.random_range(0..all.len());
            Ok(all[i].id.clone())
        }
        Method::Sequential => {
            let i = state.sequential_cursor % all.len();
            state.sequential_cursor += 1;
            Ok(all[i].id.clone())
        }
        Method::Bandit => {
            let scorer = state.scorer.clone().ok_or(BanditError::MissingScorer)?;
            let eligible = catalog.eligible(role);
            if eligible.is_empty() {
                return Err(BanditError::NoEligible(role));
            }
            let mut pool: Vec<&String> = eligible.iter().filter(|id| !exclude.contains(*id)).collect();
            if pool.is_empty() {
                pool = eligible.iter().collect();
            }
            let margins: Vec<f64> = pool
                .iter()
                .map(|id| {
                    let r = catalog.get(id).expect("eligible ids are in the catalog");
                    scorer.margin(featurize(&user.prefs, r))
                })
                .collect();
            let top = top_k_indices(&margins, state.params.top_k.max(1));
            if top.len() == 1 {
                return Ok(pool[top[0]].clone());
            }
            let probs: Vec<f64> = top.iter().map(|&i| sigmoid(margins[i])).collect();
            let t = state.params.softmax_temperature;
            let best = probs[0];
            let weights: Vec<f64> = probs.iter().map(|p| ((p - best) / t).exp()).collect();
            let dist = WeightedIndex::new(&weights).expect("softmax weights are positive");
            Ok(pool[top[dist.sample(&mut state.rng)]].clone())
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}
