//! Relational boosted scorer: (user, recipe) pairs featurized into
//! preference/content predicates and their conjunctions, scored by
//! gradient-boosted decision stumps under logistic loss.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::error::BanditError;
use crate::r3::Recipe;
use crate::users::{Feature, Prefs, TernaryPref, UserProfile};

pub const N_FEATURES: usize = 15;
pub const MODEL_FORMAT: &str = "beacon-bandit";
pub const MODEL_VERSION: u32 = 1;

const PREDICATES: [&str; 5] = ["pref_neg", "pref_pos", "has", "neg_and_has", "pos_and_has"];

/// Names of the 15 binary features, in bit order.
pub fn feature_names() -> Vec<String> {
    Feature::ALL
        .iter()
        .flat_map(|f| PREDICATES.iter().map(move |p| format!("{p}_{f}")))
        .collect()
}

/// Bit mask of the pair's features: bit `5*f + k` for feature `f` and
/// predicate `k` of [`feature_names`].
pub fn featurize(prefs: &Prefs, recipe: &Recipe) -> u16 {
    let mut mask = 0u16;
    for f in Feature::ALL {
        let pref = prefs.get(f);
        let neg = pref == TernaryPref::Negative;
        let pos = pref == TernaryPref::Positive;
        let has = f.present_in(recipe);
        let bits = [neg, pos, has, neg && has, pos && has];
        for (k, b) in bits.into_iter().enumerate() {
            if b {
                mask |= 1 << (5 * f.index() + k);
            }
        }
    }
    mask
}

/// Positive iff the recipe hits none of the user's -1 features and, when
/// the user has +1 features, contains at least one of them.
pub fn pair_label(prefs: &Prefs, recipe: &Recipe) -> bool {
    let mut any_pos = false;
    let mut hit_pos = false;
    for (f, p) in prefs.non_neutral() {
        let has = f.present_in(recipe);
        match p {
            TernaryPref::Negative if has => return false,
            TernaryPref::Positive => {
                any_pos = true;
                hit_pos |= has;
            }
            _ => {}
        }
    }
    !any_pos || hit_pos
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationalExample {
    pub user_id: String,
    pub recipe_id: String,
    pub features: u16,
    pub label: bool,
    #[serde(default = "unit_weight")]
    pub weight: f64,
}

fn unit_weight() -> f64 {
    1.0
}

impl RelationalExample {
    pub fn new(user: &UserProfile, recipe: &Recipe, label: bool, weight: f64) -> Self {
        RelationalExample {
            user_id: user.id.clone(),
            recipe_id: recipe.id.clone(),
            features: featurize(&user.prefs, recipe),
            label,
            weight,
        }
    }

    pub fn feature_vector(&self) -> [bool; N_FEATURES] {
        std::array::from_fn(|i| self.features >> i & 1 == 1)
    }
}

/// One example per (user, recipe), users outermost.
pub fn label_pairs(cohort: &[UserProfile], catalog: &Catalog) -> Vec<RelationalExample> {
    let mut out = Vec::with_capacity(cohort.len() * catalog.len());
    for user in cohort {
        for recipe in catalog.recipes() {
            out.push(RelationalExample::new(
                user,
                recipe,
                pair_label(&user.prefs, recipe),
                1.0,
            ));
        }
    }
    out
}

/// Depth-1 regression tree on one binary feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: usize,
    /// Output when the feature is 0.
    pub left: f64,
    /// Output when the feature is 1.
    pub right: f64,
}

impl Stump {
    pub fn output(&self, mask: u16) -> f64 {
        if mask >> self.feature & 1 == 1 {
            self.right
        } else {
            self.left
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedScorer {
    pub stages: Vec<Stump>,
    pub learning_rate: f64,
    pub n_rounds: usize,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl BoostedScorer {
    pub fn empty(learning_rate: f64) -> BoostedScorer {
        BoostedScorer {
            stages: Vec::new(),
            learning_rate,
            n_rounds: 0,
        }
    }

    /// Sum of stage outputs (the learning rate is folded into the stages).
    pub fn margin(&self, mask: u16) -> f64 {
        self.stages.iter().map(|s| s.output(mask)).sum()
    }

    pub fn probability(&self, mask: u16) -> f64 {
        sigmoid(self.margin(mask))
    }

    pub fn to_model_json(&self) -> String {
        let file = ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            feature_names: feature_names(),
            learning_rate: self.learning_rate,
            n_rounds: self.n_rounds,
            stages: self.stages.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_model_json(raw: &str) -> Result<BoostedScorer, BanditError> {
        let file: ModelFile =
            serde_json::from_str(raw).map_err(|e| BanditError::Model(e.to_string()))?;
        if file.format != MODEL_FORMAT {
            return Err(BanditError::Model(format!("unexpected format `{}`", file.format)));
        }
        if file.version != MODEL_VERSION {
            return Err(BanditError::Model(format!("unsupported version {}", file.version)));
        }
        if file.feature_names != feature_names() {
            return Err(BanditError::Model("feature names do not match".into()));
        }
        if let Some(s) = file.stages.iter().find(|s| s.feature >= N_FEATURES) {
            return Err(BanditError::Model(format!("stage feature {} out of range", s.feature)));
        }
        Ok(BoostedScorer {
            stages: file.stages,
            learning_rate: file.learning_rate,
            n_rounds: file.n_rounds,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    feature_names: Vec<String>,
    learning_rate: f64,
    n_rounds: usize,
    stages: Vec<Stump>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub n_rounds: usize,
    pub learning_rate: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            n_rounds: 50,
            learning_rate: 0.1,
        }
    }
}

pub const DEFAULT_HOLDOUT_FRACTION: f64 = 0.2;

/// Seeded train/holdout split followed by [`fit`] on the training part.
pub fn train_bandit(
    examples: &[RelationalExample],
    split_seed: u64,
    holdout_fraction: f64,
) -> Result<(BoostedScorer, Vec<RelationalExample>), BanditError> {
    train_bandit_with(examples, split_seed, holdout_fraction, &TrainOptions::default())
}

pub fn train_bandit_with(
    examples: &[RelationalExample],
    split_seed: u64,
    holdout_fraction: f64,
    opts: &TrainOptions,
) -> Result<(BoostedScorer, Vec<RelationalExample>), BanditError> {
    if !(0.0..1.0).contains(&holdout_fraction) {
        return Err(BanditError::BadHoldout(holdout_fraction));
    }
    let (train, holdout) = split(examples, split_seed, holdout_fraction);
    let scorer = fit(&train, opts)?;
    Ok((scorer, holdout))
}

fn split(
    examples: &[RelationalExample],
    seed: u64,
    fraction: f64,
) -> (Vec<RelationalExample>, Vec<RelationalExample>) {
    let n_hold = (examples.len() as f64 * fraction).floor() as usize;
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut held = vec![false; examples.len()];
    for &i in &order[..n_hold] {
        held[i] = true;
    }
    let (mut train, mut hold) = (Vec::new(), Vec::new());
    for (e, h) in examples.iter().zip(held) {
        if h {
            hold.push(e.clone());
        } else {
            train.push(e.clone());
        }
    }
    (train, hold)
}

/// Fit on all examples. Training sees only the weighted count of each
/// (feature mask, label) pattern, so repeating the data changes nothing.
pub fn fit(examples: &[RelationalExample], opts: &TrainOptions) -> Result<BoostedScorer, BanditError> {
    let mut patterns: BTreeMap<(u16, bool), f64> = BTreeMap::new();
    for e in examples.iter().filter(|e| e.weight > 0.0) {
        *patterns.entry((e.features, e.label)).or_insert(0.0) += e.weight;
    }
    let has_pos = patterns.keys().any(|&(_, l)| l);
    let has_neg = patterns.keys().any(|&(_, l)| !l);
    if !(has_pos && has_neg) {
        return Err(BanditError::DegenerateLabels);
    }
    let rows: Vec<(u16, f64, f64)> = patterns
        .into_iter()
        .map(|((m, l), w)| (m, if l { 1.0 } else { 0.0 }, w))
        .collect();
    let mut f = vec![0.0f64; rows.len()];
    let mut stages = Vec::with_capacity(opts.n_rounds);
    for _ in 0..opts.n_rounds {
        // per side: [Σw, Σw·r, Σw·h]
        let mut sums = [[[0.0f64; 3]; 2]; N_FEATURES];
        for (&(mask, y, w), &fi) in rows.iter().zip(&f) {
            let p = sigmoid(fi);
            let r = y - p;
            let h = p * (1.0 - p);
            for (j, s) in sums.iter_mut().enumerate() {
                let side = &mut s[(mask >> j & 1) as usize];
                side[0] += w;
                side[1] += w * r;
                side[2] += w * h;
            }
        }
        let gain = |s: &[[f64; 3]; 2]| {
            s.iter()
                .filter(|side| side[0] > 0.0)
                .map(|side| side[1] * side[1] / side[0])
                .sum::<f64>()
        };
        let mut best = 0;
        let mut best_gain = gain(&sums[0]);
        for (j, s) in sums.iter().enumerate().skip(1) {
            let g = gain(s);
            if g > best_gain {
                best = j;
                best_gain = g;
            }
        }
        let leaf = |side: &[f64; 3]| {
            if side[2] > 1e-12 {
                opts.learning_rate * side[1] / side[2]
            } else {
                0.0
            }
        };
        let stump = Stump {
            feature: best,
            left: leaf(&sums[best][0]),
            right: leaf(&sums[best][1]),
        };
        for (&(mask, _, _), fi) in rows.iter().zip(f.iter_mut()) {
            *fi += stump.output(mask);
        }
        stages.push(stump);
    }
    Ok(BoostedScorer {
        stages,
        learning_rate: opts.learning_rate,
        n_rounds: opts.n_rounds,
    })
}

/// Probability that `user` likes `recipe_id`.
pub fn score(
    scorer: &BoostedScorer,
    user: &UserProfile,
    recipe_id: &str,
    catalog: &Catalog,
) -> Result<f64, BanditError> {
    let recipe = catalog
        .get(recipe_id)
        .ok_or_else(|| BanditError::UnknownRecipe(recipe_id.to_owned()))?;
    Ok(scorer.probability(featurize(&user.prefs, recipe)))
}

/// Unweighted share of examples classified correctly at threshold 0.5.
pub fn accuracy(scorer: &BoostedScorer, examples: &[RelationalExample]) -> f64 {
    if examples.is_empty() {
        return f64::NAN;
    }
    let correct = examples
        .iter()
        .filter(|e| (scorer.probability(e.features) > 0.5) == e.label)
        .count();
    correct as f64 / examples.len() as f64
}

/// Mean negative log-likelihood, probabilities clipped to [1e-15, 1 - 1e-15].
pub fn log_loss(scorer: &BoostedScorer, examples: &[RelationalExample]) -> f64 {
    if examples.is_empty() {
        return f64::NAN;
    }
    let total: f64 = examples
        .iter()
        .map(|e| {
            let p = scorer.probability(e.features).clamp(1e-15, 1.0 - 1e-15);
            if e.label {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    total / examples.len() as f64
}
