use std::path::PathBuf;

use thiserror::Error;

use crate::r3::FoodRole;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum R3Error {
    #[error("invalid JSON at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema violation at `{path}`: {message}")]
    Schema { path: String, message: String },
}

impl R3Error {
    pub fn path(&self) -> Option<&str> {
        match self {
            R3Error::Schema { path, .. } => Some(path),
            R3Error::Syntax { .. } => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum KeySetError {
    #[error("reference key set is empty")]
    EmptyReference,
    #[error("no documents to build a reference from")]
    NoDocuments,
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("empty catalog: no *.json recipes in {0}")]
    Empty(PathBuf),
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}: {source}")]
    Recipe {
        file: PathBuf,
        #[source]
        source: R3Error,
    },
}

#[derive(Debug, Error, PartialEq)]
pub enum UserError {
    #[error("feature {feature}: {n_neg} negative + {n_pos} positive exceeds {n_users} users")]
    CohortOverflow {
        feature: &'static str,
        n_neg: usize,
        n_pos: usize,
        n_users: usize,
    },
    #[error("unknown cohort preset `{0}` (expected c1, c2 or c3)")]
    UnknownPreset(String),
    #[error("invalid profile at `{path}`: {message}")]
    InvalidProfile { path: String, message: String },
}

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("recipe `{0}` is not in the catalog")]
    UnknownRecipe(String),
    #[error("plan has no meals")]
    EmptyPlan,
}

#[derive(Debug, Error, PartialEq)]
pub enum BanditError {
    #[error("degenerate labels: training data needs both positive and negative examples")]
    DegenerateLabels,
    #[error("holdout fraction {0} outside [0, 1)")]
    BadHoldout(f64),
    #[error("recipe `{0}` is not in the catalog")]
    UnknownRecipe(String),
    #[error("bandit selection needs a trained scorer")]
    MissingScorer,
    #[error("no recipe can fill role {0}")]
    NoEligible(FoodRole),
    #[error("catalog is empty")]
    EmptyCatalog,
    #[error("model file: {0}")]
    Model(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("day {day}, meal `{meal}`, role {role}: {source}")]
    Selection {
        day: usize,
        meal: String,
        role: FoodRole,
        #[source]
        source: BanditError,
    },
    #[error("invalid meal config: {0}")]
    Config(String),
    #[error("malformed plan document: {0}")]
    Document(String),
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    User(#[from] UserError),
    #[error(transparent)]
    Bandit(#[from] BanditError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("experiment grid axis `{0}` is empty")]
    EmptyAxis(&'static str),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}
