use std::sync::Arc;

use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use beacon_core::bandit::{self, BoostedScorer, TrainOptions};
use beacon_core::catalog::{self, Catalog};
use beacon_core::harness::{emit_csv, run_grid, ExperimentGrid};
use beacon_core::metrics;
use beacon_core::planner::{build_plan, emit_plan, parse_plan};
use beacon_core::select::{BanditParams, Dedupe, Method, SelectorState};
use beacon_core::users::{self, default_meal_config, parse_profile, CohortSpec, UserProfile};
use beacon_core::r3::FoodRole;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Hand a serializable value to Python as plain dicts and lists.
fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(err)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn profile(raw: &str) -> PyResult<UserProfile> {
    parse_profile(raw).map_err(err)
}

#[pyclass(name = "Catalog", module = "beacon", frozen)]
struct PyCatalog {
    inner: Arc<Catalog>,
}

#[pymethods]
impl PyCatalog {
    /// Load every `*.json` recipe in a directory.
    #[staticmethod]
    fn load(dir: &str) -> PyResult<Self> {
        let inner = catalog::load_catalog(dir).map_err(err)?;
        Ok(PyCatalog { inner: Arc::new(inner) })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Catalog({} recipes)", self.inner.len())
    }

    fn ids(&self) -> Vec<String> {
        self.inner.ids().map(str::to_owned).collect()
    }

    fn recipe(&self, py: Python<'_>, id: &str) -> PyResult<Py<PyAny>> {
        let r = self.inner.get(id).ok_or_else(|| PyKeyError::new_err(id.to_owned()))?;
        to_py(py, r)
    }

    /// Canonical JSON text of a recipe.
    fn canonical_json(&self, id: &str) -> PyResult<String> {
        let r = self.inner.get(id).ok_or_else(|| PyKeyError::new_err(id.to_owned()))?;
        Ok(r.to_canonical_json())
    }

    fn eligible(&self, role: &str) -> PyResult<Vec<String>> {
        let role: FoodRole = role.parse().map_err(err)?;
        Ok(self.inner.eligible(role).to_vec())
    }

    fn stats(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &catalog::stats(&self.inner))
    }
}

#[pyclass(name = "Scorer", module = "beacon", frozen)]
struct PyScorer {
    inner: Arc<BoostedScorer>,
}

#[pymethods]
impl PyScorer {
    /// Fit on the labelled pairs of a preset cohort. Returns the scorer and
    /// its holdout accuracy.
    #[staticmethod]
    #[pyo3(signature = (catalog, config = "c2", seed = 0, holdout = bandit::DEFAULT_HOLDOUT_FRACTION))]
    fn train(catalog: &PyCatalog, config: &str, seed: u64, holdout: f64) -> PyResult<(Self, f64)> {
        let spec = CohortSpec::preset(config, seed).map_err(err)?;
        let cohort = users::generate_cohort(&spec).map_err(err)?;
        let pairs = bandit::label_pairs(&cohort, &catalog.inner);
        let (scorer, held) = bandit::train_bandit(&pairs, seed, holdout).map_err(err)?;
        let acc = if held.is_empty() { f64::NAN } else { bandit::accuracy(&scorer, &held) };
        Ok((PyScorer { inner: Arc::new(scorer) }, acc))
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = BoostedScorer::from_model_json(text).map_err(err)?;
        Ok(PyScorer { inner: Arc::new(inner) })
    }

    fn to_json(&self) -> String {
        self.inner.to_model_json()
    }

    fn __len__(&self) -> usize {
        self.inner.stages.len()
    }

    /// Probability that the user likes the recipe.
    fn score(&self, catalog: &PyCatalog, user_json: &str, recipe_id: &str) -> PyResult<f64> {
        bandit::score(&self.inner, &profile(user_json)?, recipe_id, &catalog.inner).map_err(err)
    }
}

/// Build a plan and return its JSON text.
#[pyfunction]
#[pyo3(signature = (catalog, user_json, method = "bandit", days = 1, seed = 0, scorer = None, dedupe = "none"))]
fn recommend(
    catalog: &PyCatalog,
    user_json: &str,
    method: &str,
    days: usize,
    seed: u64,
    scorer: Option<&PyScorer>,
    dedupe: &str,
) -> PyResult<String> {
    let user = profile(user_json)?;
    let method: Method = method.parse().map_err(err)?;
    let dedupe = match dedupe {
        "none" => Dedupe::None,
        "within_meal" => Dedupe::WithinMeal,
        "across_plan" => Dedupe::AcrossPlan,
        other => return Err(PyValueError::new_err(format!("unknown dedupe `{other}`"))),
    };
    let params = BanditParams { dedupe, ..BanditParams::default() };
    let mut state = SelectorState::new(method, seed).with_params(params);
    if method == Method::Bandit {
        let s = match scorer {
            Some(s) => s.inner.clone(),
            None => {
                let mut pool = users::reference_cohort();
                pool.push(user.clone());
                let pairs = bandit::label_pairs(&pool, &catalog.inner);
                Arc::new(bandit::fit(&pairs, &TrainOptions::default()).map_err(err)?)
            }
        };
        state = state.with_scorer(s);
    }
    let config = default_meal_config().with_horizon(days);
    let plan = build_plan(&mut state, &user, &config, &catalog.inner).map_err(err)?;
    Ok(emit_plan(&plan))
}

/// Goodness report (uc, dm, mc and their combinations) of a plan document.
#[pyfunction]
fn goodness(py: Python<'_>, catalog: &PyCatalog, plan_json: &str, user_json: &str) -> PyResult<Py<PyAny>> {
    let plan = parse_plan(plan_json).map_err(err)?;
    let report = metrics::goodness(&plan.flat_meals(), &profile(user_json)?, &catalog.inner).map_err(err)?;
    to_py(py, &report)
}

/// Returns `(error_count, repaired, document)`; the document is None when
/// the text could not be repaired within budget.
#[pyfunction]
fn lenient_decode(py: Python<'_>, text: &str) -> PyResult<(usize, bool, Py<PyAny>)> {
    let report = beacon_core::decode::lenient_decode(text);
    let doc = match &report.document {
        Some(v) => to_py(py, v)?,
        None => py.None(),
    };
    Ok((report.error_count, report.repaired, doc))
}

#[pyfunction]
#[pyo3(signature = (config, seed = 0))]
fn generate_cohort(py: Python<'_>, config: &str, seed: u64) -> PyResult<Py<PyAny>> {
    let spec = CohortSpec::preset(config, seed).map_err(err)?;
    to_py(py, &users::generate_cohort(&spec).map_err(err)?)
}

/// Run the default method-comparison grid and return the CSV text.
#[pyfunction]
#[pyo3(signature = (catalog, seeds = 10))]
fn simulate(py: Python<'_>, catalog: &PyCatalog, seeds: u64) -> PyResult<String> {
    let grid = ExperimentGrid::default_with_seeds(seeds);
    let cat = catalog.inner.clone();
    let rows = py.detach(move || run_grid(&grid, &cat)).map_err(err)?;
    Ok(emit_csv(&rows))
}

#[pymodule]
fn beacon(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCatalog>()?;
    m.add_class::<PyScorer>()?;
    m.add_function(wrap_pyfunction!(recommend, m)?)?;
    m.add_function(wrap_pyfunction!(goodness, m)?)?;
    m.add_function(wrap_pyfunction!(lenient_decode, m)?)?;
    m.add_function(wrap_pyfunction!(generate_cohort, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
