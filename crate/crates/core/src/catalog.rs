//! Recipe corpus loading, indexing and summary statistics.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CatalogError;
use crate::r3::{parse_recipe, slugify, FoodRole, Recipe};

/// An immutable, indexed set of recipes.
#[derive(Debug, Clone, Default)]
pub struct Catalog {
    recipes: Vec<Recipe>,
    index: HashMap<String, usize>,
    by_role: BTreeMap<FoodRole, Vec<String>>,
    by_category: BTreeMap<String, Vec<String>>,
}

impl Catalog {
    /// Build a catalog in the given order. Ids are taken from `recipe.id`
    /// (or the slugified name when empty); repeats get `-2`, `-3`, ...
    pub fn new(recipes: Vec<Recipe>) -> Catalog {
        let mut cat = Catalog::default();
        for mut r in recipes {
            let base = if r.id.is_empty() {
                slugify(&r.recipe_name)
            } else {
                r.id.clone()
            };
            let mut id = base.clone();
            let mut n = 2;
            while cat.index.contains_key(&id) {
                id = format!("{base}-{n}");
                n += 1;
            }
            r.id = id.clone();
            for role in r.roles() {
                cat.by_role.entry(role).or_default().push(id.clone());
            }
            cat.by_category
                .entry(r.category.clone())
                .or_default()
                .push(id.clone());
            cat.index.insert(id, cat.recipes.len());
            cat.recipes.push(r);
        }
        cat
    }

    pub fn recipes(&self) -> &[Recipe] {
        &self.recipes
    }

    pub fn len(&self) -> usize {
        self.recipes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.recipes.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Recipe> {
        self.index.get(id).map(|&i| &self.recipes[i])
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.recipes.iter().map(|r| r.id.as_str())
    }

    pub fn by_role(&self) -> &BTreeMap<FoodRole, Vec<String>> {
        &self.by_role
    }

    pub fn by_category(&self) -> &BTreeMap<String, Vec<String>> {
        &self.by_category
    }

    /// Ids of recipes that can fill `role`, in catalog order.
    pub fn eligible(&self, role: FoodRole) -> &[String] {
        self.by_role.get(&role).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Load every `*.json` file in `dir`, sorted by file name. Any invalid
/// file aborts the load.
pub fn load_catalog(dir: impl AsRef<Path>) -> Result<Catalog, CatalogError> {
    let dir = dir.as_ref();
    let io = |path: &Path, source| CatalogError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut files: Vec<PathBuf> = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| io(dir, e))? {
        let path = entry.map_err(|e| io(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "json") {
            files.push(path);
        }
    }
    if files.is_empty() {
        return Err(CatalogError::Empty(dir.to_path_buf()));
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    let mut recipes = Vec::with_capacity(files.len());
    for file in files {
        let raw = std::fs::read_to_string(&file).map_err(|e| io(&file, e))?;
        let recipe = parse_recipe(&raw).map_err(|source| CatalogError::Recipe {
            file: file.clone(),
            source,
        })?;
        recipes.push(recipe);
    }
    Ok(Catalog::new(recipes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryStats {
    pub category: String,
    pub pct_nuts: f64,
    pub pct_meat: f64,
    pub pct_dairy: f64,
    pub total: usize,
    pub n_nuts: usize,
    pub n_meat: usize,
    pub n_dairy: usize,
}

impl CategoryStats {
    fn from_recipes<'a>(category: &str, recipes: impl Iterator<Item = &'a Recipe>) -> Self {
        let (mut total, mut n_nuts, mut n_meat, mut n_dairy) = (0, 0, 0, 0);
        for r in recipes {
            total += 1;
            n_nuts += r.has_nuts as usize;
            n_meat += r.has_meat as usize;
            n_dairy += r.has_dairy as usize;
        }
        CategoryStats {
            category: category.to_owned(),
            pct_nuts: pct1(n_nuts, total),
            pct_meat: pct1(n_meat, total),
            pct_dairy: pct1(n_dairy, total),
            total,
            n_nuts,
            n_meat,
            n_dairy,
        }
    }
}

/// `100 * count / total` rounded half-up to one decimal.
fn pct1(count: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    // integer arithmetic so that e.g. 1/8 = 12.5 is exact before rounding
    let tenths = (2000 * count + total) / (2 * total);
    tenths as f64 / 10.0
}

/// One row per category, sorted by name, then an `all` row.
pub fn stats(catalog: &Catalog) -> Vec<CategoryStats> {
    let mut rows: Vec<CategoryStats> = catalog
        .by_category
        .iter()
        .map(|(cat, ids)| {
            CategoryStats::from_recipes(cat, ids.iter().filter_map(|id| catalog.get(id)))
        })
        .collect();
    rows.push(CategoryStats::from_recipes("all", catalog.recipes.iter()));
    rows
}

pub fn stats_table(rows: &[CategoryStats]) -> String {
    let width = rows
        .iter()
        .map(|r| r.category.chars().count())
        .max()
        .unwrap_or(0)
        .max("category".len());
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<width$}  {:>7}  {:>7}  {:>8}  {:>5}",
        "category", "hasNuts", "hasMeat", "hasDairy", "total"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<width$}  {:>7.1}  {:>7.1}  {:>8.1}  {:>5}",
            r.category, r.pct_nuts, r.pct_meat, r.pct_dairy, r.total
        );
    }
    out
}

pub fn stats_csv(rows: &[CategoryStats]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["category", "pct_nuts", "pct_meat", "pct_dairy", "total"])
        .expect("in-memory write");
    for r in rows {
        w.write_record([
            r.category.clone(),
            format!("{:.1}", r.pct_nuts),
            format!("{:.1}", r.pct_meat),
            format!("{:.1}", r.pct_dairy),
            r.total.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}
