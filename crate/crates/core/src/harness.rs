//! Simulation grid: cohorts × horizons × methods × seeds, scored and
//! averaged into a comparison table.

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bandit::{label_pairs, train_bandit_with, TrainOptions, DEFAULT_HOLDOUT_FRACTION};
use crate::catalog::Catalog;
use crate::error::HarnessError;
use crate::metrics::goodness;
use crate::planner::build_plan;
use crate::select::{BanditParams, Method, SelectorState};
use crate::users::{default_meal_config, generate_cohort, CohortSpec, Feature, MealConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentGrid {
    pub configs: Vec<CohortSpec>,
    pub horizons: Vec<usize>,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub meal_config: MealConfig,
    pub bandit: BanditParams,
    pub train: TrainOptions,
    pub holdout_fraction: f64,
}

impl ExperimentGrid {
    /// c1/c2/c3 × 1/3/5 days × all methods over seeds `0..n_seeds`.
    pub fn default_with_seeds(n_seeds: u64) -> ExperimentGrid {
        ExperimentGrid {
            configs: ["c1", "c2", "c3"]
                .iter()
                .map(|c| CohortSpec::preset(c, 0).expect("preset exists"))
                .collect(),
            horizons: vec![1, 3, 5],
            methods: Method::ALL.to_vec(),
            seeds: (0..n_seeds).collect(),
            meal_config: default_meal_config(),
            bandit: BanditParams::default(),
            train: TrainOptions::default(),
            holdout_fraction: DEFAULT_HOLDOUT_FRACTION,
        }
    }

    fn validate(&self) -> Result<(), HarnessError> {
        let axes = [
            ("configs", self.configs.is_empty()),
            ("horizons", self.horizons.is_empty()),
            ("methods", self.methods.is_empty()),
            ("seeds", self.seeds.is_empty()),
        ];
        for (name, empty) in axes {
            if empty {
                return Err(HarnessError::EmptyAxis(name));
            }
        }
        Ok(())
    }
}

/// SplitMix64 finalizer folded over the parts.
pub fn mix_seed(parts: &[u64]) -> u64 {
    let mut h = 0x9e37_79b9_7f4a_7c15u64;
    for &p in parts {
        let mut z = h ^ p.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        h = z ^ (z >> 31);
    }
    h
}

fn spec_key(spec: &CohortSpec) -> u64 {
    let mut parts = vec![spec.n_users as u64];
    for f in Feature::ALL {
        let c = spec.counts(f);
        parts.extend([c.n_neg as u64, c.n_pos as u64]);
    }
    mix_seed(&parts)
}

fn method_key(m: Method) -> u64 {
    match m {
        Method::Bandit => 2,
        Method::Sequential => 1,
        Method::Random => 0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub config: String,
    pub horizon: usize,
    pub method: Method,
    pub uc: f64,
    pub dm: f64,
    pub mc: f64,
    pub uc_dm_mc: f64,
    pub uc_dm: f64,
    pub uc_mc: f64,
    pub dm_mc: f64,
    pub uc_sd: f64,
    pub dm_sd: f64,
    pub mc_sd: f64,
    pub uc_dm_mc_sd: f64,
    pub uc_dm_sd: f64,
    pub uc_mc_sd: f64,
    pub dm_mc_sd: f64,
}

pub const TABLE_COLUMNS: [&str; 17] = [
    "config", "horizon", "method", "uc", "dm", "mc", "uc_dm_mc", "uc_dm", "uc_mc", "dm_mc", "uc_sd",
    "dm_sd", "mc_sd", "uc_dm_mc_sd", "uc_dm_sd", "uc_mc_sd", "dm_mc_sd",
];

/// The seven metric columns of a cell for one seed.
type CellValues = [f64; 7];

fn values(uc: f64, dm: f64, mc: f64) -> CellValues {
    [
        uc,
        dm,
        mc,
        (uc + dm + mc) / 3.0,
        (uc + dm) / 2.0,
        (uc + mc) / 2.0,
        (dm + mc) / 2.0,
    ]
}

impl ResultRow {
    fn from_seeds(config: &str, horizon: usize, method: Method, per_seed: &[[f64; 3]]) -> ResultRow {
        let n = per_seed.len() as f64;
        let mean3 = |k: usize| per_seed.iter().map(|v| v[k]).sum::<f64>() / n;
        let (uc, dm, mc) = (mean3(0), mean3(1), mean3(2));
        let m = values(uc, dm, mc);
        let per: Vec<CellValues> = per_seed.iter().map(|v| values(v[0], v[1], v[2])).collect();
        let sd: Vec<f64> = (0..7)
            .map(|k| {
                if per.len() < 2 {
                    return 0.0;
                }
                let ss: f64 = per.iter().map(|v| (v[k] - m[k]).powi(2)).sum();
                (ss / (n - 1.0)).sqrt()
            })
            .collect();
        ResultRow {
            config: config.to_owned(),
            horizon,
            method,
            uc: m[0],
            dm: m[1],
            mc: m[2],
            uc_dm_mc: m[3],
            uc_dm: m[4],
            uc_mc: m[5],
            dm_mc: m[6],
            uc_sd: sd[0],
            dm_sd: sd[1],
            mc_sd: sd[2],
            uc_dm_mc_sd: sd[3],
            uc_dm_sd: sd[4],
            uc_mc_sd: sd[5],
            dm_mc_sd: sd[6],
        }
    }

    fn numbers(&self) -> [f64; 14] {
        [
            self.uc,
            self.dm,
            self.mc,
            self.uc_dm_mc,
            self.uc_dm,
            self.uc_mc,
            self.dm_mc,
            self.uc_sd,
            self.dm_sd,
            self.mc_sd,
            self.uc_dm_mc_sd,
            self.uc_dm_sd,
            self.uc_mc_sd,
            self.dm_mc_sd,
        ]
    }

    fn fields(&self) -> Vec<String> {
        let mut out = vec![self.config.clone(), self.horizon.to_string(), self.method.to_string()];
        out.extend(self.numbers().iter().map(|v| format!("{v:.3}")));
        out
    }
}

/// Per (config, seed): mean over users of each (horizon, method) cell.
fn run_job(
    grid: &ExperimentGrid,
    spec: &CohortSpec,
    seed: u64,
    catalog: &Catalog,
) -> Result<Vec<[f64; 3]>, HarnessError> {
    let base = mix_seed(&[seed, spec_key(spec)]);
    let cohort = generate_cohort(&spec.with_seed(base))?;
    let scorer = if grid.methods.contains(&Method::Bandit) {
        let pairs = label_pairs(&cohort, catalog);
        let (scorer, _) = train_bandit_with(&pairs, base, grid.holdout_fraction, &grid.train)?;
        Some(Arc::new(scorer))
    } else {
        None
    };
    let mut out = Vec::with_capacity(grid.horizons.len() * grid.methods.len());
    for &h in &grid.horizons {
        let config = grid.meal_config.clone().with_horizon(h);
        for &method in &grid.methods {
            let mut state = SelectorState::new(method, mix_seed(&[base, h as u64, method_key(method)]))
                .with_params(grid.bandit);
            if let Some(s) = &scorer {
                state = state.with_scorer(s.clone());
            }
            let mut sums = [0.0f64; 3];
            for user in &cohort {
                let plan = build_plan(&mut state, user, &config, catalog)?;
                let r = goodness(&plan.flat_meals(), user, catalog)?;
                sums[0] += r.uc;
                sums[1] += r.dm;
                sums[2] += r.mc;
            }
            let n = cohort.len().max(1) as f64;
            out.push(sums.map(|s| s / n));
        }
    }
    Ok(out)
}

/// Run every cell; rows ordered by config, horizon, then method as listed
/// in the grid.
pub fn run_grid(grid: &ExperimentGrid, catalog: &Catalog) -> Result<Vec<ResultRow>, HarnessError> {
    grid.validate()?;
    let jobs: Vec<(usize, u64)> = (0..grid.configs.len())
        .flat_map(|c| grid.seeds.iter().map(move |&s| (c, s)))
        .collect();
    let results: Vec<Vec<[f64; 3]>> = jobs
        .par_iter()
        .map(|&(c, s)| run_job(grid, &grid.configs[c], s, catalog))
        .collect::<Result<_, _>>()?;
    let n_seeds = grid.seeds.len();
    let mut rows = Vec::new();
    for (c, spec) in grid.configs.iter().enumerate() {
        let jobs = &results[c * n_seeds..(c + 1) * n_seeds];
        for (hi, &h) in grid.horizons.iter().enumerate() {
            for (mi, &m) in grid.methods.iter().enumerate() {
                let k = hi * grid.methods.len() + mi;
                let per_seed: Vec<[f64; 3]> = jobs.iter().map(|j| j[k]).collect();
                rows.push(ResultRow::from_seeds(&spec.name, h, m, &per_seed));
            }
        }
    }
    Ok(rows)
}

pub fn emit_csv(rows: &[ResultRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TABLE_COLUMNS).expect("in-memory write");
    for r in rows {
        w.write_record(r.fields()).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

pub fn parse_csv(text: &str) -> Result<Vec<ResultRow>, HarnessError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize().map(|row| row.map_err(HarnessError::from)).collect()
}

/// Whitespace-aligned rendering of the same table.
pub fn emit_text(rows: &[ResultRow]) -> String {
    let cells: Vec<Vec<String>> = std::iter::once(TABLE_COLUMNS.iter().map(|s| s.to_string()).collect())
        .chain(rows.iter().map(ResultRow::fields))
        .collect();
    let widths: Vec<usize> = (0..TABLE_COLUMNS.len())
        .map(|k| cells.iter().map(|r| r[k].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &cells {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(k, (v, &w))| if k < 3 { format!("{v:<w$}") } else { format!("{v:>w$}") })
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    out
}
