use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use beacon_core::bandit::{self, accuracy, fit, label_pairs, log_loss, BoostedScorer, TrainOptions};
use beacon_core::catalog::{load_catalog, stats, stats_csv, stats_table, Catalog};
use beacon_core::decode::lenient_decode;
use beacon_core::harness::{emit_csv, emit_text, run_grid, ExperimentGrid};
use beacon_core::keyset::{build_reference_keyset, key_nesting_set, syntactic_similarity};
use beacon_core::metrics::goodness;
use beacon_core::planner::{build_plan, emit_plan};
use beacon_core::select::{Method, SelectorState};
use beacon_core::users::{
    default_meal_config, generate_cohort, parse_profile, reference_cohort, CohortSpec, UserProfile,
    REFERENCE_COHORT_SEED,
};
use clap::{Parser, Subcommand};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "beacon", version, about = "Meal-plan recommendation over R3 recipes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-category share of recipes containing nuts, meat and dairy.
    Stats {
        dir: PathBuf,
        #[arg(long)]
        csv: bool,
    },
    /// Generate a simulated cohort (c1, c2 or c3).
    Cohort {
        #[arg(long)]
        config: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a bandit scorer on a cohort's labelled pairs and write the model file.
    Train {
        #[arg(long)]
        catalog: PathBuf,
        /// Cohort preset; ignored when --cohort is given.
        #[arg(long, default_value = "c2")]
        config: String,
        /// Cohort file written by `beacon cohort`.
        #[arg(long)]
        cohort: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = bandit::DEFAULT_HOLDOUT_FRACTION)]
        holdout: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a meal plan for one user.
    Recommend {
        #[arg(long)]
        user: PathBuf,
        #[arg(long, default_value = "bandit")]
        method: Method,
        #[arg(long, default_value_t = 1)]
        days: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Model file from `beacon train`. Without it the bandit is fit on
        /// the reference cohort plus this user.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Run the method-comparison grid.
    Simulate {
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long, default_value = "default")]
        grid: String,
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long)]
        out: PathBuf,
        /// Print rows as JSON instead of the aligned table.
        #[arg(long)]
        json: bool,
    },
    /// Start the HTTP planning service.
    Serve {
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, env = "BEACON_API_KEY")]
        api_key: Option<String>,
    },
    /// Lenient JSON decode of a file, reporting the repair count.
    Decode {
        file: PathBuf,
        /// Print the repaired text instead of the report.
        #[arg(long)]
        repaired: bool,
    },
    /// Key-nesting similarity of a document against a catalog's documents.
    Similarity {
        file: PathBuf,
        #[arg(long)]
        catalog: PathBuf,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn catalog(dir: &Path) -> Result<Catalog> {
    load_catalog(dir).with_context(|| format!("loading catalog {}", dir.display()))
}

fn cohort_users(raw: &str) -> Result<Vec<UserProfile>> {
    let v: Value = serde_json::from_str(raw)?;
    let users = v.get("users").cloned().unwrap_or(v);
    Ok(serde_json::from_value(users)?)
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Stats { dir, csv } => {
            let rows = stats(&catalog(&dir)?);
            print!("{}", if csv { stats_csv(&rows) } else { stats_table(&rows) });
        }
        Command::Cohort { config, seed, out } => {
            let spec = CohortSpec::preset(&config, seed)?;
            let users = generate_cohort(&spec)?;
            let doc = json!({"spec": spec, "users": users});
            write(&out, &(serde_json::to_string_pretty(&doc)? + "\n"))?;
        }
        Command::Train {
            catalog: dir,
            config,
            cohort,
            seed,
            holdout,
            out,
        } => {
            let cat = catalog(&dir)?;
            let users = match cohort {
                Some(path) => cohort_users(&read(&path)?)?,
                None => generate_cohort(&CohortSpec::preset(&config, seed)?)?,
            };
            let pairs = label_pairs(&users, &cat);
            let (scorer, held) = bandit::train_bandit(&pairs, seed, holdout)?;
            write(&out, &scorer.to_model_json())?;
            if !held.is_empty() {
                eprintln!(
                    "{} pairs, holdout {}: accuracy {:.3}, log-loss {:.4}",
                    pairs.len(),
                    held.len(),
                    accuracy(&scorer, &held),
                    log_loss(&scorer, &held)
                );
            }
        }
        Command::Recommend {
            user,
            method,
            days,
            seed,
            catalog: dir,
            out,
            model,
        } => {
            let cat = catalog(&dir)?;
            let profile = parse_profile(&read(&user)?)?;
            let mut state = SelectorState::new(method, seed);
            if method == Method::Bandit {
                let scorer = match model {
                    Some(path) => BoostedScorer::from_model_json(&read(&path)?)?,
                    None => {
                        let mut users = reference_cohort();
                        users.push(profile.clone());
                        fit(&label_pairs(&users, &cat), &TrainOptions::default())?
                    }
                };
                state = state.with_scorer(Arc::new(scorer));
            }
            let config = default_meal_config().with_horizon(days);
            let plan = build_plan(&mut state, &profile, &config, &cat)?;
            write(&out, &emit_plan(&plan))?;
            let report = goodness(&plan.flat_meals(), &profile, &cat)?;
            println!("{}", serde_json::to_string(&report)?);
        }
        Command::Simulate {
            catalog: dir,
            grid,
            seeds,
            out,
            json,
        } => {
            if grid != "default" {
                bail!("unknown grid `{grid}` (only `default` is built in)");
            }
            if seeds == 0 {
                bail!("--seeds must be at least 1");
            }
            let cat = catalog(&dir)?;
            let rows = run_grid(&ExperimentGrid::default_with_seeds(seeds), &cat)?;
            write(&out, &emit_csv(&rows))?;
            if json {
                println!("{}", serde_json::to_string_pretty(&rows)?);
            } else {
                print!("{}", emit_text(&rows));
            }
        }
        Command::Serve {
            catalog: dir,
            store,
            port,
            host,
            api_key,
        } => {
            let cat = catalog(&dir)?;
            let addr: SocketAddr = format!("{host}:{port}").parse().context("bad --host/--port")?;
            let state = beacon_service::open(cat, &store, api_key)?;
            eprintln!("listening on http://{addr} (reference cohort seed {REFERENCE_COHORT_SEED})");
            tokio::runtime::Runtime::new()?.block_on(beacon_service::serve(state, addr))?;
        }
        Command::Decode { file, repaired } => {
            let report = lenient_decode(&read(&file)?);
            if repaired {
                match &report.repaired_text {
                    Some(t) => println!("{t}"),
                    None if report.document.is_some() => print!("{}", read(&file)?),
                    None => bail!("no repair within budget ({} edits)", report.error_count),
                }
            } else {
                println!("{}", serde_json::to_string_pretty(&json!({
                    "error_count": report.error_count,
                    "repaired": report.repaired,
                    "parsed": report.document.is_some(),
                }))?);
            }
        }
        Command::Similarity { file, catalog: dir } => {
            let cat = catalog(&dir)?;
            let docs: Vec<Value> = cat
                .recipes()
                .iter()
                .map(serde_json::to_value)
                .collect::<Result<_, _>>()?;
            let reference = build_reference_keyset(&docs)?;
            let report = lenient_decode(&read(&file)?);
            let Some(doc) = report.document else {
                bail!("{} does not decode as JSON", file.display());
            };
            let s = syntactic_similarity(&key_nesting_set(&doc), &reference)?;
            println!("{s:.4}");
        }
    }
    Ok(())
}
