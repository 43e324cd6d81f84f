use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use hashlookup_core::index::DEFAULT_PROBE_BUDGET;
use hashlookup_core::synth::CenterMode;
use hashlookup_core::{
    different_extension, evaluate, generate_mshift, ground_truth_from_labels, same_extension,
    CodeSet, EmptyBinRule, EvalOptions, InvertedIndex, Labels, LshModel, MShiftConfig,
    ProbeSchedule, RaapMode, SearchParams,
};

use crate::formats::{read_codes, read_features, read_labels, write_codes, write_labels};
use crate::report::{bench_csv, eval_csv, mean_std, BenchRow};
use crate::CliError;

#[derive(Parser, Debug)]
#[command(name = "hashlookup", version, about = "Evaluate binary hash codes under hash lookup")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ExtensionMode {
    /// Append `s` ones to database and query codes.
    Same,
    /// Append `s` zeros to database codes and `s` ones to queries.
    Diff,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Centers {
    Random,
    Pushed,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum EmptyRule {
    Shell,
    AnyProbe,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Random-hyperplane LSH codes from a feature file.
    Hash {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        bits: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Extend database and query codes by `s` bits.
    Transform {
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long, value_enum)]
        mode: ExtensionMode,
        #[arg(long)]
        s: usize,
        #[arg(long)]
        out_db: PathBuf,
        #[arg(long)]
        out_queries: PathBuf,
    },
    /// Planted-center codes with intra-class distance about `m`.
    Synth {
        #[arg(long)]
        bits: usize,
        #[arg(long)]
        classes: usize,
        #[arg(long)]
        per_class: usize,
        #[arg(long, default_value_t = 100)]
        queries_per_class: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Centers::Random)]
        centers: Centers,
        #[arg(long)]
        out_db_codes: PathBuf,
        #[arg(long)]
        out_db_labels: PathBuf,
        #[arg(long)]
        out_query_codes: PathBuf,
        #[arg(long)]
        out_query_labels: PathBuf,
    },
    /// Per-radius metric report; ground truth is label equality.
    Eval {
        #[arg(long)]
        db_codes: PathBuf,
        #[arg(long)]
        query_codes: PathBuf,
        #[arg(long)]
        db_labels: PathBuf,
        #[arg(long)]
        query_labels: PathBuf,
        #[arg(long)]
        max_radius: usize,
        #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
        rand_ties: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Largest cumulative probe count allowed at the last radius.
        #[arg(long, default_value_t = DEFAULT_PROBE_BUDGET)]
        budget: u128,
        #[arg(long, value_enum, default_value_t = EmptyRule::Shell)]
        empty_rule: EmptyRule,
        /// Average RAAP only over radii whose shell is occupied.
        #[arg(long)]
        skip_empty_radii: bool,
        /// Truncate the ranked list at this many entries for MAP.
        #[arg(long)]
        map_top_k: Option<usize>,
        /// Leave the wall_ns column as NA and skip the timed searches.
        #[arg(long)]
        no_timing: bool,
    },
    /// Probe counts and search time per radius.
    Bench {
        #[arg(long)]
        db_codes: PathBuf,
        #[arg(long)]
        query_codes: PathBuf,
        #[arg(long)]
        max_radius: usize,
        #[arg(long, default_value_t = DEFAULT_PROBE_BUDGET)]
        budget: u128,
        /// Defaults to standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn check_lengths(db: &CodeSet, queries: &CodeSet) -> Result<(), CliError> {
    if db.code_len() != queries.code_len() {
        return Err(CliError::Input(format!(
            "database codes have {} bits but query codes have {}",
            db.code_len(),
            queries.code_len()
        )));
    }
    Ok(())
}

fn check_labels(what: &str, labels: &Labels, codes: &CodeSet) -> Result<(), CliError> {
    if labels.len() != codes.len() {
        return Err(CliError::Input(format!(
            "{what}: {} labels for {} codes",
            labels.len(),
            codes.len()
        )));
    }
    Ok(())
}

/// Fails with the first radius whose cumulative probe count exceeds `budget`.
fn check_budget(q: usize, max_radius: usize, budget: u128) -> Result<(), CliError> {
    let schedule = ProbeSchedule::new(q);
    for r in 0..=max_radius {
        let needed = schedule.cumulative_saturating(r)?;
        if needed > budget {
            return Err(hashlookup_core::Error::ProbeBudgetExceeded { radius: r, needed, budget }.into());
        }
    }
    Ok(())
}

/// Elapsed ns through each radius `0..=max_radius`, one row per query.
fn time_searches(
    db: &CodeSet,
    queries: &CodeSet,
    max_radius: usize,
    budget: u128,
) -> Result<Vec<Vec<f64>>, CliError> {
    let index = InvertedIndex::build(db);
    let params = SearchParams::new(max_radius, usize::MAX).with_budget(budget);
    queries
        .iter()
        .map(|query| {
            let result = index.search(query, &params)?;
            Ok(result.stats.wall_ns.iter().map(|&ns| ns as f64).collect())
        })
        .collect()
}

fn column(times: &[Vec<f64>], r: usize) -> Vec<f64> {
    times.iter().map(|t| t[r]).collect()
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Hash { features, out, bits, seed } => {
            let feats = read_features(&features)?;
            let model = LshModel::train(feats.dim(), bits, seed)?;
            write_codes(&out, &model.encode(&feats)?)
        }
        Command::Transform { db, queries, mode, s, out_db, out_queries } => {
            let db = read_codes(&db)?;
            let queries = read_codes(&queries)?;
            check_lengths(&db, &queries)?;
            let (db, queries) = match mode {
                ExtensionMode::Same => same_extension(&db, &queries, s)?,
                ExtensionMode::Diff => different_extension(&db, &queries, s)?,
            };
            write_codes(&out_db, &db)?;
            write_codes(&out_queries, &queries)
        }
        Command::Synth {
            bits,
            classes,
            per_class,
            queries_per_class,
            m,
            seed,
            centers,
            out_db_codes,
            out_db_labels,
            out_query_codes,
            out_query_labels,
        } => {
            let config = MShiftConfig {
                queries_per_class,
                centers: match centers {
                    Centers::Random => CenterMode::Random,
                    Centers::Pushed => CenterMode::PushedApart,
                },
                ..MShiftConfig::new(bits, classes, per_class, m, seed)
            };
            let split = generate_mshift(&config)?;
            write_codes(&out_db_codes, &split.db)?;
            write_labels(&out_db_labels, &split.db_labels)?;
            write_codes(&out_query_codes, &split.queries)?;
            write_labels(&out_query_labels, &split.query_labels)
        }
        Command::Eval {
            db_codes,
            query_codes,
            db_labels,
            query_labels,
            max_radius,
            rand_ties,
            seed,
            out,
            budget,
            empty_rule,
            skip_empty_radii,
            map_top_k,
            no_timing,
        } => {
            let db = read_codes(&db_codes)?;
            let queries = read_codes(&query_codes)?;
            check_lengths(&db, &queries)?;
            let db_labels = read_labels(&db_labels)?;
            let query_labels = read_labels(&query_labels)?;
            check_labels("database", &db_labels, &db)?;
            check_labels("queries", &query_labels, &queries)?;
            let top = max_radius.min(db.code_len());
            check_budget(db.code_len(), top, budget)?;

            let gt = ground_truth_from_labels(&db_labels, &query_labels)?;
            let opts = EvalOptions {
                max_radius: top,
                random_ties: rand_ties as usize,
                seed,
                map_cutoff: map_top_k,
                empty_rule: match empty_rule {
                    EmptyRule::Shell => EmptyBinRule::Shell,
                    EmptyRule::AnyProbe => EmptyBinRule::AnyProbe,
                },
                raap_mode: if skip_empty_radii { RaapMode::SkipEmpty } else { RaapMode::AllRadii },
                ..EvalOptions::default()
            };
            let report = evaluate(&db, &queries, &gt, &opts)?;
            let wall = if no_timing {
                None
            } else {
                let times = time_searches(&db, &queries, top, budget)?;
                Some((0..=top).map(|r| mean_std(&column(&times, r)).0).collect::<Vec<_>>())
            };
            write_text(&out, &eval_csv(&report, wall.as_deref()))
        }
        Command::Bench { db_codes, query_codes, max_radius, budget, out } => {
            let db = read_codes(&db_codes)?;
            let queries = read_codes(&query_codes)?;
            check_lengths(&db, &queries)?;
            let top = max_radius.min(db.code_len());
            check_budget(db.code_len(), top, budget)?;
            let schedule = ProbeSchedule::new(db.code_len());
            let times = time_searches(&db, &queries, top, budget)?;
            let rows = (0..=top)
                .map(|r| {
                    let (wall_ns_mean, wall_ns_std) = mean_std(&column(&times, r));
                    Ok(BenchRow {
                        radius: r,
                        probes: schedule.cumulative_saturating(r)?,
                        wall_ns_mean,
                        wall_ns_std,
                    })
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            let csv = bench_csv(&rows);
            match out {
                Some(path) => write_text(&path, &csv),
                None => std::io::stdout()
                    .write_all(csv.as_bytes())
                    .map_err(|source| CliError::Io { path: "<stdout>".into(), source }),
            }
        }
    }
}
