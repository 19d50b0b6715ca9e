use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lotus_core::dataset::{standardize_matrix, NumericMatrix};
use lotus_core::estimators::{SearchSpace, TaskKind};
use lotus_core::eval::{leave_one_out, Baselines, LooConfig};
use lotus_core::metrics::MetricName;
use lotus_core::ot::{entropic_gw, CostMatrix, EntropicGwConfig, ProbabilityVector};
use lotus_core::runtime::{timed, Clock, Env};
use lotus_core::search::{meta_train, Budget, MetaDataset, MetaTrainConfig};
use lotus_core::similarity::{dataset_distance, embed, rank_candidates, recommend, DistanceRecord};
use lotus_core::store::{MemoryStore, StoreEntry};
use lotus_core::synth;
use lotus::config::{Overrides, RunConfig};
use lotus::exec::{Rayon, SystemClock};
use lotus::io::{csv_files, read_dataset, write_matrix};
use lotus::metastore::{MetaStore, VERSION};
use lotus::report::{emit_report, write_timings, ReportHeader};
use lotus::{Error, Result};
use serde_json::json;

#[derive(Parser)]
#[command(name = "lotus", version, about = "Pick tuned unsupervised pipelines for new tabular data by dataset similarity")]
struct Cli {
    /// key = value file; flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (0 = one per core)
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(flatten)]
    tuning: Tuning,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Tuning {
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    ica_k: Option<usize>,
    #[arg(long, global = true)]
    gw_rank: Option<usize>,
    #[arg(long, global = true)]
    gw_eps: Option<f64>,
    #[arg(long, global = true)]
    subsample_cap: Option<usize>,
    #[arg(long, global = true)]
    budget: Option<usize>,
    #[arg(long, global = true)]
    rope: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Encode a raw CSV into a numeric one
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value = "label")]
        label_column: String,
    },
    /// Search every labeled CSV in a directory and store the winners
    MetaTrain {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_parser = parse_task)]
        task: TaskKind,
        #[arg(long, value_parser = parse_metric)]
        metric: Option<MetricName>,
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value = "label")]
        label_column: String,
    },
    /// Recommend the pipeline of the most similar stored dataset
    Recommend {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        store: PathBuf,
        #[arg(long, value_parser = parse_task)]
        task: TaskKind,
        #[arg(long, default_value = "label")]
        label_column: String,
    },
    /// Leave-one-out evaluation over a directory of labeled CSVs
    Evaluate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_parser = parse_task)]
        task: TaskKind,
        #[arg(long, value_parser = parse_metric)]
        metric: Option<MetricName>,
        #[arg(long)]
        out: PathBuf,
        /// Write wall-clock timings as CSV here
        #[arg(long)]
        timings: Option<PathBuf>,
        #[arg(long, default_value = "label")]
        label_column: String,
    },
    /// Time candidate ranking against stores of increasing size
    Bench {
        #[arg(long, value_delimiter = ',', default_values_t = [8usize, 16, 32])]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 100)]
        rows: usize,
        #[arg(long, default_value_t = 4)]
        cols: usize,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
    },
    /// Distance between two CSVs
    Distance {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, default_value = "lowrank", value_parser = ["lowrank", "entropic"])]
        solver: String,
        #[arg(long, default_value = "label")]
        label_column: String,
    },
}

fn parse_task(s: &str) -> std::result::Result<TaskKind, String> {
    TaskKind::parse(s).ok_or_else(|| format!("unknown task {s:?} (expected clustering or outlier)"))
}

fn parse_metric(s: &str) -> std::result::Result<MetricName, String> {
    MetricName::parse(s).map_err(|e| e.to_string())
}

fn default_metric(task: TaskKind) -> MetricName {
    match task {
        TaskKind::Clustering => MetricName::Ami,
        TaskKind::Outlier => MetricName::RocAuc,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn print_json(v: &serde_json::Value) -> Result<()> {
    use std::io::Write;
    let text = serde_json::to_string_pretty(v)? + "\n";
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::Io {
            path: "<stdout>".into(),
            source: e,
        }),
        _ => Ok(()),
    }
}

fn load_labeled(dir: &Path, label_column: &str, task: TaskKind) -> Result<Vec<MetaDataset>> {
    let files = csv_files(dir)?;
    if files.is_empty() {
        return Err(Error::Format {
            path: dir.into(),
            message: "no .csv files".into(),
        });
    }
    files
        .iter()
        .map(|p| {
            let d = read_dataset(p, label_column)?;
            let labels = d.labels.ok_or_else(|| Error::Format {
                path: p.clone(),
                message: format!("no {label_column:?} column"),
            })?;
            Ok(MetaDataset {
                id: d.id,
                data: d.encoded.matrix,
                labels,
                task,
            })
        })
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    let t = &cli.tuning;
    let flags = Overrides {
        seed: t.seed,
        ica_k: t.ica_k,
        gw_rank: t.gw_rank,
        gw_eps: t.gw_eps,
        subsample_cap: t.subsample_cap,
        budget: t.budget,
        rope: t.rope,
    };
    let cfg = RunConfig::resolve(cli.config.as_deref(), &flags)?;
    let pool = Rayon::new(cli.threads).map_err(|e| Error::Config(e.to_string()))?;
    let clock = SystemClock::new();
    let env = Env {
        exec: &pool,
        clock: &clock,
    };
    let sim = cfg.similarity();

    match cli.command {
        Command::Ingest {
            input,
            output,
            label_column,
        } => {
            let d = read_dataset(&input, &label_column)?;
            let m = d.encoded.matrix.data();
            let mut names = d.encoded.column_names.clone();
            let out = match &d.labels {
                Some(labels) => {
                    names.push(label_column.clone());
                    lotus_core::Matrix::from_fn(m.rows(), m.cols() + 1, |i, j| {
                        if j < m.cols() {
                            m[(i, j)]
                        } else {
                            labels[i] as f64
                        }
                    })
                }
                None => m.clone(),
            };
            write_matrix(&output, &out, Some(&names))?;
            print_json(&json!({
                "toolkit_version": VERSION,
                "config": cfg,
                "dataset_id": d.id,
                "rows": m.rows(),
                "columns": d.encoded.column_names,
                "labels": d.labels.is_some(),
                "output": output,
            }))
        }
        Command::MetaTrain {
            data,
            task,
            metric,
            store,
            label_column,
        } => {
            let metric = metric.unwrap_or_else(|| default_metric(task));
            let datasets = load_labeled(&data, &label_column, task)?;
            let mut persisted = MetaStore::load(&store)?;
            let space = SearchSpace::standard();
            let mt = MetaTrainConfig {
                space: &space,
                metric,
                budget: Budget::Trials(cfg.budget),
                seed: cfg.seed,
                similarity: &sim,
            };
            let mut trained = MemoryStore::new();
            let summary = meta_train(&datasets, &mt, &mut trained, env)?;
            let (mut written, mut unchanged) = (Vec::new(), Vec::new());
            for e in trained.iter() {
                if persisted.record(e)? {
                    written.push(e.dataset_id.clone());
                } else {
                    unchanged.push(e.dataset_id.clone());
                }
            }
            let skipped: Vec<_> = summary
                .skipped
                .iter()
                .map(|(id, why)| json!({"dataset_id": id, "reason": why}))
                .collect();
            print_json(&json!({
                "toolkit_version": VERSION,
                "config": cfg,
                "task": task.as_str(),
                "metric": metric.as_str(),
                "written": written,
                "unchanged": unchanged,
                "skipped": skipped,
                "warnings": persisted.warnings(),
            }))
        }
        Command::Recommend {
            input,
            store,
            task,
            label_column,
        } => {
            let persisted = MetaStore::load(&store)?;
            if persisted.entries().all(|e| e.task != task) {
                return Err(Error::Format {
                    path: store,
                    message: format!("store has no {task} entries"),
                });
            }
            let memory = persisted.to_memory()?;
            let d = read_dataset(&input, &label_column)?;
            let (rec, seconds) = timed(&clock, || recommend(&d.encoded.matrix, &memory, task, &sim, cfg.seed, env));
            let rec = rec?;
            let report = json!({
                "toolkit_version": VERSION,
                "config": cfg,
                "task": task.as_str(),
                "pipeline": rec.pipeline,
                "source_dataset": rec.source_dataset,
                "distance": rec.distance,
                "candidates": rec.candidates,
                "timings": {"total_seconds": seconds},
            });
            print_json(&report)
        }
        Command::Evaluate {
            data,
            task,
            metric,
            out,
            timings,
            label_column,
        } => {
            let metric = metric.unwrap_or_else(|| default_metric(task));
            let datasets = load_labeled(&data, &label_column, task)?;
            let loo = LooConfig {
                space: SearchSpace::standard(),
                metric,
                budget: Budget::Trials(cfg.budget),
                seed: cfg.seed,
                similarity: sim,
                baselines: Baselines::default(),
                rope: cfg.rope,
                rope_samples: 50_000,
            };
            let report = leave_one_out(&datasets, &loo, env)?;
            let header = ReportHeader::new(cfg, task.as_str(), metric.as_str());
            let files = emit_report(&report, &header, &out)?;
            if let Some(path) = &timings {
                write_timings(&report, path)?;
            }
            let total: f64 = report.timings.iter().map(|t| t.seconds).sum();
            print_json(&json!({
                "toolkit_version": VERSION,
                "config": cfg,
                "files": files,
                "mean_scores": report
                    .methods
                    .iter()
                    .map(|m| (m.clone(), report.mean_score(m)))
                    .collect::<std::collections::BTreeMap<_, _>>(),
                "timings": {"total_seconds": total},
            }))
        }
        Command::Bench {
            sizes,
            rows,
            cols,
            repeats,
        } => {
            let rows_out = bench(&sizes, rows, cols, repeats.max(1), &cfg, env)?;
            print_json(&json!({
                "toolkit_version": VERSION,
                "config": cfg,
                "rows": rows,
                "cols": cols,
                "results": rows_out,
            }))
        }
        Command::Distance {
            a,
            b,
            solver,
            label_column,
        } => {
            let da = read_dataset(&a, &label_column)?.encoded.matrix;
            let db = read_dataset(&b, &label_column)?.encoded.matrix;
            let record = if solver == "entropic" {
                entropic_record(&da, &db, &cfg, &clock)?
            } else {
                dataset_distance(&da, &db, &sim, cfg.seed, &clock)?
            };
            print_json(&serde_json::to_value(record)?)
        }
    }
}

fn entropic_record(da: &NumericMatrix, db: &NumericMatrix, cfg: &RunConfig, clock: &dyn Clock) -> Result<DistanceRecord> {
    let sim = cfg.similarity();
    let (out, wall_time) = timed(clock, || -> Result<_> {
        let ea = embed(da, &sim, cfg.seed)?;
        let eb = embed(db, &sim, cfg.seed)?;
        let gw = EntropicGwConfig {
            eps: cfg.gw_eps,
            seed: cfg.seed,
            ..EntropicGwConfig::default()
        };
        Ok(entropic_gw(
            &CostMatrix::squared_euclidean(&ea),
            &CostMatrix::squared_euclidean(&eb),
            &ProbabilityVector::uniform(ea.rows()),
            &ProbabilityVector::uniform(eb.rows()),
            &gw,
        )?)
    });
    let out = out?;
    Ok(DistanceRecord {
        candidate_id: db.source_id().into(),
        value: out.value,
        wall_time,
        solver_converged: out.converged,
    })
}

/// Store of `n` synthetic datasets cycling through three geometries.
fn synthetic_store(n: usize, rows: usize, cols: usize, cfg: &RunConfig) -> Result<MemoryStore> {
    let sim = cfg.similarity();
    (0..n)
        .map(|i| {
            let seed = 1000 + i as u64;
            let (x, _) = match i % 3 {
                0 => synth::blobs(rows, cols, 3, 1.0, seed),
                1 => synth::rings(rows, cols, 2, 0.1, seed),
                _ => synth::stripes(rows, cols, 3, seed),
            };
            let id = format!("bench{i:03}");
            let m = standardize_matrix(&x, &id)?;
            Ok(StoreEntry {
                dataset_id: id,
                task: TaskKind::Clustering,
                embedding: embed(&m, &sim, cfg.seed)?,
                pipeline: lotus_core::estimators::PipelineSpec::default_for(lotus_core::estimators::Algorithm::Kmeans),
                score: lotus_core::metrics::MetricValue::new(MetricName::Ami, 0.0),
            })
        })
        .collect()
}

fn bench(
    sizes: &[usize],
    rows: usize,
    cols: usize,
    repeats: usize,
    cfg: &RunConfig,
    env: Env<'_, Rayon>,
) -> Result<Vec<serde_json::Value>> {
    let sim = cfg.similarity();
    let (q, _) = synth::blobs(rows, cols, 3, 1.0, 7);
    let query = standardize_matrix(&q, "query")?;
    let mut out = Vec::new();
    let mut previous: Option<f64> = None;
    for &n in sizes {
        let store = synthetic_store(n, rows, cols, cfg)?;
        let mut best = f64::INFINITY;
        for _ in 0..repeats {
            let (r, secs) = timed(env.clock, || rank_candidates(&query, &store, TaskKind::Clustering, &sim, cfg.seed, env));
            r?;
            best = best.min(secs);
        }
        out.push(json!({
            "candidates": n,
            "seconds": best,
            "ratio_to_previous": previous.map(|p| best / p),
        }));
        previous = Some(best);
    }
    Ok(out)
}
