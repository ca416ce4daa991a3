//! The suite runner: one child process per (task, method, seed) cell,
//! scheduled over a bounded worker pool, then aggregated into reports.

use std::collections::VecDeque;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Mutex;
use std::time::Instant;

use clap::Args;
use serde::{Deserialize, Serialize};
use vacda::config::ExperimentConfig;
use vacda::data::{read_bundle, write_bundle, ScenarioSpec};
use vacda::eval::{baseline_seed, config_hash, render_report, run_seed, Method, MetricsReport, ReportFormat};
use vacda::manifest::{bundle_hash, RunManifest};
use vacda::trainer::{write_loss_log, RunConfig};
use vacda::{Error, Result};

use crate::commands::{claim_output, load_config, manifest, task_slug, write_json};
use crate::ConfigArgs;

#[derive(Args, Debug)]
pub struct SuiteArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Also run every task with the contrastive terms switched off.
    #[arg(long)]
    pub ablation: bool,
    #[arg(long)]
    pub force: bool,
    /// Keep completed cells of an interrupted run in `--out`.
    #[arg(long)]
    pub resume: bool,
    /// Concurrent cells; 0 means one per available core.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Args, Debug)]
pub struct CellArgs {
    /// Resolved configuration written by `run-suite`.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub bundle: PathBuf,
    #[arg(long)]
    pub method: String,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
struct CellResult {
    test_micro_f1: f64,
    transductive_micro_f1: f64,
    wall_clock_secs: f64,
}

const RESULT_FILE: &str = "result.json";
const ERROR_FILE: &str = "error.txt";

fn method_name(m: Method) -> String {
    serde_json::to_value(m).ok().and_then(|v| v.as_str().map(str::to_string)).expect("method names are strings")
}

fn parse_method(s: &str) -> Result<Method> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| Error::config(format!("unknown method `{s}` (vacda, vacda-no-contrastive or source-only)")))
}

fn run_config_for(cfg: &RunConfig, method: Method) -> RunConfig {
    let mut rc = cfg.clone();
    match method {
        Method::Vacda => rc.contrastive = true,
        Method::VacdaNoContrastive => rc.contrastive = false,
        Method::SourceOnly => {}
    }
    rc
}

fn cell_manifest(cfg: &ExperimentConfig, method: Method, seed: u64, bundle: &Path) -> Result<RunManifest> {
    let mut m = RunManifest::new("run-cell", cfg).param("method", method_name(method)).param("seed", seed);
    m.config_hash = config_hash(&run_config_for(&cfg.run, method));
    m.seeds = vec![seed];
    m.input("bundle", bundle)?;
    Ok(m)
}

/// Runs a single cell in this process.
pub fn run_cell(args: &CellArgs) -> Result<()> {
    let method = parse_method(&args.method)?;
    let cfg = ExperimentConfig::load(Some(&args.config), &[])?;
    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    for stale in [RESULT_FILE, ERROR_FILE] {
        let _ = fs::remove_file(args.out.join(stale));
    }
    cell_manifest(&cfg, method, args.seed, &args.bundle)?.write(&args.out)?;
    let outcome = (|| -> Result<CellResult> {
        let sc = read_bundle(&args.bundle)?;
        let rc = run_config_for(&cfg.run, method);
        let start = Instant::now();
        let (test, trans) = match method {
            Method::SourceOnly => baseline_seed(&sc, &rc, args.seed)?,
            _ => {
                let r = run_seed(&sc, &rc, args.seed)?;
                write_loss_log(&args.out.join("loss_log.csv"), &r.pretrain.log)?;
                (r.test_f1, r.transductive_f1)
            }
        };
        log::info!("{} / {} / seed {}: target micro-F1 {test:.4}", sc.spec.task_label(), method.display_name(), args.seed);
        Ok(CellResult { test_micro_f1: test, transductive_micro_f1: trans, wall_clock_secs: start.elapsed().as_secs_f64() })
    })();
    match outcome {
        Ok(r) => write_json(&args.out.join(RESULT_FILE), &r),
        Err(e) => {
            let path = args.out.join(ERROR_FILE);
            fs::write(&path, e.to_string()).map_err(|io| Error::io(&path, io))?;
            Err(e)
        }
    }
}

struct Task {
    spec: ScenarioSpec,
    slug: String,
    /// Class set and content hash once the bundle exists; the error otherwise.
    bundle: std::result::Result<(Vec<String>, String), String>,
}

struct Cell {
    task: usize,
    method: Method,
    seed: u64,
    dir: PathBuf,
}

fn load_result(dir: &Path) -> Option<CellResult> {
    serde_json::from_str(&fs::read_to_string(dir.join(RESULT_FILE)).ok()?).ok()
}

/// A cell is complete when its result exists and its manifest matches what
/// this run would write.
fn is_complete(cell: &Cell, cfg: &ExperimentConfig, bundle_hash: &str) -> bool {
    let Ok(m) = RunManifest::read(&cell.dir) else { return false };
    m.config_hash == config_hash(&run_config_for(&cfg.run, cell.method))
        && m.inputs.get("bundle").map(String::as_str) == Some(bundle_hash)
        && m.params.get("seed") == Some(&cell.seed.to_string())
        && m.params.get("method") == Some(&method_name(cell.method))
        && load_result(&cell.dir).is_some()
}

fn prepare_bundle(cfg: &ExperimentConfig, spec: &ScenarioSpec, dir: &Path, reuse: bool) -> Result<(Vec<String>, String)> {
    if reuse {
        if let Ok(sc) = read_bundle(dir) {
            log::info!("reusing bundle {}", dir.display());
            return Ok((sc.class_set().to_vec(), bundle_hash(dir)?));
        }
    }
    let (sc, seed) = cfg.prepare_task(spec)?;
    write_bundle(dir, &sc, seed)?;
    log::info!("prepared {} in {}", spec.task_label(), dir.display());
    Ok((sc.class_set().to_vec(), bundle_hash(dir)?))
}

fn worker_count(requested: usize) -> usize {
    if requested > 0 {
        requested
    } else {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    }
}

/// Runs queued cells as child processes, at most `workers` at a time.
fn execute(cells: Vec<&Cell>, tasks: &[Task], config: &Path, out: &Path, workers: usize) -> Result<()> {
    let exe = std::env::current_exe().map_err(|e| Error::io(Path::new("current executable"), e))?;
    let cores = worker_count(0);
    let threads_per_cell = (cores / workers).max(1).to_string();
    let total = cells.len();
    let queue = Mutex::new(cells.into_iter().enumerate().collect::<VecDeque<_>>());
    std::thread::scope(|scope| {
        for _ in 0..workers.min(total) {
            scope.spawn(|| loop {
                let Some((i, cell)) = queue.lock().expect("queue lock").pop_front() else { break };
                let task = &tasks[cell.task];
                log::info!("[{}/{total}] {} / {} / seed {}", i + 1, task.spec.task_label(), method_name(cell.method), cell.seed);
                let mut cmd = Command::new(&exe);
                cmd.arg("run-cell")
                    .arg("--config")
                    .arg(config)
                    .arg("--bundle")
                    .arg(out.join("bundles").join(&task.slug))
                    .args(["--method", &method_name(cell.method), "--seed", &cell.seed.to_string()])
                    .arg("--out")
                    .arg(&cell.dir);
                if std::env::var_os("RAYON_NUM_THREADS").is_none() {
                    cmd.env("RAYON_NUM_THREADS", &threads_per_cell);
                }
                match cmd.status() {
                    Ok(s) if s.success() => {}
                    Ok(s) => log::warn!("cell {} exited with {s}", cell.dir.display()),
                    Err(e) => {
                        let _ = fs::create_dir_all(&cell.dir);
                        let _ = fs::write(cell.dir.join(ERROR_FILE), format!("could not start cell: {e}"));
                    }
                }
            });
        }
    });
    Ok(())
}

fn cell_error(dir: &Path) -> String {
    fs::read_to_string(dir.join(ERROR_FILE)).unwrap_or_else(|_| "cell produced no result".into())
}

pub fn run_suite(args: &SuiteArgs) -> Result<()> {
    let mut cfg = load_config(&args.cfg)?;
    cfg.suite.ablation |= args.ablation;
    let workers = worker_count(args.workers.unwrap_or(cfg.suite.workers));
    let out = args.out.as_path();
    let specs = cfg.tasks()?;

    if args.resume {
        if let Ok(prev) = RunManifest::read(out) {
            if prev.config != cfg.to_toml() {
                return Err(Error::config(format!(
                    "cannot resume {}: its manifest records a different configuration",
                    out.display()
                )));
            }
        }
        fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    } else {
        claim_output(out, args.force)?;
    }
    manifest("run-suite", &args.cfg, &cfg)?
        .param("ablation", cfg.suite.ablation)
        .param("baseline", cfg.suite.baseline)
        .write(out)?;
    let config_path = out.join("config.toml");
    fs::write(&config_path, cfg.to_toml()).map_err(|e| Error::io(&config_path, e))?;

    let mut methods = vec![Method::Vacda];
    if cfg.suite.ablation {
        methods.push(Method::VacdaNoContrastive);
    }
    if cfg.suite.baseline {
        methods.push(Method::SourceOnly);
    }

    let tasks: Vec<Task> = specs
        .into_iter()
        .map(|spec| {
            let slug = task_slug(&spec);
            let dir = out.join("bundles").join(&slug);
            let bundle = prepare_bundle(&cfg, &spec, &dir, args.resume).map_err(|e| {
                log::error!("{}: {e}", spec.task_label());
                e.to_string()
            });
            Task { spec, slug, bundle }
        })
        .collect();

    let mut cells = Vec::new();
    for (t, task) in tasks.iter().enumerate() {
        for &method in &methods {
            for &seed in &cfg.run.seeds {
                let dir = out.join("cells").join(&task.slug).join(method_name(method)).join(format!("seed-{seed}"));
                cells.push(Cell { task: t, method, seed, dir });
            }
        }
    }
    let mut queued = Vec::new();
    for cell in &cells {
        let Ok((_, hash)) = &tasks[cell.task].bundle else { continue };
        if args.resume && is_complete(cell, &cfg, hash) {
            log::info!("skipping completed cell {}", cell.dir.display());
        } else {
            queued.push(cell);
        }
    }
    log::info!(
        "{} tasks x {} methods x {} seeds: {} cells to run on {workers} workers",
        tasks.len(),
        methods.len(),
        cfg.run.seeds.len(),
        queued.len()
    );
    execute(queued, &tasks, &config_path, out, workers)?;

    let mut reports = Vec::new();
    let mut failed_cells = 0;
    for (t, task) in tasks.iter().enumerate() {
        let report_dir = out.join("reports").join(&task.slug);
        fs::create_dir_all(&report_dir).map_err(|e| Error::io(&report_dir, e))?;
        for &method in &methods {
            let rc = run_config_for(&cfg.run, method);
            let seeds = cfg.run.seeds.clone();
            let report = match &task.bundle {
                Err(msg) => {
                    failed_cells += seeds.len();
                    MetricsReport::for_spec(&task.spec, &[], method, &rc, seeds, vec![], vec![], 0.0)
                        .with_error(format!("preparation failed: {msg}"))
                }
                Ok((class_set, _)) => {
                    let (mut test, mut trans, mut secs, mut errors) = (vec![], vec![], 0.0, vec![]);
                    for c in cells.iter().filter(|c| c.task == t && c.method == method) {
                        match load_result(&c.dir) {
                            Some(r) => {
                                test.push(r.test_micro_f1);
                                trans.push(r.transductive_micro_f1);
                                secs += r.wall_clock_secs;
                            }
                            None => errors.push(format!("seed {}: {}", c.seed, cell_error(&c.dir))),
                        }
                    }
                    failed_cells += errors.len();
                    let r = MetricsReport::for_spec(&task.spec, class_set, method, &rc, seeds, test, trans, secs);
                    if errors.is_empty() {
                        r
                    } else {
                        r.with_error(errors.join("; "))
                    }
                }
            };
            write_json(&report_dir.join(format!("{}.json", method_name(method))), &report)?;
            reports.push(report);
        }
    }
    write_json(&out.join("report.json"), &reports)?;
    let table = render_report(&reports, ReportFormat::Table)?;
    for (name, format) in [("report.txt", ReportFormat::Table), ("report.csv", ReportFormat::Csv)] {
        let path = out.join(name);
        fs::write(&path, render_report(&reports, format)?).map_err(|e| Error::io(&path, e))?;
    }
    print!("{table}");
    if failed_cells > 0 {
        return Err(Error::PartialFailure { failed: failed_cells, total: cells.len() });
    }
    Ok(())
}
