use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use vacda::config::ExperimentConfig;
use vacda::data::{read_bundle, write_bundle, PreparedScenario, Split};
use vacda::eval::{micro_f1, render_report, MetricsReport, ReportFormat};
use vacda::manifest::RunManifest;
use vacda::model::{Checkpoint, Classifier, Encoder};
use vacda::rng::{self, RngState};
use vacda::trainer::{self, predict, write_loss_log};
use vacda::{Error, Result};

use crate::ConfigArgs;

pub fn load_config(args: &ConfigArgs) -> Result<ExperimentConfig> {
    ExperimentConfig::load(args.config.as_deref(), &args.overrides)
}

/// A manifest for `command` with the config file recorded as an input.
pub fn manifest(command: &str, args: &ConfigArgs, cfg: &ExperimentConfig) -> Result<RunManifest> {
    let mut m = RunManifest::new(command, cfg);
    if let Some(path) = &args.config {
        m.input("config_file", path)?;
    }
    Ok(m)
}

/// Refuses a non-empty output directory unless `force` is set.
pub fn claim_output(out: &Path, force: bool) -> Result<()> {
    let occupied = match fs::read_dir(out) {
        Ok(mut entries) => entries.next().is_some(),
        Err(_) => false,
    };
    if occupied && !force {
        return Err(Error::config(format!(
            "output directory {} is not empty; pass --force to overwrite",
            out.display()
        )));
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}

pub fn slug(text: &str) -> String {
    let mut s = String::new();
    for c in text.chars() {
        if c.is_ascii_alphanumeric() {
            s.push(c.to_ascii_lowercase());
        } else if !s.ends_with('-') {
            s.push('-');
        }
    }
    s.trim_matches('-').to_string()
}

pub fn task_slug(sc: &vacda::data::ScenarioSpec) -> String {
    slug(&format!("{} to {}", sc.source_groups.join(" "), sc.target_group))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn synth(args: &ConfigArgs, out: &Path, force: bool) -> Result<()> {
    let cfg = load_config(args)?;
    claim_output(out, force)?;
    manifest("synth", args, &cfg)?.write(out)?;
    let sc = cfg.synthetic.prepare()?;
    write_bundle(out, &sc, cfg.synthetic.seed)?;
    log::info!("synthetic scenario {} written to {}", sc.spec.task_label(), out.display());
    Ok(())
}

pub fn prepare(args: &ConfigArgs, out: &Path, force: bool) -> Result<()> {
    let cfg = load_config(args)?;
    let tasks = cfg.tasks()?;
    claim_output(out, force)?;
    manifest("prepare", args, &cfg)?.write(out)?;
    for spec in &tasks {
        let dir = out.join(task_slug(spec));
        let (sc, seed) = cfg.prepare_task(spec)?;
        write_bundle(&dir, &sc, seed)?;
        log::info!("prepared {} in {}", spec.task_label(), dir.display());
    }
    Ok(())
}

pub fn pretrain(args: &ConfigArgs, bundle: &Path, seed: u64, out: &Path, force: bool) -> Result<()> {
    let cfg = load_config(args)?;
    claim_output(out, force)?;
    let mut m = manifest("pretrain", args, &cfg)?.param("seed", seed);
    m.input("bundle", bundle)?;
    m.write(out)?;
    let sc = read_bundle(bundle)?;
    let outcome = trainer::pretrain(&sc, &cfg.run, seed)?;
    outcome.checkpoint().save(&out.join("encoder.ckpt"))?;
    write_loss_log(&out.join("loss_log.csv"), &outcome.log)?;
    let means = outcome.epoch_means();
    log::info!(
        "pretrained {} seed {seed}: mean loss {:.4e} -> {:.4e}",
        sc.spec.task_label(),
        means.first().copied().unwrap_or(f64::NAN),
        means.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn load_encoder(path: &Path) -> Result<Encoder> {
    let ck = Checkpoint::load(path)?;
    Encoder::from_params(&ck.net, ck.network_required("encoder", path)?.clone())
}

fn load_classifier(path: &Path) -> Result<Classifier> {
    let ck = Checkpoint::load(path)?;
    Classifier::from_params(&ck.net, ck.network_required("classifier", path)?.clone())
}

#[derive(Serialize)]
struct ClassifierSummary {
    best_epoch: usize,
    val_micro_f1: Vec<f64>,
    epoch_loss: Vec<f64>,
}

pub fn train_classifier(
    args: &ConfigArgs,
    bundle: &Path,
    encoder_path: &Path,
    seed: u64,
    out: &Path,
    force: bool,
) -> Result<()> {
    let cfg = load_config(args)?;
    claim_output(out, force)?;
    let mut m = manifest("train-classifier", args, &cfg)?.param("seed", seed);
    m.input("bundle", bundle)?;
    m.input("encoder", encoder_path)?;
    m.write(out)?;
    let sc = read_bundle(bundle)?;
    let encoder = load_encoder(encoder_path)?;
    let outcome = trainer::train_classifier(&encoder, &sc, &cfg.run, seed)?;
    let ck = Checkpoint {
        net: encoder.spec().clone(),
        epoch: outcome.best_epoch as u32,
        rng: RngState::capture(&rng::stream(seed, "classifier-checkpoint", &[])),
        networks: vec![("classifier".into(), outcome.classifier.params().clone())],
    };
    ck.save(&out.join("classifier.ckpt"))?;
    write_json(
        &out.join("classifier.json"),
        &ClassifierSummary {
            best_epoch: outcome.best_epoch,
            val_micro_f1: outcome.val_f1.clone(),
            epoch_loss: outcome.epoch_loss,
        },
    )?;
    log::info!(
        "classifier for {} seed {seed}: best source-val micro-F1 {:.4} at epoch {}",
        sc.spec.task_label(),
        outcome.val_f1[outcome.best_epoch],
        outcome.best_epoch
    );
    Ok(())
}

#[derive(Serialize)]
struct Evaluation {
    task: String,
    class_set: Vec<String>,
    test_micro_f1: f64,
    transductive_micro_f1: f64,
    n_test: usize,
    n_transductive: usize,
}

fn score(sc: &PreparedScenario, encoder: &Encoder, classifier: &Classifier, cfg: &ExperimentConfig) -> Result<Evaluation> {
    let target = sc.target();
    let n = sc.class_set().len();
    let mut f1 = [0.0; 2];
    let mut counts = [0; 2];
    for (i, split) in [Split::Test, Split::Train].into_iter().enumerate() {
        let pred = predict(encoder, classifier, target.split(split), cfg.run.exec())?;
        f1[i] = micro_f1(&target.eval_labels(split)?, &pred, n)?;
        counts[i] = pred.len();
    }
    Ok(Evaluation {
        task: sc.spec.task_label(),
        class_set: sc.class_set().to_vec(),
        test_micro_f1: f1[0],
        transductive_micro_f1: f1[1],
        n_test: counts[0],
        n_transductive: counts[1],
    })
}

pub fn evaluate(
    args: &ConfigArgs,
    bundle: &Path,
    encoder_path: &Path,
    classifier_path: &Path,
    out: Option<&Path>,
    force: bool,
) -> Result<()> {
    let cfg = load_config(args)?;
    if let Some(out) = out {
        claim_output(out, force)?;
        let mut m = manifest("evaluate", args, &cfg)?;
        m.input("bundle", bundle)?;
        m.input("encoder", encoder_path)?;
        m.input("classifier", classifier_path)?;
        m.write(out)?;
    }
    let sc = read_bundle(bundle)?;
    let eval = score(&sc, &load_encoder(encoder_path)?, &load_classifier(classifier_path)?, &cfg)?;
    if let Some(out) = out {
        write_json(&out.join("metrics.json"), &eval)?;
    }
    println!("{}", serde_json::to_string_pretty(&eval).expect("evaluation serializes"));
    Ok(())
}

/// Reports from a suite directory, a combined report file or a single
/// report file.
pub fn read_reports(path: &Path) -> Result<Vec<MetricsReport>> {
    let file: PathBuf = if path.is_dir() { path.join("report.json") } else { path.to_path_buf() };
    let text = fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
    serde_json::from_str::<Vec<MetricsReport>>(&text)
        .or_else(|_| serde_json::from_str::<MetricsReport>(&text).map(|r| vec![r]))
        .map_err(|e| Error::format(&file, e.to_string()))
}

pub fn report(inputs: &[PathBuf], format: &str) -> Result<()> {
    let format: ReportFormat = format.parse()?;
    let mut reports = Vec::new();
    for p in inputs {
        reports.extend(read_reports(p)?);
    }
    print!("{}", render_report(&reports, format)?);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs() {
        assert_eq!(slug("RA, LA → Torso"), "ra-la-torso");
        assert_eq!(slug("  a__B "), "a-b");
    }

    #[test]
    fn claim_refuses_occupied_directories() {
        let dir = tempfile::tempdir().unwrap();
        claim_output(&dir.path().join("fresh"), false).unwrap();
        fs::write(dir.path().join("x"), "1").unwrap();
        assert!(matches!(claim_output(dir.path(), false), Err(Error::Config(_))));
        claim_output(dir.path(), true).unwrap();
    }
}
