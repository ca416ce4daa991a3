use super::pretrain::{augmented, draw_eps, spec_for};
use super::reduce::reduce_grads;
use super::{LatentMode, RunConfig, TrainingPool};
use crate::data::{PreparedScenario, SensorWindow, Split};
use crate::error::{Error, Result};
use crate::eval::micro_f1;
use crate::losses::classifier_loss_grad;
use crate::model::{argmax, check_len, reparameterize_with, Classifier, Encoder};
use crate::optim::Adam;
use crate::par::Exec;
use crate::rng;

/// One classifier-stage batch with its randomness fixed: `B` originals then
/// `B` augmented views, optional per-row noise (absent means the mean
/// latent is used) and the `B` source labels.
#[derive(Clone, Debug)]
pub struct ClassifierBatch {
    pub inputs: Vec<Vec<f64>>,
    pub eps: Option<Vec<Vec<f64>>>,
    pub labels: Vec<u16>,
}

/// Two-view cross-entropy of the classifier on encoder latents, with the
/// classifier gradient and, when `encoder_grad` is set, the gradient the
/// encoder would receive. Training never applies the latter.
pub fn classifier_objective(
    encoder: &Encoder,
    classifier: &Classifier,
    batch: &ClassifierBatch,
    encoder_grad: bool,
    exec: Exec,
) -> Result<(f64, Vec<f64>, Option<Vec<f64>>)> {
    let b = batch.labels.len();
    if b == 0 || batch.inputs.len() != 2 * b || batch.eps.as_ref().is_some_and(|e| e.len() != 2 * b) {
        return Err(Error::shape(format!("classifier batch: {} inputs for {b} labels", batch.inputs.len())));
    }
    for x in &batch.inputs {
        check_len("encoder input", x.len(), encoder.spec().input_len())?;
    }
    let traces = exec.map_range(2 * b, |k| {
        let enc = encoder.forward(&batch.inputs[k]);
        let latent = match &batch.eps {
            Some(eps) => reparameterize_with(&enc.mu, &enc.log_var, eps[k].clone()),
            None => reparameterize_with(&enc.mu, &enc.log_var, vec![0.0; enc.mu.len()]),
        };
        let clf = classifier.forward(&latent.z);
        (enc, latent, clf)
    });
    let logits: Vec<&[f64]> = traces.iter().map(|t| t.2.logits.as_slice()).collect();
    let (loss, g0, g1) = classifier_loss_grad(&logits[..b], &logits[b..], &batch.labels)?;
    let g_logits: Vec<&Vec<f64>> = g0.iter().chain(&g1).collect();
    let sizes = if encoder_grad {
        vec![classifier.params().len(), encoder.params().len()]
    } else {
        vec![classifier.params().len()]
    };
    let mut grads = reduce_grads(exec, 2 * b, &sizes, |k, bufs| {
        let (enc, latent, clf) = &traces[k];
        let g_z = classifier.backward(clf, g_logits[k], &mut bufs[0]);
        if encoder_grad {
            let zeros = vec![0.0; g_z.len()];
            let (g_mu, g_lv) = if batch.eps.is_some() {
                latent.backward(&g_z, &zeros, &zeros)
            } else {
                (g_z, zeros)
            };
            encoder.backward(enc, &g_mu, &g_lv, &mut bufs[1]);
        }
    });
    let enc_grads = encoder_grad.then(|| grads.pop().unwrap());
    Ok((loss, grads.pop().unwrap(), enc_grads))
}

/// Deterministic labels: the posterior mean goes through the classifier and
/// the largest logit wins, ties to the lowest class index.
pub fn predict(encoder: &Encoder, classifier: &Classifier, windows: &[SensorWindow], exec: Exec) -> Result<Vec<u16>> {
    let inputs: Vec<&[f64]> = windows.iter().map(|w| w.values.as_slice()).collect();
    let (mu, _) = encoder.encode(&inputs, exec)?;
    let logits = classifier.classify(&mu, exec)?;
    Ok(logits.iter().map(|l| argmax(l) as u16).collect())
}

/// Micro-F1 of the pipeline on the concatenated source validation splits.
pub(crate) fn source_val_f1(
    scenario: &PreparedScenario,
    encoder: &Encoder,
    classifier: &Classifier,
    exec: Exec,
) -> Result<f64> {
    let mut truth = Vec::new();
    let mut pred = Vec::new();
    for d in scenario.sources() {
        let windows = d.split(Split::Val);
        if windows.is_empty() {
            continue;
        }
        truth.extend(d.eval_labels(Split::Val)?);
        pred.extend(predict(encoder, classifier, windows, exec)?);
    }
    if truth.is_empty() {
        return Err(Error::EmptyDomain("source validation splits".into()));
    }
    micro_f1(&truth, &pred, scenario.class_set().len())
}

/// Every class of the scenario must occur in some source training split.
pub(crate) fn check_class_coverage(scenario: &PreparedScenario) -> Result<()> {
    let classes = scenario.class_set();
    let mut seen = vec![0usize; classes.len()];
    for d in scenario.sources() {
        for w in d.split(Split::Train) {
            if let Some(l) = w.label() {
                seen[l as usize] += 1;
            }
        }
    }
    match seen.iter().position(|&c| c == 0) {
        Some(c) => Err(Error::Stratification { class: classes[c].clone(), count: 0 }),
        None => Ok(()),
    }
}

#[derive(Clone, Debug)]
pub struct ClassifierOutcome {
    /// Parameters from the epoch with the best source-validation micro-F1.
    pub classifier: Classifier,
    pub best_epoch: usize,
    pub val_f1: Vec<f64>,
    /// Mean training loss per epoch.
    pub epoch_loss: Vec<f64>,
    pub epoch_lrs: Vec<f64>,
}

/// Trains a fresh classifier on frozen-encoder latents of labeled source
/// windows and their augmented views.
pub fn train_classifier(encoder: &Encoder, scenario: &PreparedScenario, cfg: &RunConfig, seed: u64) -> Result<ClassifierOutcome> {
    cfg.validate()?;
    let spec = spec_for(scenario, cfg)?;
    if encoder.spec() != &spec {
        return Err(Error::shape("encoder checkpoint was built for a different network spec"));
    }
    check_class_coverage(scenario)?;
    let exec = cfg.exec();
    let mut classifier = Classifier::new(&spec, &mut rng::stream(seed, "init-classifier", &[]))?;
    let mut opt = Adam::new(classifier.params().len(), cfg.optimizer);
    let pool = TrainingPool::sources_only(scenario, cfg.batch_per_domain, seed ^ 0x5eed_c1f)?;
    let steps = pool.epoch_len();
    let epochs = cfg.classifier_epochs();
    let mut best: Option<(f64, usize, Classifier)> = None;
    let mut val_f1 = Vec::with_capacity(epochs);
    let mut epoch_loss = Vec::with_capacity(epochs);
    let mut epoch_lrs = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let lr = cfg.schedule.lr_at(epoch, cfg.lr_other);
        epoch_lrs.push(lr);
        let mut loss_sum = 0.0;
        for s in 0..steps {
            let step = epoch * steps + s;
            let mb = pool.batch(step);
            let originals = mb.inputs();
            let aug = augmented(&originals, spec.in_channels, cfg, seed, "augment-classifier", step)?;
            let mut inputs: Vec<Vec<f64>> = originals.iter().map(|x| x.to_vec()).collect();
            inputs.extend(aug);
            let eps = match cfg.latent_for_classifier {
                LatentMode::Sample => Some(draw_eps(seed, "eps-classifier", step, inputs.len(), spec.latent_dim, exec)),
                LatentMode::Mean => None,
            };
            let labels = mb.labels().into_iter().map(|l| l.expect("source instances carry labels")).collect();
            let batch = ClassifierBatch { inputs, eps, labels };
            let (loss, grads, _) = classifier_objective(encoder, &classifier, &batch, false, exec)?;
            if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::non_finite("classifier loss", format!("epoch {epoch} step {step}")));
            }
            opt.step(classifier.params_mut(), &grads, lr);
            loss_sum += loss;
        }
        epoch_loss.push(loss_sum / steps as f64);
        let f1 = source_val_f1(scenario, encoder, &classifier, exec)?;
        val_f1.push(f1);
        if best.as_ref().is_none_or(|(b, _, _)| f1 > *b) {
            best = Some((f1, epoch, classifier.clone()));
        }
    }
    let (_, best_epoch, classifier) = best.expect("at least one epoch");
    Ok(ClassifierOutcome { classifier, best_epoch, val_f1, epoch_loss, epoch_lrs })
}
