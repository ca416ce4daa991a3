use super::classifier::{check_class_coverage, source_val_f1};
use super::pretrain::spec_for;
use super::reduce::reduce_grads;
use super::{RunConfig, TrainingPool};
use crate::data::PreparedScenario;
use crate::error::{Error, Result};
use crate::losses::cross_entropy_grad;
use crate::model::{Classifier, Encoder};
use crate::optim::Adam;
use crate::rng;

#[derive(Clone, Debug)]
pub struct BaselineOutcome {
    pub encoder: Encoder,
    pub classifier: Classifier,
    pub best_epoch: usize,
    pub val_f1: Vec<f64>,
    pub epoch_loss: Vec<f64>,
}

/// Source-only reference: encoder mean head and classifier trained jointly
/// with plain cross-entropy on source windows. No reconstruction, no
/// contrastive terms, no augmentation and no target data.
pub fn source_only(scenario: &PreparedScenario, cfg: &RunConfig, seed: u64) -> Result<BaselineOutcome> {
    cfg.validate()?;
    let spec = spec_for(scenario, cfg)?;
    check_class_coverage(scenario)?;
    let exec = cfg.exec();
    let mut init = rng::stream(seed, "init-baseline", &[]);
    let mut encoder = Encoder::new(&spec, &mut init)?;
    let mut classifier = Classifier::new(&spec, &mut init)?;
    let mut opt_enc = Adam::new(encoder.params().len(), cfg.optimizer);
    let mut opt_clf = Adam::new(classifier.params().len(), cfg.optimizer);
    let pool = TrainingPool::sources_only(scenario, cfg.batch_per_domain, seed ^ 0xba5e)?;
    let steps = pool.epoch_len();
    let epochs = cfg.classifier_epochs();
    let mut best: Option<(f64, usize, Encoder, Classifier)> = None;
    let mut val_f1 = Vec::with_capacity(epochs);
    let mut epoch_loss = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let lr_enc = cfg.schedule.lr_at(epoch, cfg.lr_encdec);
        let lr_clf = cfg.schedule.lr_at(epoch, cfg.lr_other);
        let mut loss_sum = 0.0;
        for s in 0..steps {
            let step = epoch * steps + s;
            let mb = pool.batch(step);
            let inputs = mb.inputs();
            let labels: Vec<u16> = mb.labels().into_iter().map(|l| l.expect("source label")).collect();
            let traces = exec.map(&inputs, |_, x| {
                let e = encoder.forward(x);
                let c = classifier.forward(&e.mu);
                (e, c)
            });
            let logits: Vec<&[f64]> = traces.iter().map(|t| t.1.logits.as_slice()).collect();
            let (loss, g_logits) = cross_entropy_grad(&logits, &labels)?;
            let sizes = [classifier.params().len(), encoder.params().len()];
            let grads = reduce_grads(exec, inputs.len(), &sizes, |k, bufs| {
                let (e, c) = &traces[k];
                let g_mu = classifier.backward(c, &g_logits[k], &mut bufs[0]);
                let zeros = vec![0.0; g_mu.len()];
                encoder.backward(e, &g_mu, &zeros, &mut bufs[1]);
            });
            if !loss.is_finite() || grads.iter().flatten().any(|g| !g.is_finite()) {
                return Err(Error::non_finite("baseline loss", format!("epoch {epoch} step {step}")));
            }
            opt_clf.step(classifier.params_mut(), &grads[0], lr_clf);
            opt_enc.step(encoder.params_mut(), &grads[1], lr_enc);
            loss_sum += loss;
        }
        epoch_loss.push(loss_sum / steps as f64);
        let f1 = source_val_f1(scenario, &encoder, &classifier, exec)?;
        val_f1.push(f1);
        if best.as_ref().is_none_or(|b| f1 > b.0) {
            best = Some((f1, epoch, encoder.clone(), classifier.clone()));
        }
    }
    let (_, best_epoch, encoder, classifier) = best.expect("at least one epoch");
    Ok(BaselineOutcome { encoder, classifier, best_epoch, val_f1, epoch_loss })
}
