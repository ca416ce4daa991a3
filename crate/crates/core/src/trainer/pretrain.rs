use rand::Rng;
use rand_distr::StandardNormal;

use super::reduce::reduce_grads;
use super::{RunConfig, StepLog, TrainingPool};
use crate::augment::make_augmented_view;
use crate::data::PreparedScenario;
use crate::error::{Error, Result};
use crate::losses::{
    kl_loss_grad, ntxent_loss_grad, recon_loss_grad, supcon_loss_grad, total_pretrain_loss, LossBreakdown, LossParts,
    SupconForm,
};
use crate::model::{
    reparameterize_with, Checkpoint, Decoder, DecoderTrace, Encoder, EncoderTrace, LatentSample, NetSpec, Projector,
    ProjectorTrace,
};
use crate::optim::Adam;
use crate::par::Exec;
use crate::rng::{self, RngState};

/// Loss settings shared by the objective and the training loop.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Objective {
    pub recon_weight: f64,
    pub temperature: f64,
    pub contrastive: bool,
    pub supcon_form: SupconForm,
}

/// Inputs of one pretraining step with all randomness fixed.
///
/// `inputs` holds the `B` original windows followed by their `B` augmented
/// views; `eps` holds one noise vector per input row; `labels` covers the
/// original rows (`None` for target instances).
#[derive(Clone, Debug)]
pub struct PretrainBatch {
    pub inputs: Vec<Vec<f64>>,
    pub eps: Vec<Vec<f64>>,
    pub labels: Vec<Option<u16>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PretrainGrads {
    pub encoder: Vec<f64>,
    pub decoder: Vec<f64>,
    pub projector: Vec<f64>,
}

struct Trace {
    enc: EncoderTrace,
    latent: LatentSample,
    dec: DecoderTrace,
    proj: ProjectorTrace,
}

fn check_finite(values: &[f64], component: &str, location: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::non_finite(component, location))
    }
}

/// Value and parameter gradients of the pretraining objective
/// `w * recon + kl + con_self + con_sup` on a fixed batch.
///
/// Reconstruction and KL are averaged over both views. NT-Xent pairs row `i`
/// with row `i + B`; the supervised term runs over both views of every
/// labeled instance.
pub fn pretrain_objective(
    encoder: &Encoder,
    decoder: &Decoder,
    projector: &Projector,
    batch: &PretrainBatch,
    obj: &Objective,
    exec: Exec,
) -> Result<(LossBreakdown, PretrainGrads)> {
    let b = batch.labels.len();
    if b == 0 || batch.inputs.len() != 2 * b || batch.eps.len() != 2 * b {
        return Err(Error::shape(format!(
            "pretraining batch: {} inputs and {} noise rows for {b} instances",
            batch.inputs.len(),
            batch.eps.len()
        )));
    }
    let spec = encoder.spec();
    for x in &batch.inputs {
        crate::model::check_len("encoder input", x.len(), spec.input_len())?;
    }
    for e in &batch.eps {
        crate::model::check_len("noise row", e.len(), spec.latent_dim)?;
    }

    let traces: Vec<Trace> = exec.map_range(2 * b, |k| {
        let enc = encoder.forward(&batch.inputs[k]);
        let latent = reparameterize_with(&enc.mu, &enc.log_var, batch.eps[k].clone());
        let dec = decoder.forward(&latent.z);
        let proj = projector.forward(&latent.z);
        Trace { enc, latent, dec, proj }
    });

    let x_hat: Vec<&[f64]> = traces.iter().map(|t| t.dec.output()).collect();
    let (recon, g_xhat) = recon_loss_grad(&batch.inputs, &x_hat)?;
    let mus: Vec<&[f64]> = traces.iter().map(|t| t.latent.mu.as_slice()).collect();
    let lvs: Vec<&[f64]> = traces.iter().map(|t| t.latent.log_var.as_slice()).collect();
    let (kl, g_mu_kl, g_lv_kl) = kl_loss_grad(&mus, &lvs);

    let latent_dim = spec.latent_dim;
    let proj_dim = traces[0].proj.r.len();
    let mut g_r = vec![vec![0.0; proj_dim]; 2 * b];
    let (mut con_self, mut con_sup) = (0.0, 0.0);
    if obj.contrastive {
        let rs: Vec<&[f64]> = traces.iter().map(|t| t.proj.r.as_slice()).collect();
        let (v, g) = ntxent_loss_grad(&rs, obj.temperature)?;
        con_self = v;
        g_r = g;
        let rows: Vec<usize> = (0..2 * b).filter(|&k| batch.labels[k % b].is_some()).collect();
        if !rows.is_empty() {
            let sub: Vec<&[f64]> = rows.iter().map(|&k| rs[k]).collect();
            let labels: Vec<u16> = rows.iter().map(|&k| batch.labels[k % b].unwrap()).collect();
            let (v, g) = supcon_loss_grad(&sub, &labels, obj.temperature, obj.supcon_form)?;
            con_sup = v;
            for (&k, gk) in rows.iter().zip(g) {
                for (a, c) in g_r[k].iter_mut().zip(gk) {
                    *a += c;
                }
            }
        }
    }
    let parts = LossParts { recon, kl, con_self, con_sup };
    let breakdown = total_pretrain_loss(parts, obj.recon_weight, obj.temperature, obj.contrastive)?;

    let sizes = [encoder.params().len(), decoder.params().len(), projector.params().len()];
    let grads = reduce_grads(exec, 2 * b, &sizes, |k, bufs| {
        let t = &traces[k];
        let g_out: Vec<f64> = g_xhat[k].iter().map(|g| g * obj.recon_weight).collect();
        let mut g_z = decoder.backward(&t.dec, &g_out, &mut bufs[1]);
        if obj.contrastive {
            let gp = projector.backward(&t.proj, &g_r[k], &mut bufs[2]);
            for (a, c) in g_z.iter_mut().zip(gp) {
                *a += c;
            }
        }
        debug_assert_eq!(g_z.len(), latent_dim);
        let (g_mu, g_lv) = t.latent.backward(&g_z, &g_mu_kl[k], &g_lv_kl[k]);
        encoder.backward(&t.enc, &g_mu, &g_lv, &mut bufs[0]);
    });
    let mut it = grads.into_iter();
    let grads = PretrainGrads {
        encoder: it.next().unwrap(),
        decoder: it.next().unwrap(),
        projector: it.next().unwrap(),
    };
    Ok((breakdown, grads))
}

/// Networks and logs produced by [`pretrain`].
#[derive(Clone, Debug)]
pub struct PretrainOutcome {
    pub encoder: Encoder,
    pub decoder: Decoder,
    pub projector: Projector,
    pub log: Vec<StepLog>,
    /// `[encoder/decoder, projector]` learning rate used in each epoch.
    pub epoch_lrs: Vec<[f64; 2]>,
    pub seed: u64,
    pub epochs: usize,
}

impl PretrainOutcome {
    /// Mean logged total per epoch.
    pub fn epoch_means(&self) -> Vec<f64> {
        let mut sums = vec![(0.0, 0usize); self.epochs];
        for r in &self.log {
            sums[r.epoch].0 += r.total;
            sums[r.epoch].1 += 1;
        }
        sums.into_iter().map(|(s, n)| s / n as f64).collect()
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            net: self.encoder.spec().clone(),
            epoch: self.epochs as u32,
            rng: RngState::capture(&rng::stream(self.seed, "resume", &[self.epochs as u64])),
            networks: vec![
                ("encoder".into(), self.encoder.params().clone()),
                ("decoder".into(), self.decoder.params().clone()),
                ("projector".into(), self.projector.params().clone()),
            ],
        }
    }
}

/// Network spec for a prepared scenario.
pub(crate) fn spec_for(scenario: &PreparedScenario, cfg: &RunConfig) -> Result<NetSpec> {
    let (channels, len) = scenario.window_shape()?;
    let spec = cfg.net.for_data(channels, len, scenario.class_set().len());
    spec.validate()?;
    Ok(spec)
}

pub(crate) fn draw_eps(seed: u64, tag: &str, step: usize, rows: usize, dim: usize, exec: Exec) -> Vec<Vec<f64>> {
    exec.map_range(rows, |k| {
        let mut r = rng::stream(seed, tag, &[step as u64, k as u64]);
        (0..dim).map(|_| r.sample(StandardNormal)).collect()
    })
}

/// Builds the augmented half of a batch.
pub(crate) fn augmented(inputs: &[&[f64]], channels: usize, cfg: &RunConfig, seed: u64, tag: &str, step: usize) -> Result<Vec<Vec<f64>>> {
    let mut r = rng::stream(seed, tag, &[step as u64]);
    Ok(make_augmented_view(inputs, channels, &cfg.augment, &mut r, cfg.exec())?
        .into_iter()
        .map(|(w, _)| w)
        .collect())
}

/// VAE + contrastive pretraining over the sources and the unlabeled target.
pub fn pretrain(scenario: &PreparedScenario, cfg: &RunConfig, seed: u64) -> Result<PretrainOutcome> {
    cfg.validate()?;
    let spec = spec_for(scenario, cfg)?;
    let exec = cfg.exec();
    let mut init = rng::stream(seed, "init-pretrain", &[]);
    let mut encoder = Encoder::new(&spec, &mut init)?;
    let mut decoder = Decoder::new(&spec, &mut init)?;
    let mut projector = Projector::new(&spec, &mut init)?;
    let mut opt_enc = Adam::new(encoder.params().len(), cfg.optimizer);
    let mut opt_dec = Adam::new(decoder.params().len(), cfg.optimizer);
    let mut opt_proj = Adam::new(projector.params().len(), cfg.optimizer);

    let pool = TrainingPool::new(scenario, cfg.batch_per_domain, seed)?;
    let obj = cfg.objective();
    let steps = pool.epoch_len();
    let mut log = Vec::with_capacity(cfg.epochs * steps);
    let mut epoch_lrs = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let lr_ed = cfg.schedule.lr_at(epoch, cfg.lr_encdec);
        let lr_other = cfg.schedule.lr_at(epoch, cfg.lr_other);
        epoch_lrs.push([lr_ed, lr_other]);
        for s in 0..steps {
            let step = epoch * steps + s;
            let mb = pool.batch(step);
            let originals = mb.inputs();
            let aug = augmented(&originals, spec.in_channels, cfg, seed, "augment-pretrain", step)?;
            let mut inputs: Vec<Vec<f64>> = originals.iter().map(|x| x.to_vec()).collect();
            inputs.extend(aug);
            let eps = draw_eps(seed, "eps-pretrain", step, inputs.len(), spec.latent_dim, exec);
            let batch = PretrainBatch { inputs, eps, labels: mb.labels() };
            let location = format!("epoch {epoch} step {step}");
            let (loss, grads) = pretrain_objective(&encoder, &decoder, &projector, &batch, &obj, exec)
                .map_err(|e| match e {
                    Error::NonFinite { component, .. } => Error::non_finite(component, location.clone()),
                    other => other,
                })?;
            check_finite(&grads.encoder, "encoder gradient", &location)?;
            check_finite(&grads.decoder, "decoder gradient", &location)?;
            check_finite(&grads.projector, "projector gradient", &location)?;
            opt_enc.step(encoder.params_mut(), &grads.encoder, lr_ed);
            opt_dec.step(decoder.params_mut(), &grads.decoder, lr_ed);
            if obj.contrastive {
                opt_proj.step(projector.params_mut(), &grads.projector, lr_other);
            }
            if !encoder.params().all_finite() || !decoder.params().all_finite() || !projector.params().all_finite() {
                return Err(Error::non_finite("parameters", location));
            }
            log.push(StepLog {
                step,
                epoch,
                recon: loss.recon,
                kl: loss.kl,
                con_self: loss.con_self,
                con_sup: loss.con_sup,
                total: loss.total,
            });
        }
        log::debug!("pretrain seed {seed} epoch {epoch}: {} steps", steps);
    }
    Ok(PretrainOutcome { encoder, decoder, projector, log, epoch_lrs, seed, epochs: cfg.epochs })
}
