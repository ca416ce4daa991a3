//! Training objectives and their gradients.
//!
//! Every loss comes in two flavours: a value-only function and a `_grad`
//! variant returning the value together with the gradient w.r.t. its inputs.
//! Contrastive losses work on unit-norm rows, so similarity is a dot product.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_temperature(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::config(format!("temperature must be positive, got {t}")))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `log(sum(exp(v)))` over the selected entries; `-inf` if none are selected.
fn log_sum_exp(v: &[f64], keep: impl Fn(usize) -> bool) -> f64 {
    let m = v
        .iter()
        .enumerate()
        .filter(|(k, _)| keep(*k))
        .map(|(_, x)| *x)
        .fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    let s: f64 = v.iter().enumerate().filter(|(k, _)| keep(*k)).map(|(_, x)| (x - m).exp()).sum();
    m + s.ln()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(logits, |_| true);
    logits.iter().map(|v| (v - lse).exp()).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(logits, |_| true);
    logits.iter().map(|v| v - lse).collect()
}

fn check_rows<R: AsRef<[f64]>>(what: &str, rows: &[R]) -> Result<usize> {
    let width = rows.first().map_or(0, |r| r.as_ref().len());
    if rows.iter().any(|r| r.as_ref().len() != width) {
        return Err(Error::shape(format!("{what}: rows have different lengths")));
    }
    Ok(width)
}

/// Mean squared error over every element of the batch.
pub fn recon_loss<A: AsRef<[f64]>, B: AsRef<[f64]>>(x: &[A], x_hat: &[B]) -> Result<f64> {
    recon_loss_grad(x, x_hat).map(|(v, _)| v)
}

/// Value and gradient w.r.t. `x_hat`.
pub fn recon_loss_grad<A: AsRef<[f64]>, B: AsRef<[f64]>>(x: &[A], x_hat: &[B]) -> Result<(f64, Vec<Vec<f64>>)> {
    if x.len() != x_hat.len() || x.is_empty() {
        return Err(Error::shape(format!(
            "reconstruction: {} inputs vs {} reconstructions",
            x.len(),
            x_hat.len()
        )));
    }
    let n: usize = x.iter().map(|r| r.as_ref().len()).sum();
    let mut sum = 0.0;
    let mut grads = Vec::with_capacity(x.len());
    for (a, b) in x.iter().zip(x_hat) {
        let (a, b) = (a.as_ref(), b.as_ref());
        if a.len() != b.len() {
            return Err(Error::shape(format!("reconstruction: row of {} vs {}", a.len(), b.len())));
        }
        let mut g = Vec::with_capacity(a.len());
        for (u, v) in a.iter().zip(b) {
            let d = v - u;
            sum += d * d;
            g.push(2.0 * d / n as f64);
        }
        grads.push(g);
    }
    Ok((sum / n as f64, grads))
}

/// Mean over the batch of the KL divergence from `N(mu, exp(log_var))` to the
/// standard normal prior.
pub fn kl_loss<A: AsRef<[f64]>>(mu: &[A], log_var: &[A]) -> f64 {
    kl_loss_grad(mu, log_var).0
}

/// Value and gradients w.r.t. `mu` and `log_var`.
pub fn kl_loss_grad<A: AsRef<[f64]>>(mu: &[A], log_var: &[A]) -> (f64, Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let b = mu.len() as f64;
    let mut total = 0.0;
    let mut g_mu = Vec::with_capacity(mu.len());
    let mut g_lv = Vec::with_capacity(mu.len());
    for (m, lv) in mu.iter().zip(log_var) {
        let (m, lv) = (m.as_ref(), lv.as_ref());
        let mut row = 0.0;
        for (a, l) in m.iter().zip(lv) {
            row += a * a + l.exp() - 1.0 - l;
        }
        total += 0.5 * row;
        g_mu.push(m.iter().map(|a| a / b).collect());
        g_lv.push(lv.iter().map(|l| 0.5 * (l.exp() - 1.0) / b).collect());
    }
    (total / b, g_mu, g_lv)
}

/// Pairwise similarity matrix `r_i . r_j / tau`.
fn similarities<R: AsRef<[f64]>>(r: &[R], tau: f64) -> Vec<Vec<f64>> {
    r.iter()
        .map(|a| r.iter().map(|b| dot(a.as_ref(), b.as_ref()) / tau).collect())
        .collect()
}

/// Turns `dL/ds_ij` coefficients into gradients w.r.t. the rows.
fn rows_grad<R: AsRef<[f64]>>(r: &[R], coef: &[Vec<f64>], tau: f64) -> Vec<Vec<f64>> {
    let p = r.first().map_or(0, |x| x.as_ref().len());
    let mut g = vec![vec![0.0; p]; r.len()];
    for (i, ci) in coef.iter().enumerate() {
        for (k, &c) in ci.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let c = c / tau;
            let (ri, rk) = (r[i].as_ref(), r[k].as_ref());
            for d in 0..p {
                g[i][d] += c * rk[d];
                g[k][d] += c * ri[d];
            }
        }
    }
    g
}

/// NT-Xent over `2N` rows where row `i` and row `i + N` are the two views of
/// one instance. Self-similarity is excluded from every denominator and the
/// result is the mean over all `2N` anchors.
pub fn ntxent_loss<R: AsRef<[f64]>>(r: &[R], temperature: f64) -> Result<f64> {
    ntxent_loss_grad(r, temperature).map(|(v, _)| v)
}

pub fn ntxent_loss_grad<R: AsRef<[f64]>>(r: &[R], temperature: f64) -> Result<(f64, Vec<Vec<f64>>)> {
    check_temperature(temperature)?;
    check_rows("ntxent", r)?;
    let m = r.len();
    if m < 2 || m % 2 != 0 {
        return Err(Error::shape(format!("ntxent needs an even number of rows, at least 2, got {m}")));
    }
    let n = m / 2;
    let s = similarities(r, temperature);
    let mut total = 0.0;
    let mut coef = vec![vec![0.0; m]; m];
    for i in 0..m {
        let pos = (i + n) % m;
        let lse = log_sum_exp(&s[i], |k| k != i);
        total += lse - s[i][pos];
        for k in (0..m).filter(|&k| k != i) {
            coef[i][k] = (s[i][k] - lse).exp() / m as f64;
        }
        coef[i][pos] -= 1.0 / m as f64;
    }
    Ok((total / m as f64, rows_grad(r, &coef, temperature)))
}

/// Which variant of the supervised contrastive objective to use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SupconForm {
    /// `-log` of the positive share of each anchor's similarity mass.
    #[default]
    Fixed,
    /// Sum of the `-log` positive share and the `-log` negative share.
    Literal,
}

/// `L_ij = 1` iff rows `i` and `j` share a label; the diagonal never counts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairLabelMatrix {
    n: usize,
    same: Vec<bool>,
}

impl PairLabelMatrix {
    pub fn from_labels(labels: &[u16]) -> Self {
        let n = labels.len();
        let same = (0..n * n).map(|k| labels[k / n] == labels[k % n]).collect();
        Self { n, same }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.same[i * self.n + j]
    }

    pub fn is_positive(&self, i: usize, j: usize) -> bool {
        i != j && self.get(i, j)
    }

    pub fn is_negative(&self, i: usize, j: usize) -> bool {
        !self.get(i, j)
    }

    pub fn positives(&self, i: usize) -> usize {
        (0..self.n).filter(|&j| self.is_positive(i, j)).count()
    }

    pub fn negatives(&self, i: usize) -> usize {
        (0..self.n).filter(|&j| self.is_negative(i, j)).count()
    }
}

/// Supervised contrastive loss averaged over eligible anchors. An anchor is
/// eligible when it has a positive (and, for the literal form, a negative).
pub fn supcon_loss<R: AsRef<[f64]>>(r: &[R], labels: &[u16], temperature: f64, form: SupconForm) -> Result<f64> {
    supcon_loss_grad(r, labels, temperature, form).map(|(v, _)| v)
}

pub fn supcon_loss_grad<R: AsRef<[f64]>>(
    r: &[R],
    labels: &[u16],
    temperature: f64,
    form: SupconForm,
) -> Result<(f64, Vec<Vec<f64>>)> {
    check_temperature(temperature)?;
    check_rows("supcon", r)?;
    if r.len() != labels.len() {
        return Err(Error::shape(format!("supcon: {} rows vs {} labels", r.len(), labels.len())));
    }
    let m = r.len();
    let pairs = PairLabelMatrix::from_labels(labels);
    let eligible: Vec<usize> = (0..m)
        .filter(|&i| pairs.positives(i) > 0 && (form == SupconForm::Fixed || pairs.negatives(i) > 0))
        .collect();
    if eligible.is_empty() {
        return Err(Error::DegenerateBatch(format!(
            "none of the {m} supervised contrastive anchors has a positive pair"
        )));
    }
    let e = eligible.len() as f64;
    let s = similarities(r, temperature);
    let mut total = 0.0;
    let mut coef = vec![vec![0.0; m]; m];
    for &i in &eligible {
        let all = log_sum_exp(&s[i], |j| j != i);
        let pos = log_sum_exp(&s[i], |j| pairs.is_positive(i, j));
        let mut all_weight = 1.0;
        total += all - pos;
        let neg = match form {
            SupconForm::Fixed => None,
            SupconForm::Literal => {
                let neg = log_sum_exp(&s[i], |j| pairs.is_negative(i, j));
                total += all - neg;
                all_weight = 2.0;
                Some(neg)
            }
        };
        for j in (0..m).filter(|&j| j != i) {
            let mut c = all_weight * (s[i][j] - all).exp();
            if pairs.is_positive(i, j) {
                c -= (s[i][j] - pos).exp();
            } else if let Some(neg) = neg {
                c -= (s[i][j] - neg).exp();
            }
            coef[i][j] = c / e;
        }
    }
    Ok((total / e, rows_grad(r, &coef, temperature)))
}

/// Two-view cross-entropy: the per-instance sum of both views' CE terms,
/// averaged over the batch.
pub fn classifier_loss<A: AsRef<[f64]>>(logits: &[A], logits_aug: &[A], labels: &[u16]) -> Result<f64> {
    classifier_loss_grad(logits, logits_aug, labels).map(|(v, _, _)| v)
}

/// Value and gradients w.r.t. both logit batches.
#[allow(clippy::type_complexity)]
pub fn classifier_loss_grad<A: AsRef<[f64]>>(
    logits: &[A],
    logits_aug: &[A],
    labels: &[u16],
) -> Result<(f64, Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let b = labels.len();
    if logits.len() != b || logits_aug.len() != b || b == 0 {
        return Err(Error::shape(format!(
            "classifier loss: {} and {} logit rows for {b} labels",
            logits.len(),
            logits_aug.len()
        )));
    }
    let mut total = 0.0;
    let mut grads = [Vec::with_capacity(b), Vec::with_capacity(b)];
    for (i, &y) in labels.iter().enumerate() {
        for (v, rows) in [logits, logits_aug].into_iter().enumerate() {
            let row = rows[i].as_ref();
            let y = y as usize;
            if y >= row.len() {
                return Err(Error::shape(format!("label {y} out of range for {} classes", row.len())));
            }
            let ls = log_softmax(row);
            total -= ls[y];
            let mut g: Vec<f64> = ls.iter().map(|l| l.exp() / b as f64).collect();
            g[y] -= 1.0 / b as f64;
            grads[v].push(g);
        }
    }
    let [g, g_aug] = grads;
    Ok((total / b as f64, g, g_aug))
}

/// Mean single-view cross-entropy and its gradient w.r.t. the logits.
pub fn cross_entropy_grad<A: AsRef<[f64]>>(logits: &[A], labels: &[u16]) -> Result<(f64, Vec<Vec<f64>>)> {
    let b = labels.len();
    if logits.len() != b || b == 0 {
        return Err(Error::shape(format!("cross-entropy: {} logit rows for {b} labels", logits.len())));
    }
    let mut total = 0.0;
    let mut grads = Vec::with_capacity(b);
    for (row, &y) in logits.iter().zip(labels) {
        let row = row.as_ref();
        let y = y as usize;
        if y >= row.len() {
            return Err(Error::shape(format!("label {y} out of range for {} classes", row.len())));
        }
        let ls = log_softmax(row);
        total -= ls[y];
        let mut g: Vec<f64> = ls.iter().map(|l| l.exp() / b as f64).collect();
        g[y] -= 1.0 / b as f64;
        grads.push(g);
    }
    Ok((total / b as f64, grads))
}

/// Unweighted loss components of one pretraining step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossParts {
    pub recon: f64,
    pub kl: f64,
    pub con_self: f64,
    pub con_sup: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub recon: f64,
    pub kl: f64,
    pub con_self: f64,
    pub con_sup: f64,
    pub clf: f64,
    pub total: f64,
    pub recon_weight: f64,
    pub temperature: f64,
}

/// Combines the components; with `contrastive` off both contrastive terms are
/// zeroed. Any non-finite component is reported by name.
pub fn total_pretrain_loss(parts: LossParts, recon_weight: f64, temperature: f64, contrastive: bool) -> Result<LossBreakdown> {
    let (con_self, con_sup) = if contrastive { (parts.con_self, parts.con_sup) } else { (0.0, 0.0) };
    for (name, v) in [("recon", parts.recon), ("kl", parts.kl), ("con_self", con_self), ("con_sup", con_sup)] {
        if !v.is_finite() {
            return Err(Error::non_finite(name, "loss aggregation"));
        }
    }
    let total = recon_weight * parts.recon + parts.kl + con_self + con_sup;
    if !total.is_finite() {
        return Err(Error::non_finite("total", "loss aggregation"));
    }
    Ok(LossBreakdown {
        recon: parts.recon,
        kl: parts.kl,
        con_self,
        con_sup,
        clf: 0.0,
        total,
        recon_weight,
        temperature,
    })
}
