use rand::Rng;
use rand_distr::StandardNormal;

pub const LOG_VAR_MIN: f64 = -20.0;
pub const LOG_VAR_MAX: f64 = 20.0;

pub fn clamp_log_var(v: f64) -> f64 {
    v.clamp(LOG_VAR_MIN, LOG_VAR_MAX)
}

/// One reparameterized draw `z = mu + exp(log_var / 2) * eps`.
///
/// `log_var` holds the clamped values; `eps` is recorded so the draw can be
/// differentiated and replayed.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentSample {
    pub mu: Vec<f64>,
    pub log_var: Vec<f64>,
    pub z: Vec<f64>,
    pub eps: Vec<f64>,
    in_range: Vec<bool>,
}

pub fn reparameterize<R: Rng + ?Sized>(mu: &[f64], log_var: &[f64], rng: &mut R) -> LatentSample {
    let eps = (0..mu.len()).map(|_| rng.sample(StandardNormal)).collect();
    reparameterize_with(mu, log_var, eps)
}

/// Reparameterization with a caller-supplied noise vector.
pub fn reparameterize_with(mu: &[f64], log_var: &[f64], eps: Vec<f64>) -> LatentSample {
    assert_eq!(mu.len(), log_var.len());
    assert_eq!(mu.len(), eps.len());
    let in_range = log_var.iter().map(|v| (LOG_VAR_MIN..=LOG_VAR_MAX).contains(v)).collect();
    let log_var: Vec<f64> = log_var.iter().map(|&v| clamp_log_var(v)).collect();
    let z = mu
        .iter()
        .zip(&log_var)
        .zip(&eps)
        .map(|((m, lv), e)| m + (0.5 * lv).exp() * e)
        .collect();
    LatentSample { mu: mu.to_vec(), log_var, z, eps, in_range }
}

impl LatentSample {
    /// Maps gradients w.r.t. `z`, `mu` and the clamped `log_var` to gradients
    /// w.r.t. `mu` and the raw log-variance. Clamped coordinates pass nothing
    /// back to the raw value.
    pub fn backward(&self, g_z: &[f64], g_mu: &[f64], g_log_var: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let gm = g_z.iter().zip(g_mu).map(|(a, b)| a + b).collect();
        let glv = (0..self.z.len())
            .map(|i| {
                if self.in_range[i] {
                    g_log_var[i] + g_z[i] * self.eps[i] * 0.5 * (0.5 * self.log_var[i]).exp()
                } else {
                    0.0
                }
            })
            .collect();
        (gm, glv)
    }
}
