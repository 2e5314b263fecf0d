use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::NnError;

const LN_2PI: f64 = 1.8378770664093453; // ln(2*pi)

fn check_dims(a: usize, b: usize) -> Result<(), NnError> {
    if a != b {
        return Err(NnError::DimMismatch { expected: a, got: b });
    }
    Ok(())
}

/// Log density of `x` under a diagonal Gaussian:
/// sum_i [ -1/2 ln(2 pi var_i) - (x_i - mean_i)^2 / (2 var_i) ].
pub fn diag_gaussian_logprob(mean: &[f64], var: &[f64], x: &[f64]) -> Result<f64, NnError> {
    check_dims(mean.len(), var.len())?;
    check_dims(mean.len(), x.len())?;
    let mut lp = 0.0;
    for i in 0..mean.len() {
        if !(var[i] > 0.0) {
            return Err(NnError::NonPositiveVariance(var[i]));
        }
        let d = x[i] - mean[i];
        lp += -0.5 * (LN_2PI + var[i].ln()) - d * d / (2.0 * var[i]);
    }
    Ok(lp)
}

/// Gradients of the log density with respect to the mean and to log(var).
pub fn diag_gaussian_logprob_grads(
    mean: &[f64],
    var: &[f64],
    x: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), NnError> {
    check_dims(mean.len(), var.len())?;
    check_dims(mean.len(), x.len())?;
    let mut d_mean = Vec::with_capacity(mean.len());
    let mut d_logvar = Vec::with_capacity(mean.len());
    for i in 0..mean.len() {
        if !(var[i] > 0.0) {
            return Err(NnError::NonPositiveVariance(var[i]));
        }
        let d = x[i] - mean[i];
        d_mean.push(d / var[i]);
        d_logvar.push(-0.5 + d * d / (2.0 * var[i]));
    }
    Ok((d_mean, d_logvar))
}

/// Draws one sample. Zero variance collapses that coordinate to the mean
/// exactly; negative variance is an error.
pub fn diag_gaussian_sample<R: Rng + ?Sized>(
    mean: &[f64],
    var: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>, NnError> {
    check_dims(mean.len(), var.len())?;
    let mut out = Vec::with_capacity(mean.len());
    for i in 0..mean.len() {
        if var[i] < 0.0 {
            return Err(NnError::NegativeVariance(var[i]));
        }
        let z: f64 = rng.sample(StandardNormal);
        out.push(mean[i] + var[i].sqrt() * z);
    }
    Ok(out)
}

/// KL(P1 || P2) between diagonal Gaussians, in nats:
/// sum_i 1/2 [ ln(var2/var1) + (var1 + (mean1-mean2)^2)/var2 - 1 ].
/// Always >= 0 and exactly 0 for identical parameters.
pub fn diag_gaussian_kl(
    mean1: &[f64],
    var1: &[f64],
    mean2: &[f64],
    var2: &[f64],
) -> Result<f64, NnError> {
    check_dims(mean1.len(), var1.len())?;
    check_dims(mean1.len(), mean2.len())?;
    check_dims(mean2.len(), var2.len())?;
    let mut kl = 0.0;
    for i in 0..mean1.len() {
        if !(var1[i] > 0.0) {
            return Err(NnError::NonPositiveVariance(var1[i]));
        }
        if !(var2[i] > 0.0) {
            return Err(NnError::NonPositiveVariance(var2[i]));
        }
        let dm = mean1[i] - mean2[i];
        kl += 0.5 * ((var2[i] / var1[i]).ln() + (var1[i] + dm * dm) / var2[i] - 1.0);
    }
    Ok(kl)
}
