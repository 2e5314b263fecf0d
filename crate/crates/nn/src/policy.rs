use rand::Rng;

use crate::error::NnError;
use crate::gaussian::{diag_gaussian_kl, diag_gaussian_logprob, diag_gaussian_sample};
use crate::mlp::{Mlp, MlpCache, MlpSpec};

/// Clamp range for the log-variance head output.
pub const LOGVAR_MIN: f64 = -10.0;
pub const LOGVAR_MAX: f64 = 4.0;

/// Output of a policy forward pass: a diagonal Gaussian over actions.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianParams {
    pub mean: Vec<f64>,
    /// Log variance after clamping to [LOGVAR_MIN, LOGVAR_MAX].
    pub logvar: Vec<f64>,
}

impl GaussianParams {
    pub fn var(&self) -> Vec<f64> {
        self.logvar.iter().map(|lv| lv.exp()).collect()
    }

    pub fn log_prob(&self, action: &[f64]) -> Result<f64, NnError> {
        diag_gaussian_logprob(&self.mean, &self.var(), action)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>, NnError> {
        diag_gaussian_sample(&self.mean, &self.var(), rng)
    }

    /// KL(self || other), nats.
    pub fn kl_to(&self, other: &GaussianParams) -> Result<f64, NnError> {
        diag_gaussian_kl(&self.mean, &self.var(), &other.mean, &other.var())
    }
}

#[derive(Debug, Clone)]
pub struct PolicyCache {
    mlp: MlpCache,
    /// True where the raw log-variance output was inside the clamp range,
    /// i.e. where gradient may flow.
    logvar_open: Vec<bool>,
}

/// Stochastic policy: a shared ReLU trunk feeding a mean head and a
/// log-variance head. Both heads are rows of one final linear layer, so the
/// first `action_dim` outputs are the mean block and the rest the
/// log-variance block.
#[derive(Debug, Clone)]
pub struct GaussianPolicy {
    net: Mlp,
    action_dim: usize,
}

impl GaussianPolicy {
    pub fn init<R: Rng + ?Sized>(
        input_dim: usize,
        hidden: Vec<usize>,
        action_dim: usize,
        rng: &mut R,
    ) -> Result<Self, NnError> {
        if action_dim == 0 {
            return Err(NnError::InvalidSpec("zero action dim".into()));
        }
        let net = Mlp::init(MlpSpec::new(input_dim, hidden, 2 * action_dim), rng)?;
        Ok(Self { net, action_dim })
    }

    pub fn from_net(net: Mlp, action_dim: usize) -> Result<Self, NnError> {
        if net.spec().output_dim != 2 * action_dim {
            return Err(NnError::InvalidSpec(format!(
                "output dim {} does not fit 2 x {action_dim} heads",
                net.spec().output_dim
            )));
        }
        Ok(Self { net, action_dim })
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn input_dim(&self) -> usize {
        self.net.spec().input_dim
    }

    pub fn forward(&self, state: &[f64]) -> Result<(GaussianParams, PolicyCache), NnError> {
        let (out, mlp) = self.net.forward(state)?;
        let mean = out[..self.action_dim].to_vec();
        let mut logvar = Vec::with_capacity(self.action_dim);
        let mut logvar_open = Vec::with_capacity(self.action_dim);
        for &raw in &out[self.action_dim..] {
            logvar_open.push(raw > LOGVAR_MIN && raw < LOGVAR_MAX);
            logvar.push(raw.clamp(LOGVAR_MIN, LOGVAR_MAX));
        }
        Ok((GaussianParams { mean, logvar }, PolicyCache { mlp, logvar_open }))
    }

    pub fn dist(&self, state: &[f64]) -> Result<GaussianParams, NnError> {
        self.forward(state).map(|(p, _)| p)
    }

    /// Backprop through both heads. `d_mean` and `d_logvar` are dL/d(mean)
    /// and dL/d(logvar); gradient through clamped log-variance outputs is
    /// zero. Returns gradients in the underlying network's parameter layout.
    pub fn backward(
        &self,
        cache: &PolicyCache,
        d_mean: &[f64],
        d_logvar: &[f64],
    ) -> Result<Vec<f64>, NnError> {
        if d_mean.len() != self.action_dim {
            return Err(NnError::DimMismatch { expected: self.action_dim, got: d_mean.len() });
        }
        if d_logvar.len() != self.action_dim {
            return Err(NnError::DimMismatch { expected: self.action_dim, got: d_logvar.len() });
        }
        let mut grad_out = Vec::with_capacity(2 * self.action_dim);
        grad_out.extend_from_slice(d_mean);
        for (g, open) in d_logvar.iter().zip(&cache.logvar_open) {
            grad_out.push(if *open { *g } else { 0.0 });
        }
        self.net.backward(&cache.mlp, &grad_out).map(|(g, _)| g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn heads_split_the_output_layer() {
        // trunkless policy: 1 -> 4 outputs (2 mean, 2 logvar)
        let net = Mlp::from_params(
            MlpSpec::new(1, vec![], 4),
            vec![
                1.0, // W row for mean[0]
                2.0, // mean[1]
                0.0, // logvar[0]
                0.0, // logvar[1]
                0.5, -0.5, 0.0, 2.0f64.ln(), // biases
            ],
        )
        .unwrap();
        let policy = GaussianPolicy::from_net(net, 2).unwrap();
        let (p, _) = policy.forward(&[3.0]).unwrap();
        assert_eq!(p.mean, vec![3.5, 5.5]);
        assert!((p.var()[0] - 1.0).abs() < 1e-15);
        assert!((p.var()[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn logvar_clamps_and_gates_gradient() {
        let net = Mlp::from_params(
            MlpSpec::new(1, vec![], 2),
            vec![0.0, 0.0, 0.0, 9.0], // logvar bias way past the cap
        )
        .unwrap();
        let policy = GaussianPolicy::from_net(net, 1).unwrap();
        let (p, cache) = policy.forward(&[1.0]).unwrap();
        assert_eq!(p.logvar, vec![LOGVAR_MAX]);
        let grads = policy.backward(&cache, &[0.0], &[1.0]).unwrap();
        // all parameters feeding the clamped head get zero gradient
        assert!(grads.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn sampling_is_deterministic_under_a_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let policy = GaussianPolicy::init(3, vec![16], 2, &mut rng).unwrap();
        let (p, _) = policy.forward(&[0.1, 0.2, 0.3]).unwrap();
        let mut r1 = ChaCha8Rng::seed_from_u64(99);
        let mut r2 = ChaCha8Rng::seed_from_u64(99);
        assert_eq!(p.sample(&mut r1).unwrap(), p.sample(&mut r2).unwrap());
    }

    #[test]
    fn policy_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut policy = GaussianPolicy::init(4, vec![8, 8], 2, &mut rng).unwrap();
        let x = [0.4, -0.2, 0.9, -1.5];
        let (cm, cv) = ([0.7, -0.4], [0.3, 1.1]); // functional on (mean, logvar)
        let eval = |p: &GaussianPolicy| -> f64 {
            let d = p.dist(&x).unwrap();
            d.mean.iter().zip(&cm).map(|(a, b)| a * b).sum::<f64>()
                + d.logvar.iter().zip(&cv).map(|(a, b)| a * b).sum::<f64>()
        };
        let (_, cache) = policy.forward(&x).unwrap();
        let grads = policy.backward(&cache, &cm, &cv).unwrap();
        let h = 1e-6;
        let mut max_rel = 0.0f64;
        for i in 0..policy.net().n_params() {
            let orig = policy.net().params()[i];
            policy.net_mut().params_mut()[i] = orig + h;
            let fp = eval(&policy);
            policy.net_mut().params_mut()[i] = orig - h;
            let fm = eval(&policy);
            policy.net_mut().params_mut()[i] = orig;
            let fd = (fp - fm) / (2.0 * h);
            let denom = grads[i].abs().max(fd.abs()).max(1e-6);
            max_rel = max_rel.max((grads[i] - fd).abs() / denom);
        }
        assert!(max_rel < 1e-4, "max relative error {max_rel}");
    }
}
