use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::NnError;

/// Layer widths of a perceptron: `input_dim` -> each of `hidden` (ReLU) ->
/// `output_dim` (linear).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
}

impl MlpSpec {
    pub fn new(input_dim: usize, hidden: Vec<usize>, output_dim: usize) -> Self {
        Self { input_dim, hidden, output_dim }
    }

    /// All layer widths, input first.
    pub fn dims(&self) -> Vec<usize> {
        let mut d = Vec::with_capacity(self.hidden.len() + 2);
        d.push(self.input_dim);
        d.extend_from_slice(&self.hidden);
        d.push(self.output_dim);
        d
    }

    pub fn n_params(&self) -> usize {
        self.dims().windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    fn validate(&self) -> Result<(), NnError> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden.iter().any(|&h| h == 0) {
            return Err(NnError::InvalidSpec("zero-width layer".into()));
        }
        Ok(())
    }
}

/// Intermediate activations retained by a forward pass; consumed by
/// `backward`. Tied to the parameter version that produced it.
#[derive(Debug, Clone)]
pub struct MlpCache {
    version: u64,
    input: Vec<f64>,
    /// Post-ReLU activations of each hidden layer.
    hidden: Vec<Vec<f64>>,
}

/// Fully connected network on one flat parameter vector. Layer `l` stores
/// its weight matrix row-major (out x in) followed by its bias vector.
#[derive(Debug, Clone)]
pub struct Mlp {
    spec: MlpSpec,
    params: Vec<f64>,
    version: u64,
}

impl Mlp {
    /// He-style initialization: weights N(0, 2/fan_in), biases zero.
    pub fn init<R: Rng + ?Sized>(spec: MlpSpec, rng: &mut R) -> Result<Self, NnError> {
        spec.validate()?;
        let mut params = Vec::with_capacity(spec.n_params());
        for w in spec.dims().windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let scale = (2.0 / fan_in as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                let z: f64 = rng.sample(StandardNormal);
                params.push(z * scale);
            }
            params.extend(std::iter::repeat(0.0).take(fan_out));
        }
        Ok(Self { spec, params, version: 0 })
    }

    pub fn from_params(spec: MlpSpec, params: Vec<f64>) -> Result<Self, NnError> {
        spec.validate()?;
        if params.len() != spec.n_params() {
            return Err(NnError::DimMismatch { expected: spec.n_params(), got: params.len() });
        }
        Ok(Self { spec, params, version: 0 })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable parameter access; invalidates outstanding caches.
    pub fn params_mut(&mut self) -> &mut [f64] {
        self.version += 1;
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    fn affine(&self, layer_offset: usize, n_in: usize, n_out: usize, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        let w = &self.params[layer_offset..layer_offset + n_in * n_out];
        let b = &self.params[layer_offset + n_in * n_out..layer_offset + n_in * n_out + n_out];
        for o in 0..n_out {
            let row = &w[o * n_in..(o + 1) * n_in];
            let mut acc = b[o];
            for (wi, xi) in row.iter().zip(x) {
                acc += wi * xi;
            }
            out.push(acc);
        }
    }

    /// Forward pass returning the output and the cache needed for backprop.
    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, MlpCache), NnError> {
        if x.len() != self.spec.input_dim {
            return Err(NnError::DimMismatch { expected: self.spec.input_dim, got: x.len() });
        }
        let dims = self.spec.dims();
        let mut hidden = Vec::with_capacity(self.spec.hidden.len());
        let mut offset = 0;
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        for (l, w) in dims.windows(2).enumerate() {
            self.affine(offset, w[0], w[1], &cur, &mut next);
            offset += w[0] * w[1] + w[1];
            let is_hidden = l + 1 < dims.len() - 1;
            if is_hidden {
                for v in next.iter_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
                hidden.push(next.clone());
            }
            std::mem::swap(&mut cur, &mut next);
        }
        Ok((
            cur,
            MlpCache { version: self.version, input: x.to_vec(), hidden },
        ))
    }

    /// Forward pass without retaining activations.
    pub fn infer(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        self.forward(x).map(|(y, _)| y)
    }

    /// Backpropagates `grad_out` (dL/dy) through the cached activations.
    /// Returns gradients in parameter layout plus dL/dx.
    pub fn backward(&self, cache: &MlpCache, grad_out: &[f64]) -> Result<(Vec<f64>, Vec<f64>), NnError> {
        if cache.version != self.version {
            return Err(NnError::StaleCache);
        }
        if grad_out.len() != self.spec.output_dim {
            return Err(NnError::DimMismatch { expected: self.spec.output_dim, got: grad_out.len() });
        }
        let dims = self.spec.dims();
        let n_layers = dims.len() - 1;
        let mut offsets = Vec::with_capacity(n_layers);
        let mut offset = 0;
        for w in dims.windows(2) {
            offsets.push(offset);
            offset += w[0] * w[1] + w[1];
        }
        let mut grads = vec![0.0; self.params.len()];
        let mut delta = grad_out.to_vec();
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (dims[l], dims[l + 1]);
            let input: &[f64] = if l == 0 { &cache.input } else { &cache.hidden[l - 1] };
            let w_off = offsets[l];
            let b_off = w_off + n_in * n_out;
            for o in 0..n_out {
                let d = delta[o];
                grads[b_off + o] += d;
                let row = &mut grads[w_off + o * n_in..w_off + (o + 1) * n_in];
                for (g, xi) in row.iter_mut().zip(input) {
                    *g += d * xi;
                }
            }
            // propagate to the layer input
            let w = &self.params[w_off..w_off + n_in * n_out];
            let mut prev = vec![0.0; n_in];
            for o in 0..n_out {
                let d = delta[o];
                let row = &w[o * n_in..(o + 1) * n_in];
                for (p, wi) in prev.iter_mut().zip(row) {
                    *p += d * wi;
                }
            }
            if l > 0 {
                // ReLU gate: the stored activation is zero exactly where the
                // pre-activation was clipped
                for (p, a) in prev.iter_mut().zip(&cache.hidden[l - 1]) {
                    if *a <= 0.0 {
                        *p = 0.0;
                    }
                }
            }
            delta = prev;
        }
        Ok((grads, delta))
    }
}
