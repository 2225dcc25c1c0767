use rand::Rng;
use rand_distr::StandardNormal;

use super::{ModelConfig, ModelKind, Real, XavierLaw};
use crate::error::{Error, Result};
use crate::seed::stream_rng;

/// Dense layer `y = x W + b` with `W` stored `inputs x outputs`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<R> {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: Vec<R>,
    pub bias: Vec<R>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<R = f32> {
    pub config: ModelConfig,
    pub n_users: usize,
    /// `n_users x d`, row-major.
    pub user_table: Vec<R>,
    /// `feature_dim x d`, row-major.
    pub proj_weight: Vec<R>,
    pub proj_bias: Vec<R>,
    /// Hidden layers followed by the scalar output layer (ELVis only).
    pub mlp: Vec<DenseLayer<R>>,
}

impl<R: Real> ModelParams<R> {
    /// All-zero parameters shaped for `config`.
    pub fn zeros(config: &ModelConfig, n_users: usize) -> Self {
        let d = config.d;
        let mlp = if config.kind == ModelKind::Elvis {
            config
                .mlp_widths()
                .windows(2)
                .map(|w| DenseLayer {
                    inputs: w[0],
                    outputs: w[1],
                    weight: vec![R::zero(); w[0] * w[1]],
                    bias: vec![R::zero(); w[1]],
                })
                .collect()
        } else {
            Vec::new()
        };
        Self {
            config: config.clone(),
            n_users,
            user_table: vec![R::zero(); n_users * d],
            proj_weight: vec![R::zero(); config.feature_dim * d],
            proj_bias: vec![R::zero(); d],
            mlp,
        }
    }

    pub fn zeros_like<S: Real>(&self) -> ModelParams<S> {
        ModelParams::zeros(&self.config, self.n_users)
    }

    pub fn cast<S: Real>(&self) -> ModelParams<S> {
        let conv = |v: &[R]| v.iter().map(|x| S::from_f64(x.as_f64())).collect();
        ModelParams {
            config: self.config.clone(),
            n_users: self.n_users,
            user_table: conv(&self.user_table),
            proj_weight: conv(&self.proj_weight),
            proj_bias: conv(&self.proj_bias),
            mlp: self
                .mlp
                .iter()
                .map(|l| DenseLayer {
                    inputs: l.inputs,
                    outputs: l.outputs,
                    weight: conv(&l.weight),
                    bias: conv(&l.bias),
                })
                .collect(),
        }
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.config.d
    }

    #[inline]
    pub fn user(&self, u: u32) -> &[R] {
        let d = self.config.d;
        &self.user_table[u as usize * d..(u as usize + 1) * d]
    }

    #[inline]
    pub fn user_mut(&mut self, u: u32) -> &mut [R] {
        let d = self.config.d;
        &mut self.user_table[u as usize * d..(u as usize + 1) * d]
    }

    /// Parameter tensors in artifact order.
    pub fn tensors(&self) -> Vec<&[R]> {
        let mut t: Vec<&[R]> = vec![&self.user_table, &self.proj_weight, &self.proj_bias];
        for l in &self.mlp {
            t.push(&l.weight);
            t.push(&l.bias);
        }
        t
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [R]> {
        let mut t: Vec<&mut [R]> = vec![&mut self.user_table, &mut self.proj_weight, &mut self.proj_bias];
        for l in &mut self.mlp {
            t.push(&mut l.weight);
            t.push(&mut l.bias);
        }
        t
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    /// `self += scale * other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &ModelParams<R>, scale: R) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * *y;
            }
        }
    }
}

/// Xavier-initialized parameters (biases zero), deterministic per `config.seed`.
pub fn init_params(config: &ModelConfig, n_users: usize) -> Result<ModelParams<f32>> {
    config.validate()?;
    if !config.kind.is_learned() {
        return Err(Error::InvalidConfig(format!("{} has no trainable parameters", config.kind)));
    }
    let mut params = ModelParams::<f32>::zeros(config, n_users);
    let d = config.d;
    let law = config.init;
    let mut stream = 0u64;
    let mut fill = |t: &mut [f32], fan_in: usize, fan_out: usize| {
        let mut rng = stream_rng(config.seed, stream);
        stream += 1;
        let fan = (fan_in + fan_out) as f64;
        match law {
            XavierLaw::Uniform => {
                let a = (6.0 / fan).sqrt();
                for x in t.iter_mut() {
                    *x = rng.random_range(-a..a) as f32;
                }
            }
            XavierLaw::Normal => {
                let sd = (2.0 / fan).sqrt();
                for x in t.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *x = (sd * z) as f32;
                }
            }
        }
    };
    fill(&mut params.user_table, n_users, d);
    fill(&mut params.proj_weight, config.feature_dim, d);
    for l in &mut params.mlp {
        fill(&mut l.weight, l.inputs, l.outputs);
    }
    Ok(params)
}

/// Exact trainable-parameter count, computed without allocating.
pub fn count_params(config: &ModelConfig, n_users: u64) -> u64 {
    if !config.kind.is_learned() {
        return 0;
    }
    let d = config.d as u64;
    let base = n_users * d + config.feature_dim as u64 * d + d;
    if config.kind != ModelKind::Elvis {
        return base;
    }
    let mlp: u64 = config
        .mlp_widths()
        .windows(2)
        .map(|w| (w[0] * w[1] + w[1]) as u64)
        .sum();
    base + mlp
}
