use rand::{Rng, RngCore};

use super::{ModelParams, Real};
use crate::corpus::{Corpus, Split, SplitAssignment};
use crate::error::{Error, Result};

/// Logistic function, evaluated without overflow for any finite input.
#[inline]
pub fn sigmoid<R: Real>(x: R) -> R {
    if x >= R::zero() {
        R::one() / (R::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (R::one() + e)
    }
}

#[inline]
pub fn dot<R: Real>(a: &[R], b: &[R]) -> R {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// `out = feature · W + b`. `feature` must have length `feature_dim`.
pub fn project_photo_into<R: Real>(params: &ModelParams<R>, feature: &[f32], out: &mut [R]) {
    let d = params.d();
    debug_assert_eq!(feature.len(), params.config.feature_dim);
    out.copy_from_slice(&params.proj_bias);
    for (&x, row) in feature.iter().zip(params.proj_weight.chunks_exact(d)) {
        let x = R::from_f32(x);
        for (o, &w) in out.iter_mut().zip(row) {
            *o += x * w;
        }
    }
}

/// Affine projection of a raw feature vector into the latent space.
pub fn project_photo<R: Real>(params: &ModelParams<R>, feature: &[f32]) -> Result<Vec<R>> {
    if feature.len() != params.config.feature_dim {
        return Err(Error::DimensionMismatch {
            expected: params.config.feature_dim,
            actual: feature.len(),
        });
    }
    let mut out = vec![R::zero(); params.d()];
    project_photo_into(params, feature, &mut out);
    Ok(out)
}

/// Inverted-dropout mask: each factor is `0` or `1 / (1 - p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask<R> {
    factors: Vec<R>,
}

impl<R: Real> DropoutMask<R> {
    pub fn identity(len: usize) -> Self {
        Self { factors: vec![R::one(); len] }
    }

    pub fn sample(len: usize, p: f32, rng: &mut (impl RngCore + ?Sized)) -> Self {
        if p == 0.0 {
            return Self::identity(len);
        }
        let scale = R::one() / (R::one() - R::from_f32(p));
        let factors = (0..len)
            .map(|_| if rng.random::<f32>() >= p { scale } else { R::zero() })
            .collect();
        Self { factors }
    }

    pub fn from_factors(factors: Vec<R>) -> Self {
        Self { factors }
    }

    #[inline]
    pub fn factors(&self) -> &[R] {
        &self.factors
    }

    #[inline]
    pub fn apply(&self, v: &mut [R]) {
        for (x, &m) in v.iter_mut().zip(&self.factors) {
            *x *= m;
        }
    }
}

/// Scoring mode. Dropout is only active in training mode.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut dyn RngCore),
}

/// Raw dot-product score `<U_u, V'_p>` with embedding dropout in train mode.
pub fn score_brie<R: Real>(params: &ModelParams<R>, user: u32, feature: &[f32], mode: Mode<'_>) -> R {
    let mut v = vec![R::zero(); params.d()];
    project_photo_into(params, feature, &mut v);
    match mode {
        Mode::Eval => dot(params.user(user), &v),
        Mode::Train(rng) => {
            let p = params.config.dropout;
            let mut u = params.user(user).to_vec();
            DropoutMask::sample(u.len(), p, rng).apply(&mut u);
            DropoutMask::sample(v.len(), p, rng).apply(&mut v);
            dot(&u, &v)
        }
    }
}

pub fn mf_elvis_logit<R: Real>(params: &ModelParams<R>, user: u32, feature: &[f32]) -> R {
    let mut v = vec![R::zero(); params.d()];
    project_photo_into(params, feature, &mut v);
    dot(params.user(user), &v)
}

/// `sigma(<U_u, V'_p>)`.
pub fn score_mf_elvis<R: Real>(params: &ModelParams<R>, user: u32, feature: &[f32]) -> R {
    sigmoid(mf_elvis_logit(params, user, feature))
}

/// Intermediate values of one MLP forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct ElvisForward<R> {
    /// `[U_u; V'_p]` after any embedding dropout.
    pub input: Vec<R>,
    /// Pre-activation of each hidden layer.
    pub pre: Vec<Vec<R>>,
    /// Output of each hidden layer after ReLU and dropout.
    pub hidden: Vec<Vec<R>>,
    pub logit: R,
}

/// Forward pass of the ELVis MLP on `[user_vec; photo_vec]`. `hidden_masks`
/// holds one mask per hidden layer, or `None` for evaluation.
pub fn elvis_forward<R: Real>(
    params: &ModelParams<R>,
    user_vec: &[R],
    photo_vec: &[R],
    hidden_masks: Option<&[DropoutMask<R>]>,
) -> ElvisForward<R> {
    let mut input = Vec::with_capacity(user_vec.len() + photo_vec.len());
    input.extend_from_slice(user_vec);
    input.extend_from_slice(photo_vec);

    let n_hidden = params.mlp.len() - 1;
    let mut pre = Vec::with_capacity(n_hidden);
    let mut hidden: Vec<Vec<R>> = Vec::with_capacity(n_hidden);
    for (l, layer) in params.mlp[..n_hidden].iter().enumerate() {
        let x = if l == 0 { &input } else { &hidden[l - 1] };
        let a = dense(layer, x);
        let mut h: Vec<R> = a.iter().map(|&z| z.max(R::zero())).collect();
        if let Some(masks) = hidden_masks {
            masks[l].apply(&mut h);
        }
        pre.push(a);
        hidden.push(h);
    }
    let last = hidden.last().unwrap_or(&input);
    let logit = dense(&params.mlp[n_hidden], last)[0];
    ElvisForward { input, pre, hidden, logit }
}

fn dense<R: Real>(layer: &super::DenseLayer<R>, x: &[R]) -> Vec<R> {
    let mut out = layer.bias.clone();
    for (&xi, row) in x.iter().zip(layer.weight.chunks_exact(layer.outputs)) {
        for (o, &w) in out.iter_mut().zip(row) {
            *o += xi * w;
        }
    }
    out
}

pub fn elvis_logit<R: Real>(params: &ModelParams<R>, user: u32, feature: &[f32]) -> R {
    let mut v = vec![R::zero(); params.d()];
    project_photo_into(params, feature, &mut v);
    elvis_forward(params, params.user(user), &v, None).logit
}

/// `sigma(g([U_u; V'_p]))`, with embedding and hidden-layer dropout in train mode.
pub fn score_elvis<R: Real>(params: &ModelParams<R>, user: u32, feature: &[f32], mode: Mode<'_>) -> R {
    match mode {
        Mode::Eval => sigmoid(elvis_logit(params, user, feature)),
        Mode::Train(rng) => {
            let d = params.d();
            let mut u = params.user(user).to_vec();
            let mut v = vec![R::zero(); d];
            project_photo_into(params, feature, &mut v);
            DropoutMask::sample(d, params.config.dropout, rng).apply(&mut u);
            DropoutMask::sample(d, params.config.dropout, rng).apply(&mut v);
            let masks: Vec<DropoutMask<R>> = params.mlp[..params.mlp.len() - 1]
                .iter()
                .map(|l| DropoutMask::sample(l.outputs, params.config.mlp_dropout, rng))
                .collect();
            sigmoid(elvis_forward(params, &u, &v, Some(&masks)).logit)
        }
    }
}

/// Negative Euclidean distance between `feature` and the centroid of the
/// user's train-photo features. Users without train photos score `f64::MIN`.
pub fn score_cnt(corpus: &Corpus, split: &SplitAssignment, user: u32, feature: &[f32]) -> f64 {
    let mut centroid = vec![0.0f64; corpus.feature_dim()];
    let mut n = 0usize;
    for &p in corpus.user_photos(user) {
        if split.label(corpus.photo_row(p)) == Split::Train {
            for (c, &x) in centroid.iter_mut().zip(corpus.feature(p)) {
                *c += x as f64;
            }
            n += 1;
        }
    }
    if n == 0 {
        return f64::MIN;
    }
    centroid.iter_mut().for_each(|c| *c /= n as f64);
    -euclidean(&centroid, feature)
}

pub(crate) fn euclidean(centroid: &[f64], feature: &[f32]) -> f64 {
    centroid
        .iter()
        .zip(feature)
        .map(|(&c, &x)| (x as f64 - c).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Uniform score on `[0, 1)`.
pub fn score_rnd(rng: &mut impl Rng) -> f64 {
    rng.random::<f64>()
}
