//! Analytic gradients of the training losses.
//!
//! Each function returns the example's loss and accumulates its gradient
//! into a [`Gradients`] buffer. User-row gradients are kept sparse (one
//! entry per example) so per-chunk buffers stay small.

use rand::RngCore;

use super::loss::softplus;
use crate::models::{
    dot, elvis_forward, project_photo_into, sigmoid, DenseLayer, DropoutMask, ModelKind, ModelParams, Real,
};

/// Dropout masks for one pairwise example: one user mask, one per photo.
#[derive(Debug, Clone)]
pub struct PairMasks<R> {
    pub user: DropoutMask<R>,
    pub pos: DropoutMask<R>,
    pub neg: DropoutMask<R>,
}

impl<R: Real> PairMasks<R> {
    pub fn identity(d: usize) -> Self {
        Self {
            user: DropoutMask::identity(d),
            pos: DropoutMask::identity(d),
            neg: DropoutMask::identity(d),
        }
    }

    pub fn sample(d: usize, p: f32, rng: &mut (impl RngCore + ?Sized)) -> Self {
        Self {
            user: DropoutMask::sample(d, p, rng),
            pos: DropoutMask::sample(d, p, rng),
            neg: DropoutMask::sample(d, p, rng),
        }
    }
}

/// Dropout masks for one binary example.
#[derive(Debug, Clone)]
pub struct BinaryMasks<R> {
    pub user: DropoutMask<R>,
    pub photo: DropoutMask<R>,
    /// One per hidden MLP layer (ELVis only).
    pub hidden: Vec<DropoutMask<R>>,
}

impl<R: Real> BinaryMasks<R> {
    pub fn identity(params: &ModelParams<R>) -> Self {
        let d = params.d();
        Self {
            user: DropoutMask::identity(d),
            photo: DropoutMask::identity(d),
            hidden: hidden_layers(params).iter().map(|l| DropoutMask::identity(l.outputs)).collect(),
        }
    }

    pub fn sample(params: &ModelParams<R>, rng: &mut (impl RngCore + ?Sized)) -> Self {
        let d = params.d();
        let c = &params.config;
        Self {
            user: DropoutMask::sample(d, c.dropout, rng),
            photo: DropoutMask::sample(d, c.dropout, rng),
            hidden: hidden_layers(params)
                .iter()
                .map(|l| DropoutMask::sample(l.outputs, c.mlp_dropout, rng))
                .collect(),
        }
    }
}

fn hidden_layers<R>(params: &ModelParams<R>) -> &[DenseLayer<R>] {
    match params.mlp.len() {
        0 => &[],
        n => &params.mlp[..n - 1],
    }
}

/// Gradient buffer shaped like [`ModelParams`], with sparse user rows.
#[derive(Debug, Clone)]
pub struct Gradients<R> {
    pub users: Vec<(u32, Vec<R>)>,
    pub proj_weight: Vec<R>,
    pub proj_bias: Vec<R>,
    pub mlp: Vec<DenseLayer<R>>,
}

impl<R: Real> Gradients<R> {
    pub fn zeros_for(params: &ModelParams<R>) -> Self {
        let z = params.zeros_like::<R>();
        Self {
            users: Vec::new(),
            proj_weight: z.proj_weight,
            proj_bias: z.proj_bias,
            mlp: z.mlp,
        }
    }

    /// Add this buffer into a dense, parameter-shaped gradient.
    pub fn add_into(&self, dense: &mut ModelParams<R>) {
        for (u, g) in &self.users {
            for (a, &b) in dense.user_mut(*u).iter_mut().zip(g) {
                *a += b;
            }
        }
        add(&mut dense.proj_weight, &self.proj_weight);
        add(&mut dense.proj_bias, &self.proj_bias);
        for (a, b) in dense.mlp.iter_mut().zip(&self.mlp) {
            add(&mut a.weight, &b.weight);
            add(&mut a.bias, &b.bias);
        }
    }

    pub fn to_dense(&self, params: &ModelParams<R>) -> ModelParams<R> {
        let mut dense = params.zeros_like::<R>();
        self.add_into(&mut dense);
        dense
    }

    /// `dL/dW += feature ⊗ dv`, `dL/db += dv`.
    fn add_projection(&mut self, feature: &[f32], dv: &[R]) {
        let d = dv.len();
        for (&x, row) in feature.iter().zip(self.proj_weight.chunks_exact_mut(d)) {
            let x = R::from_f32(x);
            for (g, &dvk) in row.iter_mut().zip(dv) {
                *g += x * dvk;
            }
        }
        add(&mut self.proj_bias, dv);
    }
}

fn add<R: Real>(a: &mut [R], b: &[R]) {
    for (x, &y) in a.iter_mut().zip(b) {
        *x += y;
    }
}

fn masked<R>(v: &[R], mask: &DropoutMask<R>) -> Vec<R>
where
    R: Real,
{
    v.iter().zip(mask.factors()).map(|(&x, &m)| x * m).collect()
}

/// BPR loss of one (user, positive, negative) triple under the dot-product
/// scorer, with its gradient added to `grad`.
pub fn grad_pair_dot<R: Real>(
    params: &ModelParams<R>,
    user: u32,
    feature_pos: &[f32],
    feature_neg: &[f32],
    masks: &PairMasks<R>,
    grad: &mut Gradients<R>,
) -> f64 {
    let d = params.d();
    let mut v_pos = vec![R::zero(); d];
    let mut v_neg = vec![R::zero(); d];
    project_photo_into(params, feature_pos, &mut v_pos);
    project_photo_into(params, feature_neg, &mut v_neg);
    let u = masked(params.user(user), &masks.user);
    masks.pos.apply(&mut v_pos);
    masks.neg.apply(&mut v_neg);

    let diff = dot(&u, &v_pos) - dot(&u, &v_neg);
    // dL/d(diff) = -sigma(neg - pos)
    let s = sigmoid(-diff);

    let du: Vec<R> = (0..d)
        .map(|k| s * (v_neg[k] - v_pos[k]) * masks.user.factors()[k])
        .collect();
    grad.users.push((user, du));
    let dv_pos: Vec<R> = (0..d).map(|k| -s * u[k] * masks.pos.factors()[k]).collect();
    let dv_neg: Vec<R> = (0..d).map(|k| s * u[k] * masks.neg.factors()[k]).collect();
    grad.add_projection(feature_pos, &dv_pos);
    grad.add_projection(feature_neg, &dv_neg);

    softplus(-diff.as_f64())
}

/// BCE loss of one labeled (user, photo) example under MF-ELVis or ELVis,
/// with its gradient added to `grad`.
pub fn grad_binary<R: Real>(
    params: &ModelParams<R>,
    user: u32,
    feature: &[f32],
    label: u8,
    masks: &BinaryMasks<R>,
    grad: &mut Gradients<R>,
) -> f64 {
    let d = params.d();
    let mut v = vec![R::zero(); d];
    project_photo_into(params, feature, &mut v);
    let u = masked(params.user(user), &masks.user);
    masks.photo.apply(&mut v);
    let y = if label == 1 { R::one() } else { R::zero() };

    let (logit, du_masked, dv_masked) = match params.config.kind {
        ModelKind::Elvis => {
            let fwd = elvis_forward(params, &u, &v, Some(&masks.hidden));
            let dz = sigmoid(fwd.logit) - y;
            let dinput = backprop_mlp(params, &fwd, &masks.hidden, dz, &mut grad.mlp);
            (fwd.logit, dinput[..d].to_vec(), dinput[d..].to_vec())
        }
        _ => {
            let z = dot(&u, &v);
            let dz = sigmoid(z) - y;
            (z, v.iter().map(|&x| dz * x).collect(), u.iter().map(|&x| dz * x).collect())
        }
    };

    let du: Vec<R> = du_masked.iter().zip(masks.user.factors()).map(|(&g, &m)| g * m).collect();
    let dv: Vec<R> = dv_masked.iter().zip(masks.photo.factors()).map(|(&g, &m)| g * m).collect();
    grad.users.push((user, du));
    grad.add_projection(feature, &dv);

    let z = logit.as_f64();
    if label == 1 {
        softplus(-z)
    } else {
        softplus(z)
    }
}

/// Backpropagate `dz = dL/dlogit` through the MLP, accumulating layer
/// gradients and returning `dL/dinput`.
fn backprop_mlp<R: Real>(
    params: &ModelParams<R>,
    fwd: &crate::models::ElvisForward<R>,
    hidden_masks: &[DropoutMask<R>],
    dz: R,
    layer_grads: &mut [DenseLayer<R>],
) -> Vec<R> {
    let n_hidden = params.mlp.len() - 1;
    let mut upstream = vec![dz];
    for l in (0..=n_hidden).rev() {
        let layer = &params.mlp[l];
        let x: &[R] = if l == 0 { &fwd.input } else { &fwd.hidden[l - 1] };
        // gradient w.r.t. this layer's pre-activation
        let da: Vec<R> = if l == n_hidden {
            upstream
        } else {
            upstream
                .iter()
                .zip(&fwd.pre[l])
                .zip(hidden_masks[l].factors())
                .map(|((&g, &a), &m)| if a > R::zero() { g * m } else { R::zero() })
                .collect()
        };
        let g = &mut layer_grads[l];
        let mut dx = vec![R::zero(); layer.inputs];
        for i in 0..layer.inputs {
            let row = &layer.weight[i * layer.outputs..(i + 1) * layer.outputs];
            let grow = &mut g.weight[i * layer.outputs..(i + 1) * layer.outputs];
            let mut acc = R::zero();
            for j in 0..layer.outputs {
                grow[j] += x[i] * da[j];
                acc += row[j] * da[j];
            }
            dx[i] = acc;
        }
        add(&mut g.bias, &da);
        upstream = dx;
    }
    upstream
}
