use crate::models::{ModelParams, Real};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Bias-corrected Adam moments for a list of tensors.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    pub fn new(shapes: impl IntoIterator<Item = usize>) -> Self {
        let (m, v) = shapes.into_iter().map(|n| (vec![0.0; n], vec![0.0; n])).unzip();
        Self { m, v, step: 0 }
    }

    pub fn for_params<R: Real>(params: &ModelParams<R>) -> Self {
        Self::new(params.tensors().iter().map(|t| t.len()))
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One in-place update of `params` with `grads` (same tensor order).
    pub fn step<R: Real>(&mut self, params: Vec<&mut [R]>, grads: Vec<&[R]>, lr: f64) {
        assert_eq!(params.len(), self.m.len(), "tensor count mismatch");
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - BETA1.powi(t);
        let c2 = 1.0 - BETA2.powi(t);
        for (((p, g), m), v) in params.into_iter().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            assert_eq!(p.len(), g.len(), "tensor shape mismatch");
            for (((x, &g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                let g = g.as_f64();
                *m = BETA1 * *m + (1.0 - BETA1) * g;
                *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *x -= R::from_f64(lr * m_hat / (v_hat.sqrt() + EPSILON));
            }
        }
    }

    pub fn apply<R: Real>(&mut self, params: &mut ModelParams<R>, grads: &ModelParams<R>, lr: f64) {
        self.step(params.tensors_mut(), grads.tensors(), lr);
    }
}
