//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use brie_core::models::{init_params, ModelConfig, ModelKind, ModelParams};
use brie_core::training::{grad_binary, grad_pair_dot, BinaryMasks, Gradients, PairMasks};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Brute-force per-case metrics: (recall@k, ndcg@k, auc, percentile).
pub struct OracleMetrics {
    pub recall: f64,
    pub ndcg: f64,
    pub auc: Option<f64>,
    pub percentile: f64,
}

pub fn oracle_metrics(scores: &[f64], positive: usize, k: usize) -> OracleMetrics {
    // pessimistic rank by explicit sort: positive sorts after equal negatives
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap()
            .then((a == positive).cmp(&(b == positive)))
    });
    let rank = order.iter().position(|&i| i == positive).unwrap() + 1;
    let recall = if rank <= k { 1.0 } else { 0.0 };
    let ndcg = if rank <= k { std::f64::consts::LN_2 / (1.0 + rank as f64).ln() } else { 0.0 };

    let mut credit = 0.0;
    let mut pairs = 0usize;
    for (i, &s) in scores.iter().enumerate() {
        if i == positive {
            continue;
        }
        pairs += 1;
        credit += match scores[positive].partial_cmp(&s).unwrap() {
            std::cmp::Ordering::Greater => 1.0,
            std::cmp::Ordering::Equal => 0.5,
            std::cmp::Ordering::Less => 0.0,
        };
    }
    OracleMetrics {
        recall,
        ndcg,
        auc: (pairs > 0).then(|| credit / pairs as f64),
        percentile: 100.0 * rank as f64 / scores.len() as f64,
    }
}

/// A small randomized gradient-check problem.
pub struct GradProblem {
    pub params: ModelParams<f64>,
    pub features: Vec<Vec<f32>>,
    pub user: u32,
    pub label: u8,
    pub pair_masks: PairMasks<f64>,
    pub binary_masks: BinaryMasks<f64>,
}

pub fn grad_problem(kind: ModelKind, seed: u64) -> GradProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.random_range(1..=8);
    let feature_dim = rng.random_range(1..=6);
    let n_users = rng.random_range(1..=4);
    let mut config = ModelConfig::new(kind, d, feature_dim);
    config.dropout = [0.0, 0.5][rng.random_range(0..2)];
    config.mlp_hidden = vec![4];
    config.mlp_dropout = [0.0, 0.25][rng.random_range(0..2)];
    config.seed = seed;
    let mut params = init_params(&config, n_users).unwrap().cast::<f64>();
    // move off the f32 grid and away from Xavier's small scale
    for t in params.tensors_mut() {
        for x in t.iter_mut() {
            *x = rng.random_range(-0.8..0.8);
        }
    }
    let features = (0..2)
        .map(|_| (0..feature_dim).map(|_| rng.random_range(-1.0f32..1.0)).collect())
        .collect();
    let pair_masks = PairMasks::sample(d, config.dropout, &mut rng);
    let binary_masks = BinaryMasks::sample(&params, &mut rng);
    GradProblem {
        user: rng.random_range(0..n_users as u32),
        label: rng.random_range(0..2),
        params,
        features,
        pair_masks,
        binary_masks,
    }
}

impl GradProblem {
    pub fn loss_and_grad(&self, params: &ModelParams<f64>) -> (f64, ModelParams<f64>) {
        let mut g = Gradients::zeros_for(params);
        let loss = match params.config.kind {
            ModelKind::Brie => grad_pair_dot(
                params,
                self.user,
                &self.features[0],
                &self.features[1],
                &self.pair_masks,
                &mut g,
            ),
            _ => grad_binary(params, self.user, &self.features[0], self.label, &self.binary_masks, &mut g),
        };
        (loss, g.to_dense(params))
    }

    pub fn loss(&self, params: &ModelParams<f64>) -> f64 {
        self.loss_and_grad(params).0
    }

    /// Smallest |pre-activation| of any hidden unit that survives dropout;
    /// infinity for models without an MLP.
    pub fn kink_distance(&self) -> f64 {
        if self.params.config.kind != ModelKind::Elvis {
            return f64::INFINITY;
        }
        let p = &self.params;
        let d = p.d();
        let mut v = vec![0.0; d];
        brie_core::models::project_photo_into(p, &self.features[0], &mut v);
        let u: Vec<f64> = p.user(self.user).iter().zip(self.binary_masks.user.factors()).map(|(a, b)| a * b).collect();
        let v: Vec<f64> = v.iter().zip(self.binary_masks.photo.factors()).map(|(a, b)| a * b).collect();
        let fwd = brie_core::models::elvis_forward(p, &u, &v, Some(&self.binary_masks.hidden));
        fwd.pre
            .iter()
            .zip(&self.binary_masks.hidden)
            .flat_map(|(a, m)| a.iter().zip(m.factors()).filter(|(_, &f)| f != 0.0).map(|(x, _)| x.abs()))
            .fold(f64::INFINITY, f64::min)
    }
}

pub const FD_STEP: f64 = 1e-4;
pub const FD_REL_TOL: f64 = 1e-5;
/// Denominator floor for the relative error, so exactly-zero gradients
/// compare on an absolute scale.
pub const FD_FLOOR: f64 = 1e-6;

/// Worst relative error between the analytic gradient and central
/// differences over every parameter entry.
pub fn max_fd_error(problem: &GradProblem) -> f64 {
    let (_, analytic) = problem.loss_and_grad(&problem.params);
    let analytic: Vec<f64> = analytic.tensors().concat();
    let mut probe = problem.params.clone();
    let n = analytic.len();
    let mut worst = 0.0f64;
    for i in 0..n {
        let orig = entry(&mut probe, i).to_owned();
        *entry(&mut probe, i) = orig + FD_STEP;
        let up = problem.loss(&probe);
        *entry(&mut probe, i) = orig - FD_STEP;
        let down = problem.loss(&probe);
        *entry(&mut probe, i) = orig;
        let numeric = (up - down) / (2.0 * FD_STEP);
        let a = analytic[i];
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FD_FLOOR);
        worst = worst.max(err);
    }
    worst
}

fn entry(params: &mut ModelParams<f64>, mut i: usize) -> &mut f64 {
    for t in params.tensors_mut() {
        if i < t.len() {
            return &mut t[i];
        }
        i -= t.len();
    }
    panic!("parameter index out of range")
}

/// Draw problems until `n` pass the kink filter; returns the worst error.
pub fn fd_sweep(kind: ModelKind, n: usize, min_kink: f64) -> (f64, usize) {
    let mut worst = 0.0f64;
    let mut done = 0;
    let mut seed = 0;
    while done < n {
        let p = grad_problem(kind, seed);
        seed += 1;
        if p.kink_distance() < min_kink {
            continue;
        }
        worst = worst.max(max_fd_error(&p));
        done += 1;
    }
    (worst, seed as usize)
}
