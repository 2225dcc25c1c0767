//! Losses, analytic gradients, Adam, and the epoch loop.

mod adam;
mod early_stop;
mod grad;
mod loss;
mod resources;

use std::time::Instant;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Split, SplitAssignment};
use crate::error::{Error, Result};
use crate::evaluation::{build_cases, mean_auc};
use crate::exec::Exec;
use crate::models::{init_params, LearnedScorer, ModelConfig, ModelKind, ModelParams};
use crate::sampling::{batch_stream, expand_static, sample_pairwise_epoch, BinarySample, PairSample};
use crate::seed::{derive_seed, stream_rng};

pub use adam::{AdamState, BETA1, BETA2, EPSILON};
pub use early_stop::{EarlyStopConfig, EarlyStopper, Verdict};
pub use grad::{grad_binary, grad_pair_dot, BinaryMasks, Gradients, PairMasks};
pub use loss::{bce_loss, bpr_loss, softplus};
pub use resources::{track_resources, PowerModel};

/// Examples per gradient chunk. Fixed so the reduction order does not
/// depend on the thread count.
const GRAD_CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Bpr,
    Bce,
}

impl LossKind {
    /// The loss each learned model trains with.
    pub fn for_model(kind: ModelKind) -> Option<Self> {
        match kind {
            ModelKind::Brie => Some(LossKind::Bpr),
            ModelKind::MfElvis | ModelKind::Elvis => Some(LossKind::Bce),
            ModelKind::Cnt | ModelKind::Rnd => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Bpr => "bpr",
            LossKind::Bce => "bce",
        }
    }
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub early_stop: EarlyStopConfig,
    pub seed: u64,
    pub power: PowerModel,
    #[serde(skip)]
    pub exec: Exec,
}

impl TrainConfig {
    pub const DEFAULT_BATCH: usize = 1 << 14;

    pub fn new(loss: LossKind) -> Self {
        Self {
            loss,
            lr: 1e-3,
            batch_size: Self::DEFAULT_BATCH,
            max_epochs: 15,
            early_stop: EarlyStopConfig::default(),
            seed: 0,
            power: PowerModel::default(),
            exec: Exec::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad("learning rate must be finite and >= 0");
        }
        if self.batch_size == 0 {
            return bad("batch size must be >= 1");
        }
        if self.early_stop.patience == 0 {
            return bad("patience must be >= 1");
        }
        if self.early_stop.min_delta.is_nan() || self.early_stop.min_delta < 0.0 {
            return bad("min_delta must be >= 0");
        }
        if !(self.power.watts >= 0.0 && self.power.grams_per_joule >= 0.0) {
            return bad("power model constants must be >= 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean per-example training loss.
    pub train_loss: f64,
    pub seconds: f64,
    pub cumulative_seconds: f64,
    pub val_mauc: Option<f64>,
    pub energy_j: f64,
    pub co2_g: f64,
    pub cumulative_energy_j: f64,
    pub cumulative_co2_g: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams<f32>,
    pub epochs: Vec<EpochStats>,
    /// Epoch whose parameters were restored, when early stopping ran.
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
}

/// A training example that knows its loss and gradient.
trait Example: Sync {
    fn loss_grad(
        &self,
        params: &ModelParams<f64>,
        corpus: &Corpus,
        rng: &mut dyn RngCore,
        grad: &mut Gradients<f64>,
    ) -> f64;
}

impl Example for PairSample {
    fn loss_grad(&self, params: &ModelParams<f64>, corpus: &Corpus, rng: &mut dyn RngCore, grad: &mut Gradients<f64>) -> f64 {
        let masks = PairMasks::sample(params.d(), params.config.dropout, rng);
        grad_pair_dot(
            params,
            self.user,
            corpus.feature(self.photo_pos),
            corpus.feature(self.photo_neg),
            &masks,
            grad,
        )
    }
}

impl Example for BinarySample {
    fn loss_grad(&self, params: &ModelParams<f64>, corpus: &Corpus, rng: &mut dyn RngCore, grad: &mut Gradients<f64>) -> f64 {
        let masks = BinaryMasks::sample(params, rng);
        grad_binary(params, self.user, corpus.feature(self.photo), self.label, &masks, grad)
    }
}

/// Train with validation-MAUC early stopping when enabled.
pub fn train(
    corpus: &Corpus,
    split: &SplitAssignment,
    model: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    if !cfg.early_stop.enabled {
        return train_with_monitor(corpus, split, model, cfg, |_, _| Ok(None));
    }
    let val_cases = build_cases(corpus, split, Split::Val);
    if val_cases.is_empty() {
        return Err(Error::InvalidSplit("early stopping needs validation interactions".into()));
    }
    let exec = cfg.exec;
    train_with_monitor(corpus, split, model, cfg, |_, params| {
        let scorer = LearnedScorer::new(params, corpus, exec)?;
        mean_auc(&val_cases, &scorer, exec)
    })
}

/// Train, calling `monitor(epoch, params)` after every epoch. Its value is
/// recorded as `val_mauc` and, with early stopping enabled, drives stopping
/// and best-epoch restoration.
pub fn train_with_monitor<M>(
    corpus: &Corpus,
    split: &SplitAssignment,
    model: &ModelConfig,
    cfg: &TrainConfig,
    mut monitor: M,
) -> Result<TrainOutcome>
where
    M: FnMut(usize, &ModelParams<f32>) -> Result<Option<f64>>,
{
    cfg.validate()?;
    model.validate()?;
    if LossKind::for_model(model.kind) != Some(cfg.loss) {
        return Err(Error::InvalidConfig(format!(
            "model {} cannot be trained with {} loss",
            model.kind, cfg.loss
        )));
    }
    if model.feature_dim != corpus.feature_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.feature_dim,
            actual: corpus.feature_dim(),
        });
    }

    let mut params = init_params(model, corpus.n_users())?.cast::<f64>();
    let mut adam = AdamState::for_params(&params);
    let sampler_seed = derive_seed(cfg.seed, "sampler");
    let static_set = match cfg.loss {
        LossKind::Bce => {
            let exp = expand_static(corpus, split, sampler_seed)?;
            if exp.same_item_fallbacks > 0 {
                log::warn!("{} positives used other-item fallback negatives", exp.same_item_fallbacks);
            }
            Some(exp.samples)
        }
        LossKind::Bpr => None,
    };

    let n_epochs = if cfg.early_stop.enabled {
        cfg.max_epochs.min(cfg.early_stop.cap)
    } else {
        cfg.max_epochs
    };
    let mut stopper = EarlyStopper::new(cfg.early_stop.patience, cfg.early_stop.min_delta);
    let mut best: Option<ModelParams<f64>> = None;
    let mut epochs: Vec<EpochStats> = Vec::new();
    let mut stopped_early = false;
    let mut trainer = EpochRunner {
        corpus,
        cfg,
        dense: params.zeros_like(),
        dropout_seed: derive_seed(cfg.seed, "dropout"),
        shuffle_seed: derive_seed(cfg.seed, "shuffle"),
    };

    for epoch in 0..n_epochs {
        let start = Instant::now();
        let (loss_sum, n) = match &static_set {
            Some(samples) => trainer.run(epoch, samples, &mut params, &mut adam)?,
            None => {
                let pairs = sample_pairwise_epoch(corpus, split, epoch as u64, sampler_seed)?;
                trainer.run(epoch, &pairs, &mut params, &mut adam)?
            }
        };
        let seconds = start.elapsed().as_secs_f64();

        let snapshot = params.cast::<f32>();
        let val = monitor(epoch, &snapshot)?;
        let (energy_j, co2_g) = track_resources(seconds, &cfg.power);
        let prev = epochs.last();
        let stats = EpochStats {
            epoch,
            train_loss: loss_sum / n.max(1) as f64,
            seconds,
            cumulative_seconds: prev.map_or(0.0, |p| p.cumulative_seconds) + seconds,
            val_mauc: val,
            energy_j,
            co2_g,
            cumulative_energy_j: prev.map_or(0.0, |p| p.cumulative_energy_j) + energy_j,
            cumulative_co2_g: prev.map_or(0.0, |p| p.cumulative_co2_g) + co2_g,
        };
        log::info!(
            "epoch {epoch}: loss {:.6} ({:.2}s){}",
            stats.train_loss,
            seconds,
            val.map(|v| format!(", monitor {v:.4}")).unwrap_or_default()
        );
        epochs.push(stats);

        if cfg.early_stop.enabled {
            if let Some(v) = val {
                match stopper.observe(epoch, v) {
                    Verdict::Improved => best = Some(params.clone()),
                    Verdict::Stale => {}
                    Verdict::Stop => {
                        stopped_early = true;
                        break;
                    }
                }
            }
        }
    }

    if let Some(b) = best {
        params = b;
    }
    Ok(TrainOutcome {
        params: params.cast::<f32>(),
        epochs,
        best_epoch: if cfg.early_stop.enabled { stopper.best_epoch() } else { None },
        stopped_early,
    })
}

struct EpochRunner<'a> {
    corpus: &'a Corpus,
    cfg: &'a TrainConfig,
    dense: ModelParams<f64>,
    dropout_seed: u64,
    shuffle_seed: u64,
}

impl EpochRunner<'_> {
    /// One pass over `samples`; returns (summed loss, example count).
    fn run<E: Example>(
        &mut self,
        epoch: usize,
        samples: &[E],
        params: &mut ModelParams<f64>,
        adam: &mut AdamState,
    ) -> Result<(f64, usize)> {
        let corpus = self.corpus;
        let dropout_seed = self.dropout_seed;
        let shuffle = derive_seed(self.shuffle_seed, &epoch.to_string());
        let mut stream = batch_stream(samples, self.cfg.batch_size, shuffle);
        let mut total = 0.0;
        let mut batch = 0u64;
        while let Some(idx) = stream.next_indices() {
            let p: &ModelParams<f64> = params;
            let parts = self.cfg.exec.map_chunks(idx.len(), GRAD_CHUNK, |chunk, range| {
                let stream_id = ((epoch as u64) << 40) | (batch << 20) | chunk as u64;
                let mut rng = stream_rng(dropout_seed, stream_id);
                let mut grad = Gradients::zeros_for(p);
                let loss: f64 = idx[range]
                    .iter()
                    .map(|&i| samples[i].loss_grad(p, corpus, &mut rng, &mut grad))
                    .sum();
                (loss, grad)
            });

            for t in self.dense.tensors_mut() {
                t.fill(0.0);
            }
            let mut batch_loss = 0.0;
            for (loss, grad) in &parts {
                batch_loss += loss;
                grad.add_into(&mut self.dense);
            }
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch as usize,
                    running_mean: total / samples.len().max(1) as f64,
                });
            }
            adam.apply(params, &self.dense, self.cfg.lr);
            total += batch_loss;
            batch += 1;
        }
        Ok((total, samples.len()))
    }
}
