//! Parameter containers, initialization, and the scoring functions that
//! produce a predicted authorship score for a (user, photo) pair.

mod artifact;
mod params;
mod score;
mod scorer;

use std::fmt::Debug;
use std::ops::{AddAssign, MulAssign, SubAssign};
use std::str::FromStr;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use artifact::{load_artifact, read_artifact, save_artifact, write_artifact, ARTIFACT_MAGIC};
pub use params::{count_params, init_params, DenseLayer, ModelParams};
pub use score::{
    dot, elvis_forward, elvis_logit, mf_elvis_logit, project_photo, project_photo_into, score_brie,
    score_cnt, score_elvis, score_mf_elvis, score_rnd, sigmoid, DropoutMask, ElvisForward, Mode,
};
pub use scorer::{CentroidScorer, LearnedScorer, RandomScorer, Scorer};

/// Floating-point type for parameters and scores. `f32` for storage and
/// training, `f64` for finite-difference checks.
pub trait Real:
    Float + AddAssign + SubAssign + MulAssign + std::iter::Sum + Send + Sync + Debug + Default + 'static
{
    fn from_f32(x: f32) -> Self;
    fn from_f64(x: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Real for f32 {
    #[inline]
    fn from_f32(x: f32) -> Self {
        x
    }
    #[inline]
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    #[inline]
    fn from_f32(x: f32) -> Self {
        x as f64
    }
    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Brie,
    MfElvis,
    Elvis,
    Cnt,
    Rnd,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Brie,
        ModelKind::MfElvis,
        ModelKind::Elvis,
        ModelKind::Cnt,
        ModelKind::Rnd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Brie => "brie",
            ModelKind::MfElvis => "mf-elvis",
            ModelKind::Elvis => "elvis",
            ModelKind::Cnt => "cnt",
            ModelKind::Rnd => "rnd",
        }
    }

    /// Whether the kind has trainable parameters.
    pub fn is_learned(self) -> bool {
        matches!(self, ModelKind::Brie | ModelKind::MfElvis | ModelKind::Elvis)
    }

    fn code(self) -> u8 {
        match self {
            ModelKind::Brie => 0,
            ModelKind::MfElvis => 1,
            ModelKind::Elvis => 2,
            ModelKind::Cnt => 3,
            ModelKind::Rnd => 4,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        ModelKind::ALL.into_iter().find(|k| k.code() == code)
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase().replace('_', "-"))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown model {s:?}")))
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Glorot initialization law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum XavierLaw {
    /// U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
    #[default]
    Uniform,
    /// N(0, 2 / (fan_in + fan_out)).
    Normal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// Latent factors.
    pub d: usize,
    pub feature_dim: usize,
    /// Embedding dropout on the user and projected-photo vectors.
    pub dropout: f32,
    /// Hidden widths of the scoring MLP (ELVis only).
    pub mlp_hidden: Vec<usize>,
    /// Dropout after each hidden MLP layer (ELVis only).
    pub mlp_dropout: f32,
    pub init: XavierLaw,
    pub seed: u64,
}

impl ModelConfig {
    /// Defaults for `kind`. ELVis hidden widths default to `[d, d/2]`.
    pub fn new(kind: ModelKind, d: usize, feature_dim: usize) -> Self {
        let (dropout, mlp_hidden, mlp_dropout) = match kind {
            ModelKind::Brie => (0.75, vec![], 0.0),
            ModelKind::Elvis => (0.0, vec![d, (d / 2).max(1)], 0.2),
            _ => (0.0, vec![], 0.0),
        };
        Self {
            kind,
            d,
            feature_dim,
            dropout,
            mlp_hidden,
            mlp_dropout,
            init: XavierLaw::Uniform,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        if !(0.0..1.0).contains(&self.mlp_dropout) {
            return bad(format!("mlp dropout must be in [0, 1), got {}", self.mlp_dropout));
        }
        if self.kind.is_learned() {
            if self.d == 0 {
                return bad("latent factors d must be >= 1".into());
            }
            if self.feature_dim == 0 {
                return bad("feature_dim must be >= 1".into());
            }
        }
        if self.kind == ModelKind::Elvis && self.mlp_hidden.contains(&0) {
            return bad("MLP hidden widths must be >= 1".into());
        }
        Ok(())
    }

    /// Layer widths of the ELVis MLP, from input to the scalar output.
    pub fn mlp_widths(&self) -> Vec<usize> {
        let mut widths = vec![2 * self.d];
        widths.extend(&self.mlp_hidden);
        widths.push(1);
        widths
    }
}
