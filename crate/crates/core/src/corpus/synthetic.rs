//! Planted-style corpus generator.
//!
//! Every user owns a latent style vector; each photo's latent is its author's
//! style plus Gaussian jitter, observed through a fixed random linear map
//! plus observation noise.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{partition, Corpus, IdMap, IdMaps, Interaction, PhotoFeatureTable, SplitAssignment};
use crate::error::{Error, Result};
use crate::seed::stream_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_users: usize,
    pub n_items: usize,
    pub n_photos: usize,
    pub true_dim: usize,
    pub feature_dim: usize,
    pub style_noise: f64,
    pub feature_noise: f64,
    pub seed: u64,
    #[serde(default = "default_val")]
    pub val_frac: f64,
    #[serde(default = "default_test")]
    pub test_frac: f64,
}

fn default_val() -> f64 {
    super::DEFAULT_VAL_FRAC
}

fn default_test() -> f64 {
    super::DEFAULT_TEST_FRAC
}

impl Default for SyntheticSpec {
    /// The reference desk-scale corpus.
    fn default() -> Self {
        Self {
            n_users: 400,
            n_items: 80,
            n_photos: 8000,
            true_dim: 8,
            feature_dim: 32,
            style_noise: 0.3,
            feature_noise: 0.1,
            seed: 7,
            val_frac: default_val(),
            test_frac: default_test(),
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_users == 0 || self.n_items == 0 || self.n_photos == 0 || self.true_dim == 0 {
            return bad("synthetic counts and true_dim must be >= 1".into());
        }
        if self.true_dim > self.feature_dim {
            return bad(format!(
                "true_dim ({}) must not exceed feature_dim ({})",
                self.true_dim, self.feature_dim
            ));
        }
        if !(self.style_noise >= 0.0 && self.feature_noise >= 0.0)
            || !self.style_noise.is_finite()
            || !self.feature_noise.is_finite()
        {
            return bad("noise levels must be finite and >= 0".into());
        }
        if self.n_photos > u32::MAX as usize {
            return bad("too many photos".into());
        }
        Ok(())
    }
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(Corpus, SplitAssignment)> {
    spec.validate()?;
    let mut rng = stream_rng(spec.seed, 0);
    let styles: Vec<Vec<f64>> = (0..spec.n_users)
        .map(|_| gaussian_vec(&mut rng, spec.true_dim))
        .collect();
    generate_synthetic_with_styles(spec, &styles)
}

/// Like [`generate_synthetic`], with caller-supplied per-user style vectors.
///
/// Users and items are relabeled in first-seen photo order and any user or
/// item that received no photo is dropped, so the emitted corpus survives a
/// write/ingest round trip unchanged.
pub fn generate_synthetic_with_styles(
    spec: &SyntheticSpec,
    styles: &[Vec<f64>],
) -> Result<(Corpus, SplitAssignment)> {
    spec.validate()?;
    if styles.len() != spec.n_users || styles.iter().any(|s| s.len() != spec.true_dim) {
        return Err(Error::InvalidConfig(format!(
            "expected {} style vectors of length {}",
            spec.n_users, spec.true_dim
        )));
    }

    let mut rng = stream_rng(spec.seed, 1);
    // feature_dim x true_dim, row-major
    let mixing: Vec<f64> = gaussian_vec(&mut rng, spec.feature_dim * spec.true_dim);

    let mut rng = stream_rng(spec.seed, 2);
    let assignments: Vec<(usize, usize)> = (0..spec.n_photos)
        .map(|_| (rng.random_range(0..spec.n_users), rng.random_range(0..spec.n_items)))
        .collect();

    let mut rng = stream_rng(spec.seed, 3);
    let mut data = Vec::with_capacity(spec.n_photos * spec.feature_dim);
    let mut latent = vec![0.0f64; spec.true_dim];
    for &(author, _) in &assignments {
        for (l, s) in latent.iter_mut().zip(&styles[author]) {
            let jitter: f64 = rng.sample(StandardNormal);
            *l = s + spec.style_noise * jitter;
        }
        for row in mixing.chunks_exact(spec.true_dim) {
            let clean: f64 = row.iter().zip(&latent).map(|(a, l)| a * l).sum();
            let noise: f64 = rng.sample(StandardNormal);
            data.push((clean + spec.feature_noise * noise) as f32);
        }
    }

    let mut ids = IdMaps {
        users: IdMap::new(),
        items: IdMap::new(),
        photos: IdMap::numbered("p", spec.n_photos),
    };
    let interactions = assignments
        .iter()
        .enumerate()
        .map(|(p, &(u, i))| Interaction {
            user: ids.users.intern(&format!("u{u}")),
            item: ids.items.intern(&format!("i{i}")),
            photo: p as u32,
        })
        .collect();

    let features = PhotoFeatureTable::new(spec.feature_dim, data)?;
    let corpus = Corpus::with_ids(interactions, features, ids)?;
    let split = partition(&corpus, spec.val_frac, spec.test_frac, spec.seed)?;
    Ok((corpus, split))
}

fn gaussian_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}
