use super::{dot, elvis_forward, project_photo_into, score_rnd, ModelKind, ModelParams};
use crate::corpus::{Corpus, Split, SplitAssignment};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::seed::stream_rng;

/// Scores a candidate pool for one evaluation case. Higher is better.
pub trait Scorer: Sync {
    /// `case_id` keys any randomness so results do not depend on the order
    /// in which cases are scored.
    fn score(&self, case_id: u64, user: u32, candidates: &[u32]) -> Vec<f64>;
}

impl<F> Scorer for F
where
    F: Fn(u64, u32, &[u32]) -> Vec<f64> + Sync,
{
    fn score(&self, case_id: u64, user: u32, candidates: &[u32]) -> Vec<f64> {
        self(case_id, user, candidates)
    }
}

/// Uniform random preference per (case, candidate).
#[derive(Debug, Clone, Copy)]
pub struct RandomScorer {
    pub seed: u64,
}

impl Scorer for RandomScorer {
    fn score(&self, case_id: u64, _user: u32, candidates: &[u32]) -> Vec<f64> {
        let mut rng = stream_rng(self.seed, case_id);
        candidates.iter().map(|_| score_rnd(&mut rng)).collect()
    }
}

/// Negative distance to the centroid of each user's train photos.
#[derive(Debug, Clone)]
pub struct CentroidScorer<'a> {
    corpus: &'a Corpus,
    centroids: Vec<Option<Vec<f64>>>,
}

impl<'a> CentroidScorer<'a> {
    pub fn new(corpus: &'a Corpus, split: &SplitAssignment) -> Self {
        let dim = corpus.feature_dim();
        let mut sums = vec![vec![0.0f64; dim]; corpus.n_users()];
        let mut counts = vec![0usize; corpus.n_users()];
        for (row, x) in corpus.interactions().iter().enumerate() {
            if split.label(row) == Split::Train {
                let u = x.user as usize;
                counts[u] += 1;
                for (s, &v) in sums[u].iter_mut().zip(corpus.feature(x.photo)) {
                    *s += v as f64;
                }
            }
        }
        let centroids = sums
            .into_iter()
            .zip(counts)
            .map(|(mut s, n)| {
                (n > 0).then(|| {
                    s.iter_mut().for_each(|v| *v /= n as f64);
                    s
                })
            })
            .collect();
        Self { corpus, centroids }
    }
}

impl Scorer for CentroidScorer<'_> {
    fn score(&self, _case_id: u64, user: u32, candidates: &[u32]) -> Vec<f64> {
        match &self.centroids[user as usize] {
            None => vec![f64::MIN; candidates.len()],
            Some(c) => candidates
                .iter()
                .map(|&p| -super::score::euclidean(c, self.corpus.feature(p)))
                .collect(),
        }
    }
}

/// Eval-mode scorer for the trained models. Photo projections are computed
/// once up front. MF-ELVis and ELVis rank by their pre-sigmoid logit, which
/// orders candidates identically without saturating to ties.
pub struct LearnedScorer {
    params: ModelParams<f64>,
    projected: Vec<f64>,
}

impl LearnedScorer {
    pub fn new(params: &ModelParams<f32>, corpus: &Corpus, exec: Exec) -> Result<Self> {
        if !params.config.kind.is_learned() {
            return Err(Error::InvalidConfig(format!("{} is not a learned model", params.config.kind)));
        }
        if params.n_users != corpus.n_users() {
            return Err(Error::InvalidConfig(format!(
                "model has {} users but the corpus has {}",
                params.n_users,
                corpus.n_users()
            )));
        }
        if params.config.feature_dim != corpus.feature_dim() {
            return Err(Error::DimensionMismatch {
                expected: params.config.feature_dim,
                actual: corpus.feature_dim(),
            });
        }
        let params = params.cast::<f64>();
        let d = params.d();
        let photos: Vec<u32> = (0..corpus.n_photos() as u32).collect();
        let projected = exec
            .map(&photos, |_, &p| {
                let mut v = vec![0.0; d];
                project_photo_into(&params, corpus.feature(p), &mut v);
                v
            })
            .concat();
        Ok(Self { params, projected })
    }

    fn photo(&self, p: u32) -> &[f64] {
        let d = self.params.d();
        &self.projected[p as usize * d..(p as usize + 1) * d]
    }
}

impl Scorer for LearnedScorer {
    fn score(&self, _case_id: u64, user: u32, candidates: &[u32]) -> Vec<f64> {
        let u = self.params.user(user);
        match self.params.config.kind {
            ModelKind::Elvis => candidates
                .iter()
                .map(|&p| elvis_forward(&self.params, u, self.photo(p), None).logit)
                .collect(),
            _ => candidates.iter().map(|&p| dot(u, self.photo(p))).collect(),
        }
    }
}
