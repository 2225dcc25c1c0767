//! Photo-authorship corpora: (user, item, photo) triads, per-photo feature
//! vectors, and the derived per-user / per-item photo indices.

mod io;
mod partition;
mod synthetic;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{
    ingest_features, ingest_features_tsv, ingest_interactions, load_features, read_split,
    write_features, write_split, write_triads, FEATURE_MAGIC,
};
pub use partition::{partition, DEFAULT_TEST_FRAC, DEFAULT_VAL_FRAC};
pub use synthetic::{generate_synthetic, generate_synthetic_with_styles, SyntheticSpec};

/// One authorship record: `user` uploaded `photo` while reviewing `item`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Interaction {
    pub user: u32,
    pub item: u32,
    pub photo: u32,
}

/// Interns raw string identifiers into dense 0-based indices, first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdMap {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl IdMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Synthetic names `{prefix}{i}` for `0..n`.
    pub fn numbered(prefix: &str, n: usize) -> Self {
        let mut map = Self::new();
        for i in 0..n {
            map.intern(&format!("{prefix}{i}"));
        }
        map
    }

    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.names.len() as u32;
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), i);
        i
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn name(&self, index: u32) -> &str {
        &self.names[index as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdMaps {
    pub users: IdMap,
    pub items: IdMap,
    pub photos: IdMap,
}

/// Output of triad ingestion: interactions in file order plus the ID maps.
#[derive(Debug, Clone)]
pub struct Triads {
    pub interactions: Vec<Interaction>,
    pub ids: IdMaps,
}

/// Row-major table of per-photo feature vectors. Row `r` belongs to photo `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotoFeatureTable {
    dim: usize,
    data: Vec<f32>,
}

impl PhotoFeatureTable {
    pub const DEFAULT_DIM: usize = 1536;

    pub fn new(dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidCorpus("feature dimension must be >= 1".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::LengthMismatch {
                count: data.len() / dim,
                dim,
                actual: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteFeature {
                row: pos / dim,
                column: pos % dim,
            });
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.dim
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.dim..(r + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }
}

/// Immutable indexed corpus. Cheap to share across threads.
#[derive(Debug, Clone)]
pub struct Corpus {
    interactions: Vec<Interaction>,
    features: PhotoFeatureTable,
    ids: IdMaps,
    user_photos: Vec<Vec<u32>>,
    item_photos: Vec<Vec<u32>>,
    photo_author: Vec<u32>,
    photo_item: Vec<u32>,
    photo_row: Vec<u32>,
}

impl Corpus {
    /// Build from dense interactions; identifiers are synthesized as `u{i}`,
    /// `i{i}`, `p{i}`.
    pub fn new(interactions: Vec<Interaction>, features: PhotoFeatureTable) -> Result<Self> {
        let n_users = interactions.iter().map(|x| x.user as usize + 1).max().unwrap_or(0);
        let n_items = interactions.iter().map(|x| x.item as usize + 1).max().unwrap_or(0);
        let ids = IdMaps {
            users: IdMap::numbered("u", n_users),
            items: IdMap::numbered("i", n_items),
            photos: IdMap::numbered("p", features.rows()),
        };
        Self::with_ids(interactions, features, ids)
    }

    pub fn from_triads(triads: Triads, features: PhotoFeatureTable) -> Result<Self> {
        Self::with_ids(triads.interactions, features, triads.ids)
    }

    pub fn with_ids(
        interactions: Vec<Interaction>,
        features: PhotoFeatureTable,
        ids: IdMaps,
    ) -> Result<Self> {
        if interactions.is_empty() {
            return Err(Error::InvalidCorpus("corpus has no interactions".into()));
        }
        let n_users = ids.users.len();
        let n_items = ids.items.len();
        let rows = features.rows();

        let mut photo_row = vec![u32::MAX; rows];
        let mut photo_author = vec![0u32; rows];
        let mut photo_item = vec![0u32; rows];
        let mut user_photos = vec![Vec::new(); n_users];
        let mut item_photos = vec![Vec::new(); n_items];

        for (row, x) in interactions.iter().enumerate() {
            let p = x.photo as usize;
            if p >= rows {
                return Err(Error::MissingFeatureRow { photo: p, rows });
            }
            if x.user as usize >= n_users || x.item as usize >= n_items {
                return Err(Error::InvalidCorpus(format!(
                    "interaction {row} references user {} / item {} outside {n_users} users / {n_items} items",
                    x.user, x.item
                )));
            }
            if photo_row[p] != u32::MAX {
                return Err(Error::InvalidCorpus(format!(
                    "photo {p} appears in interactions {} and {row}",
                    photo_row[p]
                )));
            }
            photo_row[p] = row as u32;
            photo_author[p] = x.user;
            photo_item[p] = x.item;
            user_photos[x.user as usize].push(x.photo);
            item_photos[x.item as usize].push(x.photo);
        }
        if interactions.len() != rows {
            return Err(Error::InvalidCorpus(format!(
                "{rows} feature rows but {} photos in interactions",
                interactions.len()
            )));
        }

        Ok(Self {
            interactions,
            features,
            ids,
            user_photos,
            item_photos,
            photo_author,
            photo_item,
            photo_row,
        })
    }

    pub fn interactions(&self) -> &[Interaction] {
        &self.interactions
    }

    pub fn features(&self) -> &PhotoFeatureTable {
        &self.features
    }

    #[inline]
    pub fn feature(&self, photo: u32) -> &[f32] {
        self.features.row(photo as usize)
    }

    pub fn ids(&self) -> &IdMaps {
        &self.ids
    }

    pub fn n_users(&self) -> usize {
        self.user_photos.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_photos.len()
    }

    pub fn n_photos(&self) -> usize {
        self.photo_author.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.dim()
    }

    /// Photos authored by `user`, in interaction order.
    pub fn user_photos(&self, user: u32) -> &[u32] {
        &self.user_photos[user as usize]
    }

    /// Photos attached to `item`, in interaction order.
    pub fn item_photos(&self, item: u32) -> &[u32] {
        &self.item_photos[item as usize]
    }

    #[inline]
    pub fn photo_author(&self, photo: u32) -> u32 {
        self.photo_author[photo as usize]
    }

    #[inline]
    pub fn photo_item(&self, photo: u32) -> u32 {
        self.photo_item[photo as usize]
    }

    /// Interaction row holding `photo`.
    #[inline]
    pub fn photo_row(&self, photo: u32) -> usize {
        self.photo_row[photo as usize] as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Split::Train),
            "val" => Some(Split::Val),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

/// One split label per interaction row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitAssignment {
    labels: Vec<Split>,
}

impl SplitAssignment {
    /// Validate `labels` against `corpus`: one label per interaction and no
    /// validation/test user without a train interaction.
    pub fn new(labels: Vec<Split>, corpus: &Corpus) -> Result<Self> {
        if labels.len() != corpus.interactions().len() {
            return Err(Error::InvalidSplit(format!(
                "{} labels for {} interactions",
                labels.len(),
                corpus.interactions().len()
            )));
        }
        let split = Self { labels };
        let train = split.train_counts(corpus);
        for (row, x) in corpus.interactions().iter().enumerate() {
            if split.labels[row] != Split::Train && train[x.user as usize] == 0 {
                return Err(Error::InvalidSplit(format!(
                    "user {} appears in {} without any train interaction",
                    corpus.ids().users.name(x.user),
                    split.labels[row].as_str()
                )));
            }
        }
        Ok(split)
    }

    pub fn labels(&self) -> &[Split] {
        &self.labels
    }

    #[inline]
    pub fn label(&self, row: usize) -> Split {
        self.labels[row]
    }

    pub fn rows(&self, which: Split) -> impl Iterator<Item = usize> + '_ {
        self.labels
            .iter()
            .enumerate()
            .filter(move |(_, &l)| l == which)
            .map(|(i, _)| i)
    }

    pub fn count(&self, which: Split) -> usize {
        self.labels.iter().filter(|&&l| l == which).count()
    }

    /// Achieved (train, val, test) fractions.
    pub fn fractions(&self) -> (f64, f64, f64) {
        let n = self.labels.len() as f64;
        (
            self.count(Split::Train) as f64 / n,
            self.count(Split::Val) as f64 / n,
            self.count(Split::Test) as f64 / n,
        )
    }

    /// Number of train photos per user.
    pub fn train_counts(&self, corpus: &Corpus) -> Vec<u32> {
        let mut counts = vec![0u32; corpus.n_users()];
        for (x, &l) in corpus.interactions().iter().zip(&self.labels) {
            if l == Split::Train {
                counts[x.user as usize] += 1;
            }
        }
        counts
    }
}
