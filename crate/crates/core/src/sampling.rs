//! Training-example construction: the static 40x binary expansion used by
//! the classification-trained models, and per-epoch pairwise resampling for
//! the ranking-trained model.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, Split, SplitAssignment};
use crate::error::{Error, Result};
use crate::seed::stream_rng;

/// Copies of each positive in the static expansion (the original plus 19).
pub const POSITIVE_COPIES: usize = 20;
/// Negatives drawn from the positive's own item.
pub const SAME_ITEM_NEGATIVES: usize = 10;
/// Negatives drawn from other items.
pub const OTHER_ITEM_NEGATIVES: usize = 10;
pub const EXPANSION_FACTOR: usize = POSITIVE_COPIES + SAME_ITEM_NEGATIVES + OTHER_ITEM_NEGATIVES;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinarySample {
    pub user: u32,
    pub item: u32,
    pub photo: u32,
    pub label: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairSample {
    pub user: u32,
    pub item: u32,
    pub photo_pos: u32,
    pub photo_neg: u32,
}

#[derive(Debug, Clone)]
pub struct StaticExpansion {
    pub samples: Vec<BinarySample>,
    /// Positives whose same-item negatives came from other items because
    /// every photo of their item belongs to their author.
    pub same_item_fallbacks: usize,
}

/// Expand each train positive into 20 positive copies, 10 same-item
/// negatives and 10 other-item negatives (with replacement).
pub fn expand_static(corpus: &Corpus, split: &SplitAssignment, seed: u64) -> Result<StaticExpansion> {
    let train: Vec<usize> = split.rows(Split::Train).collect();
    if train.is_empty() {
        return Err(Error::InvalidSplit("train split is empty".into()));
    }
    let mut rng = stream_rng(seed, 0);
    let mut samples = Vec::with_capacity(train.len() * EXPANSION_FACTOR);
    let mut same_item_fallbacks = 0;
    let mut pool = Vec::new();

    for row in train {
        let x = corpus.interactions()[row];
        let positive = BinarySample { user: x.user, item: x.item, photo: x.photo, label: 1 };
        samples.extend(std::iter::repeat_n(positive, POSITIVE_COPIES));

        pool.clear();
        pool.extend(
            corpus
                .item_photos(x.item)
                .iter()
                .copied()
                .filter(|&p| corpus.photo_author(p) != x.user),
        );
        let other_item_pool = other_item_pool_size(corpus, x.user, x.item);
        if other_item_pool == 0 {
            return Err(Error::NoNegatives(format!(
                "no photo outside item {} that user {} did not author",
                corpus.ids().items.name(x.item),
                corpus.ids().users.name(x.user)
            )));
        }

        if pool.is_empty() {
            same_item_fallbacks += 1;
            log::warn!(
                "item {} has no photos by users other than {}; using other-item negatives",
                corpus.ids().items.name(x.item),
                corpus.ids().users.name(x.user)
            );
            for _ in 0..SAME_ITEM_NEGATIVES {
                samples.push(other_item_negative(corpus, &mut rng, x.user, x.item));
            }
        } else {
            for _ in 0..SAME_ITEM_NEGATIVES {
                let photo = pool[rng.random_range(0..pool.len())];
                samples.push(BinarySample { user: x.user, item: x.item, photo, label: 0 });
            }
        }
        for _ in 0..OTHER_ITEM_NEGATIVES {
            samples.push(other_item_negative(corpus, &mut rng, x.user, x.item));
        }
    }
    Ok(StaticExpansion { samples, same_item_fallbacks })
}

/// |{p : item(p) != item, author(p) != user}| by inclusion-exclusion.
fn other_item_pool_size(corpus: &Corpus, user: u32, item: u32) -> usize {
    let own_in_item = corpus
        .user_photos(user)
        .iter()
        .filter(|&&p| corpus.photo_item(p) == item)
        .count();
    (corpus.n_photos() + own_in_item) - (corpus.item_photos(item).len() + corpus.user_photos(user).len())
}

/// Rejection-sample a photo outside `item` not authored by `user`. The
/// caller guarantees the pool is non-empty.
fn other_item_negative(corpus: &Corpus, rng: &mut ChaCha8Rng, user: u32, item: u32) -> BinarySample {
    let n = corpus.n_photos() as u32;
    loop {
        let p = rng.random_range(0..n);
        let other_item = corpus.photo_item(p);
        if other_item != item && corpus.photo_author(p) != user {
            return BinarySample { user, item: other_item, photo: p, label: 0 };
        }
    }
}

/// One pair per train positive, with the negative drawn uniformly from all
/// photos the user did not author. Stream `epoch` of `seed`.
pub fn sample_pairwise_epoch(
    corpus: &Corpus,
    split: &SplitAssignment,
    epoch: u64,
    seed: u64,
) -> Result<Vec<PairSample>> {
    let n = corpus.n_photos() as u32;
    let mut rng = stream_rng(seed, epoch);
    let mut pairs = Vec::with_capacity(split.count(Split::Train));
    for row in split.rows(Split::Train) {
        let x = corpus.interactions()[row];
        if corpus.user_photos(x.user).len() >= corpus.n_photos() {
            return Err(Error::NoNegatives(format!(
                "user {} authored every photo",
                corpus.ids().users.name(x.user)
            )));
        }
        let photo_neg = loop {
            let p = rng.random_range(0..n);
            if corpus.photo_author(p) != x.user {
                break p;
            }
        };
        pairs.push(PairSample { user: x.user, item: x.item, photo_pos: x.photo, photo_neg });
    }
    Ok(pairs)
}

/// A seeded shuffle of `samples` served in contiguous batches; the final
/// partial batch is kept.
pub struct BatchStream<'a, T> {
    samples: &'a [T],
    order: Vec<usize>,
    batch_size: usize,
    cursor: usize,
}

pub fn batch_stream<T>(samples: &[T], batch_size: usize, shuffle_seed: u64) -> BatchStream<'_, T> {
    assert!(batch_size >= 1, "batch_size must be >= 1");
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(&mut stream_rng(shuffle_seed, 0));
    BatchStream { samples, order, batch_size, cursor: 0 }
}

impl<'a, T> BatchStream<'a, T> {
    /// Indices of the next batch, without materializing the samples.
    pub fn next_indices(&mut self) -> Option<&[usize]> {
        if self.cursor >= self.order.len() {
            return None;
        }
        let end = (self.cursor + self.batch_size).min(self.order.len());
        let batch = &self.order[self.cursor..end];
        self.cursor = end;
        Some(batch)
    }

    pub fn num_batches(&self) -> usize {
        self.order.len().div_ceil(self.batch_size)
    }
}

impl<'a, T> Iterator for BatchStream<'a, T> {
    type Item = Vec<&'a T>;

    fn next(&mut self) -> Option<Self::Item> {
        let samples = self.samples;
        self.next_indices().map(|idx| idx.iter().map(|&i| &samples[i]).collect())
    }
}

pub fn write_binary_samples(samples: &[BinarySample], path: impl AsRef<Path>) -> Result<()> {
    dump(path.as_ref(), "user\titem\tphoto\tlabel", samples.iter().map(|s| {
        format!("{}\t{}\t{}\t{}", s.user, s.item, s.photo, s.label)
    }))
}

pub fn write_pair_samples(samples: &[PairSample], path: impl AsRef<Path>) -> Result<()> {
    dump(path.as_ref(), "user\titem\tphoto_pos\tphoto_neg", samples.iter().map(|s| {
        format!("{}\t{}\t{}\t{}", s.user, s.item, s.photo_pos, s.photo_neg)
    }))
}

fn dump(path: &Path, header: &str, rows: impl Iterator<Item = String>) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    writeln!(w, "{header}").map_err(io)?;
    for r in rows {
        writeln!(w, "{r}").map_err(io)?;
    }
    w.flush().map_err(io)
}
