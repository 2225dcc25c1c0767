use crate::corpus::{Corpus, Split, SplitAssignment};

/// One held-out positive photo and the same-item photos it competes with.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestCase {
    pub user: u32,
    pub item: u32,
    pub positive: u32,
    /// The positive first, then same-item photos by other users.
    pub candidates: Vec<u32>,
    /// Number of train photos authored by `user`.
    pub author_train_count: u32,
}

impl TestCase {
    pub fn n_candidates(&self) -> usize {
        self.candidates.len()
    }
}

/// One case per test interaction.
pub fn build_test_cases(corpus: &Corpus, split: &SplitAssignment) -> Vec<TestCase> {
    build_cases(corpus, split, Split::Test)
}

/// One case per interaction labeled `target`. Candidates are the item's
/// photos not authored by the case's user, minus other `target`-labeled
/// photos (each of which is some other case's positive).
pub fn build_cases(corpus: &Corpus, split: &SplitAssignment, target: Split) -> Vec<TestCase> {
    let train_counts = split.train_counts(corpus);
    split
        .rows(target)
        .map(|row| {
            let x = corpus.interactions()[row];
            let mut candidates = vec![x.photo];
            candidates.extend(corpus.item_photos(x.item).iter().copied().filter(|&p| {
                corpus.photo_author(p) != x.user && split.label(corpus.photo_row(p)) != target
            }));
            TestCase {
                user: x.user,
                item: x.item,
                positive: x.photo,
                candidates,
                author_train_count: train_counts[x.user as usize],
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Interaction, PhotoFeatureTable};

    fn corpus(triads: &[(u32, u32)]) -> Corpus {
        let interactions = triads
            .iter()
            .enumerate()
            .map(|(p, &(user, item))| Interaction { user, item, photo: p as u32 })
            .collect();
        Corpus::new(interactions, PhotoFeatureTable::new(1, vec![0.0; triads.len()]).unwrap()).unwrap()
    }

    #[test]
    fn three_authors_one_item() {
        // p0 by u0 (test), p1 by u1, p2 by u2; u0 also has a train photo elsewhere
        let c = corpus(&[(0, 0), (1, 0), (2, 0), (0, 1)]);
        let labels = vec![Split::Test, Split::Train, Split::Train, Split::Train];
        let s = SplitAssignment::new(labels, &c).unwrap();
        let cases = build_test_cases(&c, &s);
        assert_eq!(cases.len(), 1);
        assert_eq!(cases[0].candidates, vec![0, 1, 2]);
        assert_eq!(cases[0].author_train_count, 1);
    }

    #[test]
    fn own_photos_only_gives_singleton() {
        let c = corpus(&[(0, 0), (0, 0), (1, 1)]);
        let labels = vec![Split::Test, Split::Train, Split::Train];
        let s = SplitAssignment::new(labels, &c).unwrap();
        assert_eq!(build_test_cases(&c, &s)[0].candidates, vec![0]);
    }

    #[test]
    fn other_test_positives_excluded() {
        let c = corpus(&[(0, 0), (1, 0), (2, 0), (0, 1), (1, 1), (2, 1)]);
        let labels = vec![Split::Test, Split::Test, Split::Val, Split::Train, Split::Train, Split::Train];
        let s = SplitAssignment::new(labels, &c).unwrap();
        let cases = build_test_cases(&c, &s);
        assert_eq!(cases[0].candidates, vec![0, 2]);
        assert_eq!(cases[1].candidates, vec![1, 2]);
        let val = build_cases(&c, &s, Split::Val);
        assert_eq!(val[0].candidates, vec![2, 0, 1]);
    }
}
