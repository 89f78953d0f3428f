use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::pairs::QueryPair;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("need at least 10 pairs to split, got {0}")]
pub struct TooFewPairs(pub usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitDataset {
    pub train: Vec<QueryPair>,
    pub validation: Vec<QueryPair>,
    pub test: Vec<QueryPair>,
    pub seed: u64,
}

impl SplitDataset {
    pub fn len(&self) -> usize {
        self.train.len() + self.validation.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Sizes of the 80/10/10 slices; train absorbs the rounding remainder.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let tenth = n / 10;
    (n - 2 * tenth, tenth, tenth)
}

/// Seeded shuffle followed by contiguous train/validation/test slices.
pub fn split<T: Into<Vec<QueryPair>>>(pairs: T, seed: u64) -> Result<SplitDataset, TooFewPairs> {
    let mut pairs = pairs.into();
    if pairs.len() < 10 {
        return Err(TooFewPairs(pairs.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pairs.shuffle(&mut rng);
    let (n_train, n_valid, _) = split_sizes(pairs.len());
    let test = pairs.split_off(n_train + n_valid);
    let validation = pairs.split_off(n_train);
    Ok(SplitDataset { train: pairs, validation, test, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::miner::ThreadRef;

    fn pairs(n: usize) -> Vec<QueryPair> {
        (0..n)
            .map(|i| QueryPair {
                original: format!("q{i}"),
                reformulated: format!("r{i}"),
                similarity: 1.0,
                thread_ref: ThreadRef { session_id: "s".into(), query_index: i, terminal_post: "1".into() },
            })
            .collect()
    }

    #[test]
    fn ten_pairs() {
        let s = split(pairs(10), 3).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (8, 1, 1));
    }

    #[test]
    fn too_few() {
        assert_eq!(split(pairs(9), 3).unwrap_err(), TooFewPairs(9));
    }

    #[test]
    fn deterministic_and_disjoint() {
        let a = split(pairs(57), 42).unwrap();
        assert_eq!(a, split(pairs(57), 42).unwrap());
        assert_ne!(a.train, split(pairs(57), 43).unwrap().train);
        let mut all: Vec<String> = a.train.iter().chain(&a.validation).chain(&a.test).map(|p| p.original.clone()).collect();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 57);
        assert_eq!((a.train.len(), a.validation.len(), a.test.len()), (47, 5, 5));
    }

    #[test]
    fn reported_dataset_sizes() {
        assert_eq!(split_sizes(651_036), (520_830, 65_103, 65_103));
    }
}
