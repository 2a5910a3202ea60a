use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Disjoint train/validation/test node indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train_idx: Vec<usize>,
    pub val_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
}

/// Seeded permutation split; sizes are `round(ratio·n)` and validation takes
/// the remainder.
pub fn random_split(n: usize, train_ratio: f64, test_ratio: f64, seed: u64) -> Result<Split> {
    for (name, r) in [("train_ratio", train_ratio), ("test_ratio", test_ratio)] {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::Config(format!("{name}={r} outside [0,1]")));
        }
    }
    if train_ratio + test_ratio > 1.0 + 1e-12 {
        return Err(Error::Config(format!(
            "train_ratio + test_ratio = {} exceeds 1",
            train_ratio + test_ratio
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng::seeded(seed));
    let n_train = ((train_ratio * n as f64).round() as usize).min(n);
    let n_test = ((test_ratio * n as f64).round() as usize).min(n - n_train);
    let test_idx = perm[n_train..n_train + n_test].to_vec();
    let val_idx = perm[n_train + n_test..].to_vec();
    perm.truncate(n_train);
    Ok(Split {
        train_idx: perm,
        val_idx,
        test_idx,
    })
}
