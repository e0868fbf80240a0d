use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const MIN_SPLIT_ROWS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Seeded shuffle of individual rows.
    Random,
    /// Rows are grouped into square blocks of `block_size` (in coordinate
    /// units) and whole blocks are assigned to a split.
    SpatialBlock { block_size: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub seed: u64,
    pub mode: SplitMode,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train: 0.70,
            val: 0.15,
            test: 0.15,
            seed: 0,
            mode: SplitMode::Random,
        }
    }
}

impl SplitSpec {
    pub fn with_seed(seed: u64) -> Self {
        SplitSpec {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let r = [self.train, self.val, self.test];
        if r.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("split ratios must be finite and non-negative"));
        }
        if (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "split ratios must sum to 1, got {}",
                r.iter().sum::<f64>()
            )));
        }
        if let SplitMode::SpatialBlock { block_size } = self.mode {
            if !(block_size.is_finite() && block_size > 0.0) {
                return Err(Error::invalid("block_size must be positive"));
            }
        }
        Ok(())
    }

    /// `(train, val, test)` sizes: val and test are floored, train takes the rest.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let val = (self.val * n as f64).floor() as usize;
        let test = (self.test * n as f64).floor() as usize;
        (n - val - test, val, test)
    }
}

/// Disjoint row-index sets covering `0..n`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Checks that the three sets partition `0..n`.
    pub fn check(&self, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        for &i in self.train.iter().chain(&self.val).chain(&self.test) {
            if i >= n {
                return Err(Error::invalid(format!("split index {i} out of range for {n} rows")));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::invalid(format!("row {i} appears in more than one split")));
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::invalid(format!("row {i} is not assigned to any split")));
        }
        Ok(())
    }
}

fn check_size(n: usize, spec: &SplitSpec) -> Result<(usize, usize, usize)> {
    spec.validate()?;
    let sizes = spec.sizes(n);
    let needs_all = spec.val > 0.0 && spec.test > 0.0 && spec.train > 0.0;
    if n < MIN_SPLIT_ROWS || (needs_all && (sizes.0 == 0 || sizes.1 == 0 || sizes.2 == 0)) {
        return Err(Error::invalid(format!(
            "{n} rows are too few to split (need at least {MIN_SPLIT_ROWS})"
        )));
    }
    Ok(sizes)
}

/// Seeded shuffle of `0..n` sliced into train, val and test.
pub fn split_dataset(n: usize, spec: &SplitSpec) -> Result<Split> {
    if let SplitMode::SpatialBlock { .. } = spec.mode {
        return Err(Error::invalid("spatial block splits need coordinates"));
    }
    let (n_train, n_val, _) = check_size(n, spec)?;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    Ok(Split {
        train: idx[..n_train].to_vec(),
        val: idx[n_train..n_train + n_val].to_vec(),
        test: idx[n_train + n_val..].to_vec(),
    })
}

/// Block-wise split: rows sharing a `block_size` cell stay together. Test
/// blocks are drawn first until the test quota is met, then validation.
pub fn split_dataset_blocked(coords: &[(f64, f64)], spec: &SplitSpec) -> Result<Split> {
    let SplitMode::SpatialBlock { block_size } = spec.mode else {
        return split_dataset(coords.len(), spec);
    };
    let n = coords.len();
    let (_, n_val, n_test) = check_size(n, spec)?;
    if coords.iter().any(|(x, y)| !(x.is_finite() && y.is_finite())) {
        return Err(Error::invalid("non-finite coordinate"));
    }
    let mut blocks: std::collections::BTreeMap<(i64, i64), Vec<usize>> = Default::default();
    for (i, (x, y)) in coords.iter().enumerate() {
        let key = ((x / block_size).floor() as i64, (y / block_size).floor() as i64);
        blocks.entry(key).or_default().push(i);
    }
    let mut groups: Vec<Vec<usize>> = blocks.into_values().collect();
    if groups.len() < 3 {
        return Err(Error::invalid(format!(
            "only {} spatial blocks; use a smaller block size",
            groups.len()
        )));
    }
    groups.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let mut split = Split::default();
    for g in groups {
        if split.test.len() < n_test.max(1) {
            split.test.extend(g);
        } else if split.val.len() < n_val.max(1) {
            split.val.extend(g);
        } else {
            split.train.extend(g);
        }
    }
    if split.train.is_empty() {
        return Err(Error::invalid("spatial blocks left no training rows"));
    }
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_and_rounding() {
        let s = split_dataset(100, &SplitSpec::default()).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (70, 15, 15));
        let s = split_dataset(10, &SplitSpec::default()).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (8, 1, 1));
        s.check(10).unwrap();
        assert!(split_dataset(9, &SplitSpec::default()).is_err());
    }

    #[test]
    fn seeded_and_disjoint() {
        let a = split_dataset(57, &SplitSpec::with_seed(3)).unwrap();
        let b = split_dataset(57, &SplitSpec::with_seed(3)).unwrap();
        let c = split_dataset(57, &SplitSpec::with_seed(4)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        a.check(57).unwrap();
    }

    #[test]
    fn check_catches_overlap_and_gaps() {
        let s = Split {
            train: vec![0, 1],
            val: vec![1],
            test: vec![],
        };
        assert!(s.check(2).is_err());
        let s = Split {
            train: vec![0],
            val: vec![],
            test: vec![],
        };
        assert!(s.check(2).is_err());
    }

    #[test]
    fn ratios_must_sum_to_one() {
        let spec = SplitSpec {
            train: 0.5,
            ..SplitSpec::default()
        };
        assert!(split_dataset(100, &spec).is_err());
    }

    #[test]
    fn blocks_stay_together() {
        let coords: Vec<(f64, f64)> = (0..100).map(|i| ((i % 10) as f64, (i / 10) as f64)).collect();
        let spec = SplitSpec {
            mode: SplitMode::SpatialBlock { block_size: 2.0 },
            ..SplitSpec::default()
        };
        let s = split_dataset_blocked(&coords, &spec).unwrap();
        s.check(100).unwrap();
        let block = |i: usize| ((coords[i].0 / 2.0) as i64, (coords[i].1 / 2.0) as i64);
        for &t in &s.test {
            assert!(s.train.iter().all(|&r| block(r) != block(t)));
        }
    }
}
