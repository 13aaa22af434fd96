use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::CorpusError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    /// Train, validation and test fractions.
    pub ratios: [f64; 3],
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(seed: u64) -> Self {
        Self {
            ratios: [0.7, 0.1, 0.2],
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let sum: f64 = self.ratios.iter().sum();
        if self.ratios.iter().any(|&r| !(r > 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(CorpusError::BadRatios(self.ratios));
        }
        Ok(())
    }
}

/// Train and validation sizes are the rounded fractions of `n`; the test
/// set takes the remainder.
pub fn split_counts(n: usize, spec: &SplitSpec) -> (usize, usize, usize) {
    let train = ((spec.ratios[0] * n as f64).round() as usize).min(n);
    let val = ((spec.ratios[1] * n as f64).round() as usize).min(n - train);
    (train, val, n - train - val)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split<T> {
    pub train: Vec<T>,
    pub val: Vec<T>,
    pub test: Vec<T>,
}

/// Seeded shuffle cut by [`split_counts`]. Each part keeps the input order.
pub fn split_corpus<T: Clone>(items: &[T], spec: &SplitSpec) -> Result<Split<T>, CorpusError> {
    spec.validate()?;
    let n = items.len();
    if n < 3 {
        return Err(CorpusError::TooFew(n));
    }
    let (n_train, n_val, _) = split_counts(n, spec);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let pick = |idx: &[usize]| {
        let mut idx = idx.to_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| items[i].clone()).collect()
    };
    Ok(Split {
        train: pick(&order[..n_train]),
        val: pick(&order[n_train..n_train + n_val]),
        test: pick(&order[n_train + n_val..]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_counts() {
        let spec = SplitSpec::new(0);
        assert_eq!(split_counts(6078, &spec), (4255, 608, 1215));
        assert_eq!(split_counts(10, &spec), (7, 1, 2));
        assert_eq!(split_counts(3, &spec), (2, 0, 1));
    }

    #[test]
    fn errors() {
        assert!(matches!(split_corpus(&[1, 2], &SplitSpec::new(0)), Err(CorpusError::TooFew(2))));
        let bad = SplitSpec {
            ratios: [0.5, 0.5, 0.5],
            seed: 0,
        };
        assert!(matches!(split_corpus(&[1, 2, 3], &bad), Err(CorpusError::BadRatios(_))));
    }
}
