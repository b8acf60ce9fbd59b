//! Seeded stratified holdout split.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::sample::Dataset;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SplitError {
    #[error("cannot split an empty dataset")]
    Empty,
    #[error("test fraction must lie strictly between 0 and 1, got {0}")]
    Fraction(f64),
}

/// Test-set size for a class of `n` samples: `round(fraction * n)` clamped to
/// `[1, n - 1]`; singleton classes stay entirely in train.
pub fn test_count(n: usize, fraction: f64) -> usize {
    if n < 2 {
        return 0;
    }
    let k = libm::round(fraction * n as f64) as usize;
    k.clamp(1, n - 1)
}

/// Splits per label. Classes are visited in label order and each class's members
/// are shuffled by one ChaCha8 stream seeded with `seed`. Both halves keep the
/// original sample order.
pub fn stratified_split(dataset: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset), SplitError> {
    if dataset.is_empty() {
        return Err(SplitError::Empty);
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(SplitError::Fraction(test_fraction));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_test = alloc::vec![false; dataset.len()];
    for (_, mut members) in dataset.indices_by_label() {
        let k = test_count(members.len(), test_fraction);
        members.shuffle(&mut rng);
        for &i in &members[..k] {
            in_test[i] = true;
        }
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (s, t) in dataset.samples().iter().zip(in_test) {
        if t {
            test.push(s.clone());
        } else {
            train.push(s.clone());
        }
    }
    Ok((Dataset::from_checked(train), Dataset::from_checked(test)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::SyntheticSample;
    use alloc::format;
    use alloc::string::String;
    use alloc::vec;
    use proptest::prelude::*;

    fn dataset(per_class: &[(&str, usize)]) -> Dataset {
        let mut samples = Vec::new();
        for (label, n) in per_class {
            for i in 0..*n {
                samples.push(SyntheticSample::bare(format!("{label}-{i}"), format!("text {label} {i}"), *label));
            }
        }
        Dataset::new(samples).unwrap()
    }

    #[test]
    fn rounding_rule() {
        // 0.3 * {34, 4, 18, 31, 16, 28} = {10.2, 1.2, 5.4, 9.3, 4.8, 8.4}
        let got: Vec<usize> = [34, 4, 18, 31, 16, 28].iter().map(|&n| test_count(n, 0.3)).collect();
        assert_eq!(got, vec![10, 1, 5, 9, 5, 8]);
        assert_eq!(test_count(1, 0.3), 0);
        assert_eq!(test_count(2, 0.01), 1);
        assert_eq!(test_count(2, 0.99), 1);
    }

    #[test]
    fn half_split_of_pairs() {
        let d = dataset(&[("a", 2), ("b", 2), ("c", 2)]);
        let (train, test) = stratified_split(&d, 0.5, 7).unwrap();
        for label in ["a", "b", "c"] {
            assert_eq!(train.class_stats().per_class[label], 1);
            assert_eq!(test.class_stats().per_class[label], 1);
        }
    }

    #[test]
    fn same_seed_same_split() {
        let d = dataset(&[("a", 30), ("b", 11)]);
        assert_eq!(stratified_split(&d, 0.3, 42).unwrap(), stratified_split(&d, 0.3, 42).unwrap());
        assert_ne!(stratified_split(&d, 0.3, 42).unwrap().1, stratified_split(&d, 0.3, 43).unwrap().1);
    }

    #[test]
    fn errors() {
        assert_eq!(stratified_split(&Dataset::empty(), 0.3, 1).unwrap_err(), SplitError::Empty);
        let d = dataset(&[("a", 3)]);
        assert!(matches!(stratified_split(&d, 1.0, 1), Err(SplitError::Fraction(_))));
        assert!(matches!(stratified_split(&d, f64::NAN, 1), Err(SplitError::Fraction(_))));
    }

    proptest! {
        #[test]
        fn partition_law(sizes in proptest::collection::vec(1usize..40, 1..6), f in 0.05f64..0.95, seed: u64) {
            let labels: Vec<String> = (0..sizes.len()).map(|i| format!("c{i}")).collect();
            let spec: Vec<(&str, usize)> = labels.iter().map(String::as_str).zip(sizes.iter().copied()).collect();
            let d = dataset(&spec);
            let (train, test) = stratified_split(&d, f, seed).unwrap();
            prop_assert_eq!(train.len() + test.len(), d.len());
            let mut ids: Vec<&str> = train.samples().iter().chain(test.samples()).map(|s| s.id.as_str()).collect();
            ids.sort_unstable();
            ids.dedup();
            prop_assert_eq!(ids.len(), d.len());
            let stats = test.class_stats();
            for (label, n) in &spec {
                let got = stats.per_class.get(*label).copied().unwrap_or(0);
                prop_assert_eq!(got, test_count(*n, f));
                if *n >= 2 {
                    prop_assert!((got as f64 - libm::round(f * *n as f64)).abs() <= 1.0);
                }
            }
        }
    }
}
