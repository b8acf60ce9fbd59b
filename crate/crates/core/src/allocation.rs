//! Even distribution of a sample budget over atomic configurations.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum AllocationError {
    #[error("at least one atomic configuration is required")]
    NoConfigurations,
    #[error("the requested sample count must be positive")]
    NoSamples,
}

/// Splits `samples` over `configurations` so that counts differ by at most one.
/// The `samples % configurations` extra samples go to the lowest indices.
pub fn allocate_samples(configurations: usize, samples: usize) -> Result<Vec<usize>, AllocationError> {
    if configurations == 0 {
        return Err(AllocationError::NoConfigurations);
    }
    if samples == 0 {
        return Err(AllocationError::NoSamples);
    }
    let base = samples / configurations;
    let extra = samples % configurations;
    let mut counts = vec![base; configurations];
    for c in counts.iter_mut().take(extra) {
        *c += 1;
    }
    Ok(counts)
}
