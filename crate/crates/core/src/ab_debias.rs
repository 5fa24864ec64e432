//! Cross-section split-sample correction of the Arellano-Bond estimator.
//!
//! Each split draws a uniformly random ordering of the units, cuts it into two
//! halves, refits AB on each half (own instruments, own one-step weight) and
//! forms `2 * full - mean(halves)`. With several splits the corrections are
//! averaged in split order.

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::ab::{estimate_ab, AbSpec};
use crate::correction::{split_corrected, CorrectionMethod, CorrectionReport};
use crate::error::{Error, Result};
use crate::sample::{cross_split, RegressionSample, SplitConvention, SplitScheme};
use crate::seeds::{derive_seed, stream};

/// Sub-seed of split `r` under `seed`.
pub fn split_seed(seed: u64, r: usize) -> u64 {
    derive_seed(seed, r as u64)
}

/// Uniformly random ordering of `n` units drawn from a split sub-seed.
pub fn random_permutation(n: usize, sub_seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut stream(sub_seed, 0));
    perm
}

fn half_fit(sample: &RegressionSample, spec: AbSpec, which: &str) -> Result<DVector<f64>> {
    match estimate_ab(sample, spec) {
        Ok((fit, _)) => Ok(fit.slopes()),
        Err(
            e @ (Error::OrderConditionFailed { .. }
            | Error::SingularGmmGram
            | Error::NoValidInstruments
            | Error::ZeroWeightMatrix),
        ) => Err(Error::HalfSampleOrderConditionFailed(format!("{which}: {e}"))),
        Err(e) => Err(e),
    }
}

/// Split correction for given unit orderings (one split per permutation).
pub fn ab_split_correction_with_permutations(
    sample: &RegressionSample,
    full: &DVector<f64>,
    permutations: &[Vec<usize>],
    spec: AbSpec,
    convention: SplitConvention,
) -> Result<CorrectionReport> {
    if permutations.is_empty() {
        return Err(Error::InvalidConfig {
            field: "splits".into(),
            reason: "need at least one split".into(),
        });
    }
    let halves = permutations
        .par_iter()
        .map(|perm| {
            let part = cross_split(sample, perm, convention)?;
            let a = half_fit(&sample.part(&part.part_a), spec, "first half")?;
            let b = half_fit(&sample.part(&part.part_b), spec, "second half")?;
            Ok((a, b, part.descriptor))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut total = DVector::zeros(full.len());
    for (a, b, _) in &halves {
        total += split_corrected(full, a, b);
    }
    let corrected = total / halves.len() as f64;
    let names = sample.coefficient_names();
    let (half_estimates, partitions) = halves
        .into_iter()
        .map(|(a, b, d)| ((a, b), d))
        .unzip();
    Ok(CorrectionReport {
        names,
        raw: full.clone(),
        corrected,
        method: CorrectionMethod::Split {
            scheme: SplitScheme::CrossSection,
            convention,
            splits: permutations.len(),
        },
        bias_estimate: None,
        half_estimates,
        partitions,
    })
}

/// Split correction with one random split per sub-seed.
pub fn ab_split_correction(
    sample: &RegressionSample,
    full: &DVector<f64>,
    sub_seeds: &[u64],
    spec: AbSpec,
    convention: SplitConvention,
) -> Result<CorrectionReport> {
    let n = sample.n_units();
    if n < 4 {
        return Err(Error::TooFewUnits(n));
    }
    let perms: Vec<Vec<usize>> = sub_seeds.iter().map(|&s| random_permutation(n, s)).collect();
    ab_split_correction_with_permutations(sample, full, &perms, spec, convention)
}

/// Fit AB on the full sample and average `splits` random cross-section split corrections.
pub fn debias_ab_split(
    sample: &RegressionSample,
    splits: usize,
    seed: u64,
    spec: AbSpec,
    convention: SplitConvention,
) -> Result<CorrectionReport> {
    if splits == 0 {
        return Err(Error::InvalidConfig {
            field: "splits".into(),
            reason: "must be at least 1".into(),
        });
    }
    let (fit, _) = estimate_ab(sample, spec)?;
    let seeds: Vec<u64> = (0..splits).map(|r| split_seed(seed, r)).collect();
    ab_split_correction(sample, &fit.slopes(), &seeds, spec, convention)
}
