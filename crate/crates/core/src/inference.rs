//! Long-run effects, delta-method standard errors, the cluster bootstrap and
//! the small-bias diagnostic.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::RegressionSample;
use crate::seeds::stream;

const UNIT_ROOT_TOL: f64 = 1e-8;

/// Permanent effect of a treatment in a model with outcome lags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongRunEffect {
    pub value: f64,
    /// Derivative with respect to `(alpha, beta_1..beta_L)`.
    pub gradient: Vec<f64>,
    pub se_analytic: Option<f64>,
    pub se_bootstrap: Option<f64>,
}

fn persistence_gap(beta: &[f64]) -> Result<f64> {
    let gap = 1.0 - beta.iter().sum::<f64>();
    if gap.abs() <= UNIT_ROOT_TOL {
        return Err(Error::UnitRootDenominator(beta.iter().sum()));
    }
    Ok(gap)
}

/// `alpha / (1 - sum(beta))`.
pub fn long_run_effect(alpha: f64, beta: &[f64]) -> Result<f64> {
    Ok(alpha / persistence_gap(beta)?)
}

pub fn long_run_gradient(alpha: f64, beta: &[f64]) -> Result<Vec<f64>> {
    let gap = persistence_gap(beta)?;
    let mut g = vec![1.0 / gap];
    g.extend(std::iter::repeat_n(alpha / (gap * gap), beta.len()));
    Ok(g)
}

/// Delta-method SE of the long-run effect. `cov` is the joint covariance of
/// `(alpha, beta_1..beta_L)` in that order.
pub fn delta_method_lr(alpha: f64, beta: &[f64], cov: &DMatrix<f64>) -> Result<f64> {
    let k = 1 + beta.len();
    if cov.nrows() != k || cov.ncols() != k {
        return Err(Error::InvalidConfig {
            field: "cov".into(),
            reason: format!("expected {k}x{k}, got {}x{}", cov.nrows(), cov.ncols()),
        });
    }
    let g = DVector::from_vec(long_run_gradient(alpha, beta)?);
    let var = (g.transpose() * cov * &g)[(0, 0)];
    if var < 0.0 {
        return Err(Error::NegativeVariance(var));
    }
    Ok(var.sqrt())
}

/// Sub-block of a coefficient covariance for treatment `j` and all lags,
/// given `d_alpha` treatments ahead of the lags.
pub fn long_run_block(cov: &DMatrix<f64>, j: usize, d_alpha: usize, n_lags: usize) -> DMatrix<f64> {
    let idx: Vec<usize> = std::iter::once(j).chain(d_alpha..d_alpha + n_lags).collect();
    DMatrix::from_fn(idx.len(), idx.len(), |r, c| cov[(idx[r], idx[c])])
}

pub fn long_run(alpha: f64, beta: &[f64], cov: Option<&DMatrix<f64>>) -> Result<LongRunEffect> {
    Ok(LongRunEffect {
        value: long_run_effect(alpha, beta)?,
        gradient: long_run_gradient(alpha, beta)?,
        se_analytic: cov.map(|v| delta_method_lr(alpha, beta, v)).transpose()?,
        se_bootstrap: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallBiasDiagnostic {
    pub n: usize,
    pub p: usize,
    pub m: usize,
    pub ratio: f64,
    pub debias_recommended: bool,
    pub verdict: String,
}

/// `max(p, m)^2 / n`, flagged when at least one.
pub fn small_bias_diagnostic(n: usize, p: usize, m: usize) -> SmallBiasDiagnostic {
    let k = p.max(m) as f64;
    let ratio = k * k / n.max(1) as f64;
    let flagged = ratio >= 1.0;
    let verdict = if flagged {
        format!("(p v m)^2/n = {ratio:.3}: debiasing recommended")
    } else {
        format!("(p v m)^2/n = {ratio:.3}: small-bias condition plausible")
    };
    SmallBiasDiagnostic { n, p, m, ratio, debias_recommended: flagged, verdict }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapResult {
    /// One entry per replicate in index order; `None` marks a failed replicate.
    pub replicates: Vec<Option<Vec<f64>>>,
    pub failures: Vec<(usize, String)>,
    pub std_errors: Vec<f64>,
}

impl BootstrapResult {
    pub fn successful(&self) -> usize {
        self.replicates.iter().filter(|r| r.is_some()).count()
    }
}

/// Unit indices and procedure seed for replicate `b`.
pub fn bootstrap_draw(seed: u64, b: usize, n_units: usize) -> (Vec<usize>, u64) {
    let mut rng = stream(seed, b as u64);
    let units = (0..n_units).map(|_| rng.random_range(0..n_units)).collect();
    (units, rng.next_u64())
}

/// Pairs bootstrap over units. `procedure` receives the resampled sample
/// (every drawn copy gets its own unit identity) and a per-replicate seed,
/// and returns the quantities whose SEs are wanted.
pub fn cluster_bootstrap<F>(
    sample: &RegressionSample,
    procedure: F,
    replications: usize,
    seed: u64,
    parallel: bool,
) -> Result<BootstrapResult>
where
    F: Fn(&RegressionSample, u64) -> Result<Vec<f64>> + Sync,
{
    if replications < 2 {
        return Err(Error::InvalidConfig {
            field: "boot".into(),
            reason: format!("need at least 2 replications, got {replications}"),
        });
    }
    let n_units = sample.n_units();
    let periods = 0..sample.n_periods();
    let run = |b: usize| {
        let (units, proc_seed) = bootstrap_draw(seed, b, n_units);
        procedure(&sample.subsample(&units, periods.clone(), true), proc_seed)
    };
    let outcomes: Vec<Result<Vec<f64>>> = if parallel {
        (0..replications).into_par_iter().map(run).collect()
    } else {
        (0..replications).map(run).collect()
    };

    let mut replicates = Vec::with_capacity(replications);
    let mut failures = Vec::new();
    for (b, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(v) if v.iter().all(|x| x.is_finite()) => replicates.push(Some(v)),
            Ok(_) => {
                failures.push((b, "non-finite estimate".to_string()));
                replicates.push(None);
            }
            Err(e) => {
                failures.push((b, e.name().to_string()));
                replicates.push(None);
            }
        }
    }
    if failures.len() * 10 > replications {
        return Err(Error::TooManyFailedReplicates { failed: failures.len(), total: replications });
    }
    let ok: Vec<&Vec<f64>> = replicates.iter().flatten().collect();
    if ok.len() < 2 {
        return Err(Error::TooManyFailedReplicates { failed: failures.len(), total: replications });
    }
    let k = ok[0].len();
    let std_errors = (0..k)
        .map(|j| sample_sd(ok.iter().map(|v| v[j])))
        .collect();
    Ok(BootstrapResult { replicates, failures, std_errors })
}

/// Standard deviation with the `n - 1` divisor, accumulated in input order.
pub fn sample_sd(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count();
    if n < 2 {
        return 0.0;
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    (ss / (n - 1) as f64).sqrt()
}
