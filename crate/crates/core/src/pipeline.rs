//! End-to-end estimation: point estimates, corrections, long-run effects,
//! dimensions, the small-bias diagnostic and optional bootstrap SEs.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::ab::{ab_cluster_cov, estimate_ab, AbFit, AbSpec};
use crate::ab_debias::{ab_split_correction, split_seed};
use crate::correction::{CorrectionMethod, CorrectionReport};
use crate::error::{Error, Result};
use crate::fe::{fe_cluster_cov, fit_fe, FeFit};
use crate::fe_debias::{analytic_correction, split_correction, DEFAULT_TRIM};
use crate::inference::{cluster_bootstrap, long_run, long_run_block, small_bias_diagnostic, LongRunEffect, SmallBiasDiagnostic};
use crate::sample::{RegressionSample, SplitConvention};
use crate::seeds::derive_seed;

/// Stream index reserved for bootstrap draws, away from split sub-seeds.
const BOOTSTRAP_STREAM: u64 = 0xB007_5742;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    Fe,
    DfeA,
    DfeSs,
    Ab,
    /// Cross-section split AB; `None` takes the split count from the config.
    DabSs(Option<usize>),
}

impl Estimator {
    pub fn label(&self, config: &PipelineConfig) -> String {
        match self {
            Estimator::Fe => "FE".into(),
            Estimator::DfeA => "DFE-A".into(),
            Estimator::DfeSs => "DFE-SS".into(),
            Estimator::Ab => "AB".into(),
            Estimator::DabSs(k) => format!("DAB-SS{}", k.unwrap_or(config.splits)),
        }
    }

    fn splits(&self, config: &PipelineConfig) -> usize {
        match self {
            Estimator::DabSs(k) => k.unwrap_or(config.splits),
            _ => 0,
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Estimator::Fe => write!(f, "fe"),
            Estimator::DfeA => write!(f, "dfe-a"),
            Estimator::DfeSs => write!(f, "dfe-ss"),
            Estimator::Ab => write!(f, "ab"),
            Estimator::DabSs(None) => write!(f, "dab-ss"),
            Estimator::DabSs(Some(k)) => write!(f, "dab-ss{k}"),
        }
    }
}

impl std::str::FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let bad = || Error::InvalidConfig {
            field: "estimator".into(),
            reason: format!("unknown estimator `{s}` (expected fe, dfe-a, dfe-ss, ab, dab-ss or dab-ssK)"),
        };
        match lower.as_str() {
            "fe" => Ok(Estimator::Fe),
            "dfe-a" => Ok(Estimator::DfeA),
            "dfe-ss" => Ok(Estimator::DfeSs),
            "ab" => Ok(Estimator::Ab),
            "dab-ss" => Ok(Estimator::DabSs(None)),
            other => match other.strip_prefix("dab-ss").map(str::parse::<usize>) {
                Some(Ok(k)) if k >= 1 => Ok(Estimator::DabSs(Some(k))),
                _ => Err(bad()),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub trim: usize,
    pub splits: usize,
    pub convention: SplitConvention,
    pub ab: AbSpec,
    pub small_sample: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            trim: DEFAULT_TRIM,
            splits: 1,
            convention: SplitConvention::Paper,
            ab: AbSpec::default(),
            small_sample: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dimensions {
    pub n: usize,
    pub p: usize,
    pub m: usize,
}

/// Serializable view of a correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionSummary {
    pub method: CorrectionMethod,
    pub raw: Vec<f64>,
    pub bias_estimate: Option<Vec<f64>>,
    pub half_estimates: Vec<(Vec<f64>, Vec<f64>)>,
    pub partitions: Vec<String>,
}

impl From<&CorrectionReport> for CorrectionSummary {
    fn from(r: &CorrectionReport) -> Self {
        CorrectionSummary {
            method: r.method.clone(),
            raw: r.raw.as_slice().to_vec(),
            bias_estimate: r.bias_estimate.as_ref().map(|b| b.as_slice().to_vec()),
            half_estimates: r
                .half_estimates
                .iter()
                .map(|(a, b)| (a.as_slice().to_vec(), b.as_slice().to_vec()))
                .collect(),
            partitions: r.partitions.clone(),
        }
    }
}

/// One estimator's results on one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub label: String,
    pub estimator: Estimator,
    /// Coefficient names, treatments first then outcome lags.
    pub names: Vec<String>,
    /// Final (corrected where applicable) `(alpha, beta)`.
    pub coefficients: Vec<f64>,
    /// Clustered SEs. Debiased estimators reuse the uncorrected covariance.
    pub se_analytic: Vec<f64>,
    pub se_bootstrap: Option<Vec<f64>>,
    pub covariance: Vec<Vec<f64>>,
    /// Long-run effect of each treatment.
    pub long_run: Vec<LongRunEffect>,
    pub dims: Dimensions,
    pub diagnostic: SmallBiasDiagnostic,
    pub correction: Option<CorrectionSummary>,
    pub bootstrap_failures: Option<usize>,
    pub warnings: Vec<String>,
    pub d_alpha: usize,
}

impl Estimate {
    /// Quantities re-estimated in bootstrap replicates: coefficients, then long-run effects.
    pub fn quantities(&self) -> Vec<f64> {
        let mut q = self.coefficients.clone();
        q.extend(self.long_run.iter().map(|l| l.value));
        q
    }

    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        let k = self.covariance.len();
        DMatrix::from_fn(k, k, |r, c| self.covariance[r][c])
    }
}

/// Shared work across estimators on one sample.
struct Cache<'a> {
    sample: &'a RegressionSample,
    config: PipelineConfig,
    seed: u64,
    fe: Option<Result<FeFit>>,
    ab: Option<Result<AbFit>>,
    ab_cov: Option<Result<DMatrix<f64>>>,
    dab: Option<(usize, Result<CorrectionReport>)>,
}

impl<'a> Cache<'a> {
    fn fe(&mut self) -> Result<&FeFit> {
        let s = self.sample;
        self.fe.get_or_insert_with(|| fit_fe(s)).as_ref().map_err(Clone::clone)
    }

    fn ab(&mut self) -> Result<(&AbFit, &DMatrix<f64>)> {
        if self.ab.is_none() {
            match estimate_ab(self.sample, self.config.ab) {
                Ok((fit, w)) => {
                    self.ab_cov = Some(ab_cluster_cov(&fit, &w).map(|c| c.matrix));
                    self.ab = Some(Ok(fit));
                }
                Err(e) => self.ab = Some(Err(e)),
            }
        }
        let fit = self.ab.as_ref().unwrap().as_ref().map_err(Clone::clone)?;
        let cov = self.ab_cov.as_ref().unwrap().as_ref().map_err(Clone::clone)?;
        Ok((fit, cov))
    }

    /// Split corrections for the first `k` sub-seeds; a cached longer run is reused.
    fn dab(&mut self, k: usize) -> Result<CorrectionReport> {
        if k == 0 {
            return Err(Error::InvalidConfig { field: "splits".into(), reason: "must be at least 1".into() });
        }
        let have = self.dab.as_ref().map_or(0, |(n, _)| *n);
        if have < k {
            let full = self.ab()?.0.slopes();
            let seeds: Vec<u64> = (0..k).map(|r| split_seed(self.seed, r)).collect();
            let rep = ab_split_correction(self.sample, &full, &seeds, self.config.ab, self.config.convention);
            self.dab = Some((k, rep));
        }
        let rep = self.dab.as_ref().unwrap().1.as_ref().map_err(Clone::clone)?;
        Ok(truncate_splits(rep, k))
    }
}

/// The report that averaging only the first `k` splits would have produced.
pub fn truncate_splits(report: &CorrectionReport, k: usize) -> CorrectionReport {
    if report.half_estimates.len() == k {
        return report.clone();
    }
    let half_estimates = report.half_estimates[..k].to_vec();
    let mut total = DVector::zeros(report.raw.len());
    for (a, b) in &half_estimates {
        total += crate::correction::split_corrected(&report.raw, a, b);
    }
    let mut method = report.method.clone();
    if let CorrectionMethod::Split { splits, .. } = &mut method {
        *splits = k;
    }
    CorrectionReport {
        names: report.names.clone(),
        raw: report.raw.clone(),
        corrected: total / k as f64,
        method,
        bias_estimate: None,
        half_estimates,
        partitions: report.partitions[..k].to_vec(),
    }
}

fn assemble(
    sample: &RegressionSample,
    estimator: Estimator,
    config: &PipelineConfig,
    coefficients: DVector<f64>,
    cov: DMatrix<f64>,
    dims: Dimensions,
    correction: Option<&CorrectionReport>,
    mut warnings: Vec<String>,
) -> Result<Estimate> {
    let (d_alpha, n_lags) = (sample.d_alpha(), sample.n_lags());
    let beta = &coefficients.as_slice()[d_alpha..];
    let long_run = (0..d_alpha)
        .map(|j| long_run(coefficients[j], beta, Some(&long_run_block(&cov, j, d_alpha, n_lags))))
        .collect::<Result<Vec<_>>>()?;
    let diagnostic = small_bias_diagnostic(dims.n, dims.p, dims.m);
    if diagnostic.debias_recommended && matches!(estimator, Estimator::Fe | Estimator::Ab) {
        warnings.push(diagnostic.verdict.clone());
    }
    let k = cov.nrows();
    Ok(Estimate {
        label: estimator.label(config),
        estimator,
        names: sample.coefficient_names(),
        se_analytic: (0..k).map(|j| cov[(j, j)].max(0.0).sqrt()).collect(),
        coefficients: coefficients.as_slice().to_vec(),
        se_bootstrap: None,
        covariance: (0..k).map(|r| cov.row(r).iter().copied().collect()).collect(),
        long_run,
        dims,
        diagnostic,
        correction: correction.map(CorrectionSummary::from),
        bootstrap_failures: None,
        warnings,
        d_alpha,
    })
}

fn run_one(cache: &mut Cache<'_>, estimator: Estimator) -> Result<Estimate> {
    let sample = cache.sample;
    let config = cache.config;
    match estimator {
        Estimator::Fe | Estimator::DfeA | Estimator::DfeSs => {
            let fit = cache.fe()?.clone();
            let cov = fe_cluster_cov(&fit, config.small_sample)?.matrix;
            let dims = Dimensions { n: fit.n(), p: fit.param_count, m: 0 };
            let report = match estimator {
                Estimator::Fe => None,
                Estimator::DfeA => Some(analytic_correction(&fit, config.trim)?),
                _ => Some(split_correction(sample, &fit, config.convention)?),
            };
            let coef = report.as_ref().map_or_else(|| fit.coefficients.clone(), |r| r.corrected.clone());
            assemble(sample, estimator, &config, coef, cov, dims, report.as_ref(), Vec::new())
        }
        Estimator::Ab | Estimator::DabSs(_) => {
            let (fit, cov) = cache.ab()?;
            let (cov, dims, slopes) = (cov.clone(), Dimensions { n: fit.n, p: fit.p, m: fit.m }, fit.slopes());
            let mut warnings = Vec::new();
            if fit.weight_rank_deficient {
                warnings.push("one-step weight matrix is singular; a pseudo-inverse was used".into());
            }
            let report = match estimator {
                Estimator::Ab => None,
                _ => Some(cache.dab(estimator.splits(&config))?),
            };
            let coef = report.as_ref().map_or(slopes, |r| r.corrected.clone());
            assemble(sample, estimator, &config, coef, cov, dims, report.as_ref(), warnings)
        }
    }
}

/// Run several estimators on one sample, sharing the FE fit, the AB fit and
/// the random split halves between them.
pub fn estimate_all(
    sample: &RegressionSample,
    estimators: &[Estimator],
    config: &PipelineConfig,
    seed: u64,
) -> Vec<Result<Estimate>> {
    let mut cache = Cache { sample, config: *config, seed, fe: None, ab: None, ab_cov: None, dab: None };
    // the longest DAB run first, so shorter ones are prefixes of it
    if let Some(k) = estimators.iter().map(|e| e.splits(config)).max().filter(|&k| k > 0) {
        if estimators.iter().any(|e| matches!(e, Estimator::DabSs(_))) {
            let _ = cache.dab(k);
        }
    }
    estimators.iter().map(|&e| run_one(&mut cache, e)).collect()
}

pub fn estimate(sample: &RegressionSample, estimator: Estimator, config: &PipelineConfig, seed: u64) -> Result<Estimate> {
    estimate_all(sample, &[estimator], config, seed).pop().unwrap()
}

/// Attach cluster-bootstrap SEs to an estimate by rerunning the whole
/// pipeline (estimation, correction, long-run) on `replications` resamples.
pub fn bootstrap_estimate(
    sample: &RegressionSample,
    est: &mut Estimate,
    config: &PipelineConfig,
    replications: usize,
    seed: u64,
    parallel: bool,
) -> Result<()> {
    let estimator = est.estimator;
    let boot = cluster_bootstrap(
        sample,
        |s, proc_seed| estimate(s, estimator, config, proc_seed).map(|e| e.quantities()),
        replications,
        derive_seed(seed, BOOTSTRAP_STREAM),
        parallel,
    )?;
    let k = est.coefficients.len();
    est.se_bootstrap = Some(boot.std_errors[..k].to_vec());
    for (lr, se) in est.long_run.iter_mut().zip(&boot.std_errors[k..]) {
        lr.se_bootstrap = Some(*se);
    }
    est.bootstrap_failures = Some(boot.failures.len());
    if !boot.failures.is_empty() {
        est.warnings.push(format!("{} of {} bootstrap replicates failed and were excluded", boot.failures.len(), replications));
    }
    Ok(())
}
