use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::sample::{SplitConvention, SplitScheme};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CorrectionMethod {
    Analytic {
        trim: usize,
    },
    Split {
        scheme: SplitScheme,
        convention: SplitConvention,
        splits: usize,
    },
}

/// Uncorrected and bias-corrected `(alpha, beta)` with the ingredients of the correction.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionReport {
    pub names: Vec<String>,
    pub raw: DVector<f64>,
    pub corrected: DVector<f64>,
    pub method: CorrectionMethod,
    /// Estimated first-order bias `b/n` (analytic correction only).
    pub bias_estimate: Option<DVector<f64>>,
    /// Half-sample estimates, one pair per split (split corrections only).
    pub half_estimates: Vec<(DVector<f64>, DVector<f64>)>,
    pub partitions: Vec<String>,
}

/// `2 * full - (a + b) / 2`.
pub fn split_corrected(full: &DVector<f64>, a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    full * 2.0 - (a + b) * 0.5
}
