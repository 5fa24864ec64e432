use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovarianceKind {
    Analytic,
    Bootstrap,
}

/// Covariance of the reported coefficients `(alpha, beta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    pub matrix: DMatrix<f64>,
    pub names: Vec<String>,
    pub kind: CovarianceKind,
    pub clusters: usize,
    /// Whether the `G/(G-1) * (n-1)/(n-p)` small-sample factor was applied.
    pub small_sample: bool,
}

impl CovarianceEstimate {
    pub fn std_errors(&self) -> Vec<f64> {
        (0..self.matrix.nrows())
            .map(|j| self.matrix[(j, j)].max(0.0).sqrt())
            .collect()
    }

    /// All eigenvalues at least `-tol * largest eigenvalue`.
    pub fn is_psd(&self, tol: f64) -> bool {
        let eig = ((&self.matrix + self.matrix.transpose()) * 0.5).symmetric_eigenvalues();
        let max = eig.iter().fold(0.0_f64, |m, v| m.max(*v));
        eig.iter().all(|&v| v >= -tol * max.max(f64::MIN_POSITIVE))
    }
}
