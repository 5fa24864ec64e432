//! Two-way fixed-effects (dummy-variable) OLS with unit-clustered covariance.
//!
//! The slopes are computed on the two-way demeaned system, which for a
//! balanced sample reproduces dummy-variable OLS exactly (Frisch-Waugh). The
//! dummy block therefore never has to be materialised.

use nalgebra::{DMatrix, DVector};

use crate::cov::{CovarianceEstimate, CovarianceKind};
use crate::error::{Error, Result};
use crate::linalg::{dependent_columns, two_way_demean, two_way_demean_matrix, two_way_effects, RANK_TOL};
use crate::sample::RegressionSample;

#[derive(Debug, Clone)]
pub struct FeFit {
    /// `(alpha, beta)` stacked.
    pub coefficients: DVector<f64>,
    pub names: Vec<String>,
    /// Unit effects `a_i`.
    pub unit_effects: Vec<f64>,
    /// Time effects `b_t`, normalised so the first effective period is zero.
    pub time_effects: Vec<f64>,
    pub residuals: DVector<f64>,
    /// Predetermined block `[D | lags]` with the dummies partialled out.
    pub dtilde: DMatrix<f64>,
    /// Raw predetermined block `[D | lags]`.
    pub regressors: DMatrix<f64>,
    /// `(dtilde' dtilde)^{-1}`.
    pub bread: DMatrix<f64>,
    pub n_units: usize,
    pub n_periods: usize,
    pub d_alpha: usize,
    pub param_count: usize,
}

impl FeFit {
    pub fn alpha(&self) -> &[f64] {
        &self.coefficients.as_slice()[..self.d_alpha]
    }

    pub fn beta(&self) -> &[f64] {
        &self.coefficients.as_slice()[self.d_alpha..]
    }

    pub fn n(&self) -> usize {
        self.residuals.len()
    }
}

pub fn fit_fe(sample: &RegressionSample) -> Result<FeFit> {
    let (n_units, n_periods) = (sample.n_units(), sample.n_periods());
    let regressors = sample.predetermined();
    let names = sample.coefficient_names();
    let dtilde = two_way_demean_matrix(&regressors, n_units, n_periods);
    let ytilde = DVector::from_vec(two_way_demean(
        sample.outcome().as_slice(),
        n_units,
        n_periods,
    ));

    let qr = dtilde.clone().qr();
    let r = qr.r();
    let sv = r.singular_values();
    let max = sv.max();
    if !(max > 0.0) || sv.min() <= RANK_TOL * max {
        let cols = if max > 0.0 {
            dependent_columns(&dtilde)
        } else {
            (0..names.len()).collect()
        };
        return Err(Error::RankDeficientDesign {
            columns: cols.into_iter().map(|j| names[j].clone()).collect(),
        });
    }
    let qty = qr.q().transpose() * &ytilde;
    let coefficients = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::RankDeficientDesign {
            columns: names.clone(),
        })?;
    let residuals = &ytilde - &dtilde * &coefficients;

    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(r.nrows(), r.ncols()))
        .ok_or(Error::SingularBread)?;
    let bread = &r_inv * r_inv.transpose();

    let partial = sample.outcome() - &regressors * &coefficients;
    let (unit_effects, time_effects) = two_way_effects(partial.as_slice(), n_units, n_periods);

    Ok(FeFit {
        coefficients,
        names,
        unit_effects,
        time_effects,
        residuals,
        dtilde,
        regressors,
        bread,
        n_units,
        n_periods,
        d_alpha: sample.d_alpha(),
        param_count: sample.param_count(),
    })
}

/// Unit-clustered sandwich covariance of `(alpha, beta)`.
///
/// With `small_sample` the result is scaled by `G/(G-1) * (n-1)/(n-p)`, `p`
/// counting all fixed-effects parameters.
pub fn fe_cluster_cov(fit: &FeFit, small_sample: bool) -> Result<CovarianceEstimate> {
    let g = fit.n_units;
    if g < 2 {
        return Err(Error::SingleCluster);
    }
    if fit.bread.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularBread);
    }
    let k = fit.coefficients.len();
    let t = fit.n_periods;
    let mut meat = DMatrix::zeros(k, k);
    let mut score = DVector::zeros(k);
    for i in 0..g {
        score.fill(0.0);
        for r in i * t..(i + 1) * t {
            let e = fit.residuals[r];
            for j in 0..k {
                score[j] += fit.dtilde[(r, j)] * e;
            }
        }
        meat.ger(1.0, &score, &score, 1.0);
    }
    let mut matrix = &fit.bread * meat * &fit.bread;
    matrix = (&matrix + matrix.transpose()) * 0.5;
    if small_sample {
        let n = fit.n() as f64;
        let p = fit.param_count as f64;
        let gf = g as f64;
        matrix *= gf / (gf - 1.0) * (n - 1.0) / (n - p);
    }
    Ok(CovarianceEstimate {
        matrix,
        names: fit.names.clone(),
        kind: CovarianceKind::Analytic,
        clusters: g,
        small_sample,
    })
}
