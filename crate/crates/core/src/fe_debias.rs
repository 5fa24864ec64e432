//! Analytical and half-panel bias corrections of the fixed-effects estimator.
//!
//! The analytical correction estimates the incidental-parameter bias from
//! trimmed cross products of future regressors with current residuals:
//!
//! ```text
//! H b = - sum_i sum_{t=1}^{T-1} sum_{s=t+1}^{min(t+M,T)} D_is e_it / (T - s + t)
//! H   = (1/NT) sum_i sum_t Dtilde_it Dtilde_it'
//! ```
//!
//! and subtracts `b / n`. `D` is the whole predetermined block (treatments and
//! outcome lags), so the lag coefficients are corrected jointly with `alpha`.

use nalgebra::{DMatrix, DVector};

use crate::correction::{split_corrected, CorrectionMethod, CorrectionReport};
use crate::error::{Error, Result};
use crate::fe::{fit_fe, FeFit};
use crate::sample::{time_split, RegressionSample, SplitConvention, SplitScheme};

pub const DEFAULT_TRIM: usize = 4;

/// Estimated first-order bias `b/n` of `(alpha, beta)`.
pub fn nickell_bias(fit: &FeFit, trim: usize) -> Result<DVector<f64>> {
    let (n_units, t) = (fit.n_units, fit.n_periods);
    if trim < 1 || trim >= t {
        return Err(Error::InvalidTrim { trim, periods: t });
    }
    let k = fit.coefficients.len();
    let nt = (n_units * t) as f64;

    let mut rhs = DVector::zeros(k);
    for i in 0..n_units {
        let base = i * t;
        // 0-based t0, s0; lag s0 - t0 = 1..=trim; divisor T - (s - t)
        for t0 in 0..t - 1 {
            let e = fit.residuals[base + t0];
            for s0 in t0 + 1..(t0 + trim + 1).min(t) {
                let w = e / (t - (s0 - t0)) as f64;
                for j in 0..k {
                    rhs[j] -= fit.regressors[(base + s0, j)] * w;
                }
            }
        }
    }

    let h: DMatrix<f64> = fit.dtilde.transpose() * &fit.dtilde / nt;
    let b = h.cholesky().ok_or(Error::SingularH)?.solve(&rhs);
    Ok(b / nt)
}

/// Analytical correction of an existing fit.
pub fn analytic_correction(fit: &FeFit, trim: usize) -> Result<CorrectionReport> {
    let bias = nickell_bias(fit, trim)?;
    Ok(CorrectionReport {
        names: fit.names.clone(),
        raw: fit.coefficients.clone(),
        corrected: &fit.coefficients - &bias,
        method: CorrectionMethod::Analytic { trim },
        bias_estimate: Some(bias),
        half_estimates: Vec::new(),
        partitions: Vec::new(),
    })
}

pub fn debias_fe_analytic(sample: &RegressionSample, trim: usize) -> Result<CorrectionReport> {
    analytic_correction(&fit_fe(sample)?, trim)
}

/// Half-panel correction of an existing full-sample fit. Each half refits its
/// own unit and time effects.
pub fn split_correction(
    sample: &RegressionSample,
    fit: &FeFit,
    convention: SplitConvention,
) -> Result<CorrectionReport> {
    let partition = time_split(sample, convention)?;
    let a = fit_fe(&sample.part(&partition.part_a))?.coefficients;
    let b = fit_fe(&sample.part(&partition.part_b))?.coefficients;
    Ok(CorrectionReport {
        names: fit.names.clone(),
        raw: fit.coefficients.clone(),
        corrected: split_corrected(&fit.coefficients, &a, &b),
        method: CorrectionMethod::Split {
            scheme: SplitScheme::Time,
            convention,
            splits: 1,
        },
        bias_estimate: None,
        half_estimates: vec![(a, b)],
        partitions: vec![partition.descriptor],
    })
}

pub fn debias_fe_split(
    sample: &RegressionSample,
    convention: SplitConvention,
) -> Result<CorrectionReport> {
    split_correction(sample, &fit_fe(sample)?, convention)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::BalancedPanel;
    use crate::sample::build_design;
    use std::collections::BTreeMap;

    fn toy_sample() -> RegressionSample {
        // 2 units, 5 periods, one outcome lag -> 4 effective periods
        let y = DMatrix::from_row_slice(2, 5, &[0.3, 1.1, 0.4, 1.9, 0.7, -0.2, 0.5, 1.4, 0.1, 0.9]);
        let d = DMatrix::from_row_slice(2, 5, &[0.0, 1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0]);
        let mut s = BTreeMap::new();
        s.insert("y".to_string(), y);
        s.insert("d".to_string(), d);
        let p = BalancedPanel::from_series(vec!["a".into(), "b".into()], vec![1, 2, 3, 4, 5], s).unwrap();
        build_design(&p, "y", &["d"], 1).unwrap()
    }

    /// Dense dummy-variable OLS residuals and the partialled-out regressors,
    /// computed without the within transformation.
    fn dense_oracle(s: &RegressionSample) -> (DVector<f64>, DMatrix<f64>) {
        let (n, k) = (s.n(), s.n_coefficients());
        let (nu, t) = (s.n_units(), s.n_periods());
        let q = nu + t - 1;
        let dummies = DMatrix::from_fn(n, q, |r, c| {
            let (i, tt) = (r / t, r % t);
            if c < nu {
                (i == c) as u8 as f64
            } else {
                (tt == c - nu + 1) as u8 as f64
            }
        });
        let x = s.predetermined();
        let full = DMatrix::from_fn(n, k + q, |r, c| if c < k { x[(r, c)] } else { dummies[(r, c - k)] });
        let svd = full.clone().svd(true, true);
        let coef = svd.solve(s.outcome(), 1e-12).unwrap();
        let resid = s.outcome() - &full * &coef;
        let svd_q = dummies.clone().svd(true, true);
        let proj = svd_q.solve(&x, 1e-12).unwrap();
        let dt = &x - &dummies * proj;
        (resid, dt)
    }

    #[test]
    fn bias_matches_brute_force_triple_sum() {
        let s = toy_sample();
        let fit = fit_fe(&s).unwrap();
        let (resid, dt) = dense_oracle(&s);
        let x = s.predetermined();
        let (nu, t, m) = (2usize, 4usize, 2usize);
        let mut rhs = DVector::zeros(2);
        for i in 0..nu {
            for tt in 1..t {
                // 1-based t, s
                for ss in tt + 1..=(tt + m).min(t) {
                    let r_s = i * t + (ss - 1);
                    let r_t = i * t + (tt - 1);
                    let w = (t - ss + tt) as f64;
                    for j in 0..2 {
                        rhs[j] -= x[(r_s, j)] * resid[r_t] / w;
                    }
                }
            }
        }
        let h = dt.transpose() * &dt / (nu * t) as f64;
        let b = h.try_inverse().unwrap() * rhs / (nu * t) as f64;
        let got = nickell_bias(&fit, m).unwrap();
        assert!((got - b).amax() < 1e-10);
    }

    #[test]
    fn trim_bounds() {
        let fit = fit_fe(&toy_sample()).unwrap();
        assert_eq!(nickell_bias(&fit, 0).unwrap_err().name(), "InvalidTrim");
        assert_eq!(nickell_bias(&fit, 4).unwrap_err().name(), "InvalidTrim");
        assert!(nickell_bias(&fit, 3).is_ok());
    }

    #[test]
    fn analytic_identity() {
        let rep = debias_fe_analytic(&toy_sample(), 2).unwrap();
        let bias = rep.bias_estimate.clone().unwrap();
        assert_eq!(rep.corrected, &rep.raw - &bias);
    }

    #[test]
    fn split_formula_arithmetic() {
        let full = DVector::from_vec(vec![1.0]);
        let a = DVector::from_vec(vec![1.3]);
        let b = DVector::from_vec(vec![1.1]);
        let c = split_corrected(&full, &a, &b);
        assert!((c[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn split_on_exact_data_returns_raw() {
        let d = DMatrix::from_fn(5, 9, |i, t| ((i * 3 + t * t) % 5) as f64);
        let y = DMatrix::from_fn(5, 9, |i, t| 2.0 * d[(i, t)] + i as f64 - 0.5 * t as f64);
        let mut s = BTreeMap::new();
        s.insert("y".to_string(), y);
        s.insert("d".to_string(), d);
        let p = BalancedPanel::from_series((0..5).map(|i| format!("u{i}")).collect(), (0..9).collect(), s).unwrap();
        let smp = build_design(&p, "y", &["d"], 0).unwrap();
        let rep = debias_fe_split(&smp, SplitConvention::Paper).unwrap();
        assert!((rep.corrected[0] - rep.raw[0]).abs() < 1e-12);
        assert!((rep.raw[0] - 2.0).abs() < 1e-12);
        assert_eq!(rep.half_estimates.len(), 1);
    }
}
