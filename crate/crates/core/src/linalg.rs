//! Small dense linear-algebra helpers shared by the estimators.

use nalgebra::{DMatrix, DVector};

/// Relative singular-value / eigenvalue threshold for rank decisions.
pub const RANK_TOL: f64 = 1e-10;

/// Two-way within transformation of a unit-major `n_units x n_periods` column:
/// `x_it - xbar_i. - xbar_.t + xbar_..`. Exact for balanced panels.
pub fn two_way_demean(col: &[f64], n_units: usize, n_periods: usize) -> Vec<f64> {
    debug_assert_eq!(col.len(), n_units * n_periods);
    let mut unit_mean = vec![0.0; n_units];
    let mut time_mean = vec![0.0; n_periods];
    for i in 0..n_units {
        for t in 0..n_periods {
            let v = col[i * n_periods + t];
            unit_mean[i] += v;
            time_mean[t] += v;
        }
    }
    unit_mean.iter_mut().for_each(|m| *m /= n_periods as f64);
    time_mean.iter_mut().for_each(|m| *m /= n_units as f64);
    let grand = unit_mean.iter().sum::<f64>() / n_units as f64;
    let mut out = vec![0.0; col.len()];
    for i in 0..n_units {
        for t in 0..n_periods {
            let r = i * n_periods + t;
            out[r] = col[r] - unit_mean[i] - time_mean[t] + grand;
        }
    }
    out
}

pub fn two_way_demean_matrix(m: &DMatrix<f64>, n_units: usize, n_periods: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for j in 0..m.ncols() {
        let col: Vec<f64> = m.column(j).iter().copied().collect();
        out.set_column(j, &DVector::from_vec(two_way_demean(&col, n_units, n_periods)));
    }
    out
}

/// Unit and time effects `(a, b)` with `b_0 = 0` whose sums reproduce the
/// two-way projection of a unit-major column.
pub fn two_way_effects(col: &[f64], n_units: usize, n_periods: usize) -> (Vec<f64>, Vec<f64>) {
    let mut unit_mean = vec![0.0; n_units];
    let mut time_mean = vec![0.0; n_periods];
    for i in 0..n_units {
        for t in 0..n_periods {
            let v = col[i * n_periods + t];
            unit_mean[i] += v;
            time_mean[t] += v;
        }
    }
    unit_mean.iter_mut().for_each(|m| *m /= n_periods as f64);
    time_mean.iter_mut().for_each(|m| *m /= n_units as f64);
    let grand = unit_mean.iter().sum::<f64>() / n_units as f64;
    let a = unit_mean.iter().map(|m| m + time_mean[0] - grand).collect();
    let b = time_mean.iter().map(|m| m - time_mean[0]).collect();
    (a, b)
}

/// Indices of columns that are (numerically) linear combinations of earlier columns.
pub fn dependent_columns(x: &DMatrix<f64>) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::new();
    let mut dependent = Vec::new();
    for j in 0..x.ncols() {
        let mut trial = kept.clone();
        trial.push(j);
        let sub = x.select_columns(&trial);
        let sv = sub.singular_values();
        let max = sv.max();
        let min = sv.min();
        if max <= 0.0 || min <= RANK_TOL * max {
            dependent.push(j);
        } else {
            kept.push(j);
        }
    }
    dependent
}

/// Symmetric (pseudo-)inverse through the eigen decomposition. Eigenvalues
/// below `RANK_TOL * largest` are treated as zero. Returns the inverse and
/// whether any eigenvalue was dropped.
pub fn symmetric_pinv(a: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    let sym = (a + a.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let mut dropped = false;
    let inv_vals = eig.eigenvalues.map(|l| {
        if max > 0.0 && l > RANK_TOL * max {
            1.0 / l
        } else {
            dropped = true;
            0.0
        }
    });
    let v = &eig.eigenvectors;
    let scaled = DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] * inv_vals[j]);
    (&scaled * v.transpose(), dropped)
}

/// Smallest eigenvalue of a symmetric matrix relative to its largest (absolute) one.
pub fn min_eigen_ratio(a: &DMatrix<f64>) -> f64 {
    let eig = ((a + a.transpose()) * 0.5).symmetric_eigenvalues();
    let max = eig.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if max == 0.0 {
        return 0.0;
    }
    eig.min() / max
}
