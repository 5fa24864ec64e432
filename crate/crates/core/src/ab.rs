//! One-step Arellano-Bond difference GMM.
//!
//! The model is first-differenced,
//! `dY_it = dD_it'alpha + dW_it'beta + delta_t + de_it`, for effective periods
//! `t = 2..T`, and estimated with the moment conditions
//! `E[Z_it de_it] = 0`. Instruments are laid out block-diagonally: every
//! differenced equation owns its own columns, holding predetermined levels of
//! the treatments and outcome plus that equation's time dummy.
//!
//! The one-step weight is `(sum_i Z_i' H Z_i)^{-1}` with `H` the tridiagonal
//! covariance of differenced white noise. Because the instrument blocks are
//! equation-specific, `sum_i Z_i' H Z_i` is block tridiagonal and is
//! assembled block by block.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::cov::{CovarianceEstimate, CovarianceKind};
use crate::error::{Error, Result};
use crate::linalg::{min_eigen_ratio, symmetric_pinv, RANK_TOL};
use crate::sample::RegressionSample;

/// Which level periods are admissible instruments for a differenced equation.
///
/// All windows respect predeterminedness (treatments dated `s <= t-1`, outcome
/// levels dated `s <= t-2`); they differ in how far back they reach.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstrumentWindow {
    /// Treatments from effective periods `1..t-1`; outcome levels contained in
    /// the lag vectors `W_is` for `s = 1..t-1`, which reach back into the
    /// initial conditions.
    #[default]
    Model,
    /// Treatments and outcome levels from effective periods only.
    Effective,
    /// Every available level in the data, initial conditions included.
    All,
}

impl std::str::FromStr for InstrumentWindow {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "model" => Ok(InstrumentWindow::Model),
            "effective" => Ok(InstrumentWindow::Effective),
            "all" => Ok(InstrumentWindow::All),
            other => Err(Error::InvalidConfig {
                field: "instrument-window".into(),
                reason: format!("expected `model`, `effective` or `all`, got `{other}`"),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InstrumentSource {
    Treatment { index: usize, period: i64 },
    Outcome { period: i64 },
    TimeDummy,
}

/// One instrument column: the differenced equation it belongs to (effective
/// period label) and what it holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstrumentColumn {
    pub equation: i64,
    pub source: InstrumentSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Source {
    Treatment(usize, usize),
    Outcome(usize),
    Constant,
}

#[derive(Debug, Clone, PartialEq)]
struct Block {
    offset: usize,
    sources: Vec<Source>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstrumentSet {
    pub columns: Vec<InstrumentColumn>,
    pub lag_cap: Option<usize>,
    pub window: InstrumentWindow,
    blocks: Vec<Block>,
}

impl InstrumentSet {
    /// Total number of moment conditions `m`.
    pub fn m(&self) -> usize {
        self.columns.len()
    }

    pub fn n_equations(&self) -> usize {
        self.blocks.len()
    }

    /// Columns belonging to differenced equation `e` (0-based, equation for effective period `e + 2`).
    pub fn equation_columns(&self, e: usize) -> &[InstrumentColumn] {
        let b = &self.blocks[e];
        &self.columns[b.offset..b.offset + b.sources.len()]
    }
}

fn capped(lo: usize, hi_inclusive: Option<usize>, cap: Option<usize>) -> Vec<usize> {
    match hi_inclusive {
        Some(hi) if hi >= lo => {
            let lo = match cap {
                Some(k) => lo.max((hi + 1).saturating_sub(k)),
                None => lo,
            };
            (lo..=hi).collect()
        }
        _ => Vec::new(),
    }
}

pub fn build_instruments(
    sample: &RegressionSample,
    lag_cap: Option<usize>,
    window: InstrumentWindow,
) -> Result<InstrumentSet> {
    let t_eff = sample.n_periods();
    if t_eff < 2 {
        return Err(Error::NoValidInstruments);
    }
    if lag_cap == Some(0) {
        return Err(Error::InvalidConfig {
            field: "lag-cap".into(),
            reason: "must be at least 1".into(),
        });
    }
    let f = sample.first_effective();
    let l = sample.n_lags();
    let periods = sample.history_periods();

    let mut columns = Vec::new();
    let mut blocks = Vec::with_capacity(t_eff - 1);
    let mut informative = false;
    for t in 1..t_eff {
        let offset = columns.len();
        let mut sources = Vec::new();
        let d_lo = match window {
            InstrumentWindow::All => 0,
            _ => f,
        };
        let d_periods = capped(d_lo, Some(f + t - 1), lag_cap);
        for j in 0..sample.d_alpha() {
            for &c in &d_periods {
                sources.push(Source::Treatment(j, c));
            }
        }
        if l > 0 {
            let y_lo = match window {
                InstrumentWindow::Model => f - l,
                InstrumentWindow::Effective => f,
                InstrumentWindow::All => 0,
            };
            let y_hi = (f + t).checked_sub(2);
            for c in capped(y_lo, y_hi, lag_cap) {
                sources.push(Source::Outcome(c));
            }
        }
        informative |= !sources.is_empty();
        sources.push(Source::Constant);
        let equation = periods[f + t];
        for s in &sources {
            columns.push(InstrumentColumn {
                equation,
                source: match *s {
                    Source::Treatment(j, c) => InstrumentSource::Treatment {
                        index: j,
                        period: periods[c],
                    },
                    Source::Outcome(c) => InstrumentSource::Outcome { period: periods[c] },
                    Source::Constant => InstrumentSource::TimeDummy,
                },
            });
        }
        blocks.push(Block { offset, sources });
    }
    if !informative {
        return Err(Error::NoValidInstruments);
    }
    Ok(InstrumentSet {
        columns,
        lag_cap,
        window,
        blocks,
    })
}

/// The first-differenced system of a sample, arranged by equation.
#[derive(Debug, Clone)]
pub struct DifferencedSystem {
    /// Per equation: instrument values, `N x k_e`.
    z: Vec<DMatrix<f64>>,
    /// Per equation: differenced regressors, `N x p`.
    x: Vec<DMatrix<f64>>,
    /// Per equation: differenced outcome, `N`.
    y: Vec<DVector<f64>>,
    offsets: Vec<usize>,
    m: usize,
    p: usize,
    n_units: usize,
    d_alpha: usize,
    n_lags: usize,
    names: Vec<String>,
}

impl DifferencedSystem {
    pub fn new(sample: &RegressionSample, instruments: &InstrumentSet) -> Self {
        let n_units = sample.n_units();
        let f = sample.first_effective();
        let (da, l) = (sample.d_alpha(), sample.n_lags());
        let n_eq = instruments.n_equations();
        let p = da + l + n_eq;
        let yh = sample.outcome_history();
        let mut z = Vec::with_capacity(n_eq);
        let mut x = Vec::with_capacity(n_eq);
        let mut y = Vec::with_capacity(n_eq);
        let mut offsets = Vec::with_capacity(n_eq);
        for (e, block) in instruments.blocks.iter().enumerate() {
            let c = f + e + 1;
            offsets.push(block.offset);
            z.push(DMatrix::from_fn(n_units, block.sources.len(), |i, k| {
                match block.sources[k] {
                    Source::Treatment(j, col) => sample.treatment_history(j)[(i, col)],
                    Source::Outcome(col) => yh[(i, col)],
                    Source::Constant => 1.0,
                }
            }));
            x.push(DMatrix::from_fn(n_units, p, |i, k| {
                if k < da {
                    let dh = sample.treatment_history(k);
                    dh[(i, c)] - dh[(i, c - 1)]
                } else if k < da + l {
                    let j = k - da + 1;
                    yh[(i, c - j)] - yh[(i, c - j - 1)]
                } else {
                    (k - da - l == e) as u8 as f64
                }
            }));
            y.push(DVector::from_fn(n_units, |i, _| yh[(i, c)] - yh[(i, c - 1)]));
        }
        let mut names = sample.coefficient_names();
        names.extend(sample.periods()[1..].iter().map(|t| format!("dT{t}")));
        DifferencedSystem {
            z,
            x,
            y,
            offsets,
            m: instruments.m(),
            p,
            n_units,
            d_alpha: da,
            n_lags: l,
            names,
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of differenced observations `N * (T - 1)`.
    pub fn n(&self) -> usize {
        self.n_units * self.z.len()
    }

    pub fn n_units(&self) -> usize {
        self.n_units
    }

    /// `sum_i Z_i' H Z_i`.
    pub fn h_gram(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.m, self.m);
        for e in 0..self.z.len() {
            let (oe, ke) = (self.offsets[e], self.z[e].ncols());
            let diag = self.z[e].transpose() * &self.z[e] * 2.0;
            a.view_mut((oe, oe), (ke, ke)).copy_from(&diag);
            if e + 1 < self.z.len() {
                let (of, kf) = (self.offsets[e + 1], self.z[e + 1].ncols());
                let off = self.z[e].transpose() * &self.z[e + 1] * -1.0;
                a.view_mut((oe, of), (ke, kf)).copy_from(&off);
                a.view_mut((of, oe), (kf, ke)).copy_from(&off.transpose());
            }
        }
        a
    }

    /// `Z'X` (`m x p`) and `Z'y` (`m`).
    pub fn cross_moments(&self) -> (DMatrix<f64>, DVector<f64>) {
        let mut zx = DMatrix::zeros(self.m, self.p);
        let mut zy = DVector::zeros(self.m);
        for e in 0..self.z.len() {
            let (o, k) = (self.offsets[e], self.z[e].ncols());
            let zt = self.z[e].transpose();
            zx.view_mut((o, 0), (k, self.p)).copy_from(&(&zt * &self.x[e]));
            zy.rows_mut(o, k).copy_from(&(&zt * &self.y[e]));
        }
        (zx, zy)
    }

    /// Differenced residuals `dy - dx theta`, unit-major (`i * (T-1) + e`).
    pub fn residuals(&self, theta: &DVector<f64>) -> DVector<f64> {
        let n_eq = self.z.len();
        let mut out = DVector::zeros(self.n());
        for e in 0..n_eq {
            let r = &self.y[e] - &self.x[e] * theta;
            for i in 0..self.n_units {
                out[i * n_eq + e] = r[i];
            }
        }
        out
    }

    /// Per-unit scores `Z_i' de_i` as columns of an `m x N` matrix.
    pub fn unit_scores(&self, residuals: &DVector<f64>) -> DMatrix<f64> {
        let n_eq = self.z.len();
        let mut s = DMatrix::zeros(self.m, self.n_units);
        for e in 0..n_eq {
            let o = self.offsets[e];
            for i in 0..self.n_units {
                let r = residuals[i * n_eq + e];
                for k in 0..self.z[e].ncols() {
                    s[(o + k, i)] += self.z[e][(i, k)] * r;
                }
            }
        }
        s
    }

    /// Dense instrument matrix of unit `i`, `(T-1) x m`.
    pub fn unit_instruments(&self, i: usize) -> DMatrix<f64> {
        let mut z = DMatrix::zeros(self.z.len(), self.m);
        for e in 0..self.z.len() {
            for k in 0..self.z[e].ncols() {
                z[(e, self.offsets[e] + k)] = self.z[e][(i, k)];
            }
        }
        z
    }

    /// Differenced regressors of unit `i`, `(T-1) x p`.
    pub fn unit_regressors(&self, i: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.z.len(), self.p, |e, k| self.x[e][(i, k)])
    }

    /// Differenced outcome of unit `i`.
    pub fn unit_outcome(&self, i: usize) -> DVector<f64> {
        DVector::from_fn(self.z.len(), |e, _| self.y[e][i])
    }

    /// OLS on the differenced equations.
    pub fn ols(&self) -> Result<DVector<f64>> {
        let mut xtx = DMatrix::zeros(self.p, self.p);
        let mut xty = DVector::zeros(self.p);
        for e in 0..self.z.len() {
            xtx += self.x[e].transpose() * &self.x[e];
            xty += self.x[e].transpose() * &self.y[e];
        }
        Ok(xtx.cholesky().ok_or(Error::SingularGmmGram)?.solve(&xty))
    }

    /// GMM criterion `gbar' W gbar` with `gbar = (Z'y - Z'X theta) / n`.
    pub fn objective(&self, theta: &DVector<f64>, weight: &GmmWeight) -> f64 {
        let (zx, zy) = self.cross_moments();
        let g = (zy - zx * theta) / self.n() as f64;
        let wg = weight.apply(&DMatrix::from_column_slice(g.len(), 1, g.as_slice()));
        g.dot(&wg.column(0))
    }
}

#[derive(Debug, Clone)]
enum WeightKind {
    Cholesky(Cholesky<f64, Dyn>),
    Dense(DMatrix<f64>),
}

/// A positive semidefinite GMM weight matrix, stored factored when possible.
#[derive(Debug, Clone)]
pub struct GmmWeight {
    kind: WeightKind,
    scale: f64,
    m: usize,
    /// Set when the one-step Gram was singular and a pseudo-inverse was used.
    pub rank_deficient: bool,
}

impl GmmWeight {
    pub fn identity(m: usize) -> Self {
        GmmWeight::from_matrix(DMatrix::identity(m, m))
    }

    pub fn from_matrix(w: DMatrix<f64>) -> Self {
        let m = w.nrows();
        GmmWeight {
            kind: WeightKind::Dense(w),
            scale: 1.0,
            m,
            rank_deficient: false,
        }
    }

    /// Weight `c * W`.
    pub fn scaled(&self, c: f64) -> Self {
        GmmWeight {
            scale: self.scale * c,
            ..self.clone()
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// `W * b`.
    pub fn apply(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let out = match &self.kind {
            WeightKind::Cholesky(ch) => ch.solve(b),
            WeightKind::Dense(w) => w * b,
        };
        out * self.scale
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match &self.kind {
            WeightKind::Cholesky(ch) => ch.inverse() * self.scale,
            WeightKind::Dense(w) => w * self.scale,
        }
    }
}

/// Weight built from `sum_i Z_i' H Z_i`; spectral pseudo-inverse when that is singular.
pub fn weight_from_h_gram(a: DMatrix<f64>) -> Result<GmmWeight> {
    let m = a.nrows();
    let max_diag = a.diagonal().iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if max_diag == 0.0 {
        return Err(Error::ZeroWeightMatrix);
    }
    if let Some(ch) = a.clone().cholesky() {
        let min_pivot = ch.l_dirty().diagonal().iter().fold(f64::INFINITY, |acc, v| acc.min(v * v));
        if min_pivot > RANK_TOL * max_diag {
            return Ok(GmmWeight {
                kind: WeightKind::Cholesky(ch),
                scale: 1.0,
                m,
                rank_deficient: false,
            });
        }
    }
    let (pinv, _) = symmetric_pinv(&a);
    Ok(GmmWeight {
        kind: WeightKind::Dense(pinv),
        scale: 1.0,
        m,
        rank_deficient: true,
    })
}

/// One-step weight `(sum_i Z_i' H Z_i)^{-1}`.
pub fn one_step_weight(instruments: &InstrumentSet, sample: &RegressionSample) -> Result<GmmWeight> {
    weight_from_h_gram(DifferencedSystem::new(sample, instruments).h_gram())
}

/// Linear GMM closed form `(X'Z W Z'X)^{-1} X'Z W Z'y` from the cross moments.
/// Also returns `W Z'X` for the sandwich.
pub fn linear_gmm(
    zx: &DMatrix<f64>,
    zy: &DVector<f64>,
    weight: &GmmWeight,
) -> Result<(DVector<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let (m, p) = zx.shape();
    if m < p {
        return Err(Error::OrderConditionFailed { moments: m, params: p });
    }
    let mut rhs = DMatrix::zeros(m, p + 1);
    rhs.view_mut((0, 0), (m, p)).copy_from(zx);
    rhs.set_column(p, zy);
    let w_rhs = weight.apply(&rhs);
    let wzx = w_rhs.columns(0, p).into_owned();
    let gram = zx.transpose() * &wzx;
    let gram = (&gram + gram.transpose()) * 0.5;
    if !(min_eigen_ratio(&gram) > RANK_TOL) {
        return Err(Error::SingularGmmGram);
    }
    let ch = gram.clone().cholesky().ok_or(Error::SingularGmmGram)?;
    let theta = ch.solve(&(zx.transpose() * w_rhs.column(p)));
    Ok((theta, ch.inverse(), wzx))
}

#[derive(Debug, Clone)]
pub struct AbFit {
    /// `(alpha, beta, time effects)`.
    pub coefficients: DVector<f64>,
    pub names: Vec<String>,
    /// Differenced residuals, unit-major.
    pub residuals: DVector<f64>,
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub n_units: usize,
    pub d_alpha: usize,
    pub n_lags: usize,
    pub weight_rank_deficient: bool,
    zx: DMatrix<f64>,
    gram_inv: DMatrix<f64>,
    scores: DMatrix<f64>,
}

impl AbFit {
    pub fn alpha(&self) -> &[f64] {
        &self.coefficients.as_slice()[..self.d_alpha]
    }

    pub fn beta(&self) -> &[f64] {
        &self.coefficients.as_slice()[self.d_alpha..self.d_alpha + self.n_lags]
    }

    /// `(alpha, beta)` without the time effects.
    pub fn slopes(&self) -> DVector<f64> {
        self.coefficients.rows(0, self.d_alpha + self.n_lags).into_owned()
    }

    pub fn slope_names(&self) -> Vec<String> {
        self.names[..self.d_alpha + self.n_lags].to_vec()
    }
}

pub fn fit_ab_system(system: &DifferencedSystem, weight: &GmmWeight) -> Result<AbFit> {
    if weight.m() != system.m() {
        return Err(Error::InvalidConfig {
            field: "weight".into(),
            reason: format!("weight is {0}x{0}, instruments have {1} columns", weight.m(), system.m()),
        });
    }
    let (zx, zy) = system.cross_moments();
    let (theta, gram_inv, _) = linear_gmm(&zx, &zy, weight)?;
    let residuals = system.residuals(&theta);
    let scores = system.unit_scores(&residuals);
    Ok(AbFit {
        coefficients: theta,
        names: system.names.clone(),
        residuals,
        n: system.n(),
        m: system.m(),
        p: system.p(),
        n_units: system.n_units,
        d_alpha: system.d_alpha,
        n_lags: system.n_lags,
        weight_rank_deficient: weight.rank_deficient,
        zx,
        gram_inv,
        scores,
    })
}

pub fn fit_ab(sample: &RegressionSample, instruments: &InstrumentSet, weight: &GmmWeight) -> Result<AbFit> {
    fit_ab_system(&DifferencedSystem::new(sample, instruments), weight)
}

/// Instrument specification shared by full-sample and half-sample fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AbSpec {
    pub lag_cap: Option<usize>,
    pub window: InstrumentWindow,
}

/// Instruments, one-step weight and fit in one call.
pub fn estimate_ab(sample: &RegressionSample, spec: AbSpec) -> Result<(AbFit, GmmWeight)> {
    let instruments = build_instruments(sample, spec.lag_cap, spec.window)?;
    let system = DifferencedSystem::new(sample, &instruments);
    if system.m() < system.p() {
        return Err(Error::OrderConditionFailed {
            moments: system.m(),
            params: system.p(),
        });
    }
    let weight = weight_from_h_gram(system.h_gram())?;
    let fit = fit_ab_system(&system, &weight)?;
    Ok((fit, weight))
}

/// Unit-clustered GMM sandwich for `(alpha, beta)`:
/// `A [sum_i Z_i' de_i de_i' Z_i] A'` with `A = (X'Z W Z'X)^{-1} X'Z W`.
pub fn ab_cluster_cov(fit: &AbFit, weight: &GmmWeight) -> Result<CovarianceEstimate> {
    if fit.n_units < 2 {
        return Err(Error::SingleCluster);
    }
    let wzx = weight.apply(&fit.zx);
    let a = &fit.gram_inv * wzx.transpose();
    let projected = &a * &fit.scores;
    let full = &projected * projected.transpose();
    let k = fit.d_alpha + fit.n_lags;
    let block = full.view((0, 0), (k, k)).into_owned();
    Ok(CovarianceEstimate {
        matrix: (&block + block.transpose()) * 0.5,
        names: fit.slope_names(),
        kind: CovarianceKind::Analytic,
        clusters: fit.n_units,
        small_sample: false,
    })
}
