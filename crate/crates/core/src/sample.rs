//! Estimation-ready samples and the two split-sample partition schemes.
//!
//! A [`RegressionSample`] is always rectangular: `N` units observed over the
//! same `T` effective periods, rows ordered unit-major (`row = i * T + t`).
//! The sample also keeps the level history of the outcome and treatments
//! *before* the first effective period, which is where lagged regressors and
//! the Arellano-Bond instruments come from. Sub-samples inherit that history,
//! so lagged values inside a half panel are the original data values.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::BalancedPanel;

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionSample {
    outcome_name: String,
    treatment_names: Vec<String>,
    n_lags: usize,
    units: Vec<String>,
    history_periods: Vec<i64>,
    first: usize,
    y_hist: DMatrix<f64>,
    d_hist: Vec<DMatrix<f64>>,
    outcome: DVector<f64>,
    treatments: DMatrix<f64>,
    lags: DMatrix<f64>,
}

/// Build the design for `Y_it = a_i + b_t + D_it'alpha + sum_j beta_j Y_i,t-j + e_it`.
///
/// The first `n_lags` periods serve as initial conditions; effective periods are
/// the remaining `T - n_lags`.
pub fn build_design(
    panel: &BalancedPanel,
    outcome: &str,
    treatments: &[&str],
    n_lags: usize,
) -> Result<RegressionSample> {
    let t = panel.n_periods();
    if n_lags >= t {
        return Err(Error::TooFewPeriods {
            periods: t,
            lags: n_lags,
        });
    }
    if treatments.is_empty() && n_lags == 0 {
        return Err(Error::InvalidConfig {
            field: "design".into(),
            reason: "need at least one treatment or one outcome lag".into(),
        });
    }
    let y_hist = panel.series(outcome)?.clone();
    let d_hist = treatments
        .iter()
        .map(|d| panel.series(d).cloned())
        .collect::<Result<Vec<_>>>()?;
    Ok(RegressionSample::assemble(
        outcome.to_string(),
        treatments.iter().map(|s| s.to_string()).collect(),
        n_lags,
        panel.units().to_vec(),
        panel.periods().to_vec(),
        n_lags,
        y_hist,
        d_hist,
    ))
}

impl RegressionSample {
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        outcome_name: String,
        treatment_names: Vec<String>,
        n_lags: usize,
        units: Vec<String>,
        history_periods: Vec<i64>,
        first: usize,
        y_hist: DMatrix<f64>,
        d_hist: Vec<DMatrix<f64>>,
    ) -> Self {
        debug_assert!(first >= n_lags);
        let n_units = units.len();
        let t_eff = history_periods.len() - first;
        let n = n_units * t_eff;
        let outcome = DVector::from_fn(n, |r, _| y_hist[(r / t_eff, first + r % t_eff)]);
        let treatments = DMatrix::from_fn(n, d_hist.len(), |r, j| {
            d_hist[j][(r / t_eff, first + r % t_eff)]
        });
        let lags = DMatrix::from_fn(n, n_lags, |r, j| {
            y_hist[(r / t_eff, first + r % t_eff - (j + 1))]
        });
        RegressionSample {
            outcome_name,
            treatment_names,
            n_lags,
            units,
            history_periods,
            first,
            y_hist,
            d_hist,
            outcome,
            treatments,
            lags,
        }
    }

    /// Number of rows `n = N * T`.
    pub fn n(&self) -> usize {
        self.outcome.len()
    }

    pub fn n_units(&self) -> usize {
        self.units.len()
    }

    /// Number of effective periods.
    pub fn n_periods(&self) -> usize {
        self.history_periods.len() - self.first
    }

    pub fn d_alpha(&self) -> usize {
        self.treatment_names.len()
    }

    pub fn n_lags(&self) -> usize {
        self.n_lags
    }

    /// Number of reported coefficients `d_alpha + L`.
    pub fn n_coefficients(&self) -> usize {
        self.d_alpha() + self.n_lags
    }

    /// Fixed-effects parameter count: slopes, unit dummies and the retained
    /// time dummies (the first effective period's dummy is dropped).
    pub fn param_count(&self) -> usize {
        self.n_coefficients() + self.n_units() + self.n_periods() - 1
    }

    pub fn units(&self) -> &[String] {
        &self.units
    }

    /// Labels of the effective periods.
    pub fn periods(&self) -> &[i64] {
        &self.history_periods[self.first..]
    }

    pub fn outcome_name(&self) -> &str {
        &self.outcome_name
    }

    pub fn treatment_names(&self) -> &[String] {
        &self.treatment_names
    }

    /// Coefficient labels in `(alpha, beta)` order.
    pub fn coefficient_names(&self) -> Vec<String> {
        self.treatment_names
            .iter()
            .cloned()
            .chain((1..=self.n_lags).map(|j| format!("L{j}.{}", self.outcome_name)))
            .collect()
    }

    pub fn row(&self, unit: usize, period: usize) -> usize {
        unit * self.n_periods() + period
    }

    /// `(unit index, effective period index)` of every row.
    pub fn rows(&self) -> Vec<(usize, usize)> {
        let t = self.n_periods();
        (0..self.n()).map(|r| (r / t, r % t)).collect()
    }

    /// Cluster (unit) index of every row.
    pub fn cluster_ids(&self) -> Vec<usize> {
        let t = self.n_periods();
        (0..self.n()).map(|r| r / t).collect()
    }

    pub fn outcome(&self) -> &DVector<f64> {
        &self.outcome
    }

    pub fn treatments(&self) -> &DMatrix<f64> {
        &self.treatments
    }

    pub fn lags(&self) -> &DMatrix<f64> {
        &self.lags
    }

    /// Stacked predetermined block `[D | Y_{t-1} .. Y_{t-L}]`, `n x (d_alpha + L)`.
    pub fn predetermined(&self) -> DMatrix<f64> {
        let (n, da, l) = (self.n(), self.d_alpha(), self.n_lags);
        DMatrix::from_fn(n, da + l, |r, j| {
            if j < da {
                self.treatments[(r, j)]
            } else {
                self.lags[(r, j - da)]
            }
        })
    }

    /// Period labels of the history columns (initial conditions first).
    pub fn history_periods(&self) -> &[i64] {
        &self.history_periods
    }

    /// History column of effective period 0. Columns before it are pre-sample levels.
    pub fn first_effective(&self) -> usize {
        self.first
    }

    /// Outcome levels, `N x (first_effective + T)`.
    pub fn outcome_history(&self) -> &DMatrix<f64> {
        &self.y_hist
    }

    /// Treatment levels for treatment `j`, `N x (first_effective + T)`.
    pub fn treatment_history(&self, j: usize) -> &DMatrix<f64> {
        &self.d_hist[j]
    }

    /// Restrict to the given units (in the given order) and effective periods.
    ///
    /// Units may repeat; with `fresh_labels` each occurrence gets its own label
    /// (and hence its own fixed effect), which is what the cluster bootstrap needs.
    pub fn subsample(&self, units: &[usize], periods: Range<usize>, fresh_labels: bool) -> Self {
        assert!(periods.start < periods.end && periods.end <= self.n_periods());
        let hist_end = self.first + periods.end;
        let pick = |m: &DMatrix<f64>| {
            DMatrix::from_fn(units.len(), hist_end, |r, c| m[(units[r], c)])
        };
        let labels = units
            .iter()
            .enumerate()
            .map(|(k, &u)| {
                if fresh_labels {
                    format!("{}#{k}", self.units[u])
                } else {
                    self.units[u].clone()
                }
            })
            .collect();
        RegressionSample::assemble(
            self.outcome_name.clone(),
            self.treatment_names.clone(),
            self.n_lags,
            labels,
            self.history_periods[..hist_end].to_vec(),
            self.first + periods.start,
            pick(&self.y_hist),
            self.d_hist.iter().map(pick).collect(),
        )
    }

    /// The sub-sample covered by one part of a partition.
    pub fn part(&self, part: &Part) -> Self {
        self.subsample(&part.units, part.periods.clone(), false)
    }

    /// Same sample with the outcome history transformed cell by cell.
    pub fn map_outcome(&self, f: impl Fn(usize, f64) -> f64) -> Self {
        let y = DMatrix::from_fn(self.y_hist.nrows(), self.y_hist.ncols(), |i, c| {
            f(i, self.y_hist[(i, c)])
        });
        RegressionSample::assemble(
            self.outcome_name.clone(),
            self.treatment_names.clone(),
            self.n_lags,
            self.units.clone(),
            self.history_periods.clone(),
            self.first,
            y,
            self.d_hist.clone(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitScheme {
    Time,
    CrossSection,
}

/// Index convention for the second half of a split.
///
/// `Paper` uses `{1..ceil(K/2)}` and `{floor(K/2)..K}` (1-based), which overlap.
/// `NonOverlap` starts the second part right after the first one ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitConvention {
    #[default]
    Paper,
    NonOverlap,
}

impl std::str::FromStr for SplitConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(SplitConvention::Paper),
            "nonoverlap" => Ok(SplitConvention::NonOverlap),
            other => Err(Error::InvalidConfig {
                field: "split-convention".into(),
                reason: format!("expected `paper` or `nonoverlap`, got `{other}`"),
            }),
        }
    }
}

/// One side of a partition: a unit list, an effective-period range and the
/// parent-sample rows they cover.
#[derive(Debug, Clone, PartialEq)]
pub struct Part {
    pub units: Vec<usize>,
    pub periods: Range<usize>,
    pub rows: Vec<usize>,
}

impl Part {
    fn new(sample: &RegressionSample, units: Vec<usize>, periods: Range<usize>) -> Self {
        let rows = units
            .iter()
            .flat_map(|&i| periods.clone().map(move |t| (i, t)))
            .map(|(i, t)| sample.row(i, t))
            .collect();
        Part {
            units,
            periods,
            rows,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitPartition {
    pub scheme: SplitScheme,
    pub convention: SplitConvention,
    pub part_a: Part,
    pub part_b: Part,
    pub descriptor: String,
}

/// 0-based bounds `(end of part a, start of part b)` for `k` ordered items.
fn half_bounds(k: usize, convention: SplitConvention) -> (usize, usize) {
    let end_a = k.div_ceil(2);
    let start_b = match convention {
        // 1-based floor(k/2) is 0-based floor(k/2) - 1
        SplitConvention::Paper => k / 2 - 1,
        SplitConvention::NonOverlap => end_a,
    };
    (end_a, start_b)
}

/// Split along time: every unit, effective periods `1..ceil(T/2)` and `floor(T/2)..T`.
pub fn time_split(sample: &RegressionSample, convention: SplitConvention) -> Result<SplitPartition> {
    let t = sample.n_periods();
    if t < 4 {
        return Err(Error::TooFewPeriodsForSplit(t));
    }
    let (end_a, start_b) = half_bounds(t, convention);
    let all: Vec<usize> = (0..sample.n_units()).collect();
    Ok(SplitPartition {
        scheme: SplitScheme::Time,
        convention,
        part_a: Part::new(sample, all.clone(), 0..end_a),
        part_b: Part::new(sample, all, start_b..t),
        descriptor: format!(
            "time: periods {}..{} and {}..{} of {}",
            1,
            end_a,
            start_b + 1,
            t,
            t
        ),
    })
}

/// Split along the cross section of the permuted unit ordering: units
/// `1..ceil(N/2)` and `floor(N/2)..N`, all periods in both parts.
pub fn cross_split(
    sample: &RegressionSample,
    permutation: &[usize],
    convention: SplitConvention,
) -> Result<SplitPartition> {
    let n = sample.n_units();
    if n < 4 {
        return Err(Error::TooFewUnits(n));
    }
    if permutation.len() != n {
        return Err(Error::InvalidPermutation(format!(
            "length {} for {} units",
            permutation.len(),
            n
        )));
    }
    let mut seen = vec![false; n];
    for &u in permutation {
        if u >= n || std::mem::replace(&mut seen[u], true) {
            return Err(Error::InvalidPermutation(format!(
                "index {u} out of range or repeated"
            )));
        }
    }
    let (end_a, start_b) = half_bounds(n, convention);
    let t = sample.n_periods();
    Ok(SplitPartition {
        scheme: SplitScheme::CrossSection,
        convention,
        part_a: Part::new(sample, permutation[..end_a].to_vec(), 0..t),
        part_b: Part::new(sample, permutation[start_b..].to_vec(), 0..t),
        descriptor: format!(
            "cross-section: permuted units {}..{} and {}..{} of {}",
            1,
            end_a,
            start_b + 1,
            n,
            n
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    pub(crate) fn panel(n: usize, t: usize) -> BalancedPanel {
        let mut series = BTreeMap::new();
        series.insert(
            "y".to_string(),
            DMatrix::from_fn(n, t, |i, j| (100 * i + j) as f64),
        );
        series.insert(
            "d".to_string(),
            DMatrix::from_fn(n, t, |i, j| ((i + j) % 2) as f64),
        );
        BalancedPanel::from_series(
            (0..n).map(|i| format!("u{i:03}")).collect(),
            (0..t as i64).map(|j| 1987 + j).collect(),
            series,
        )
        .unwrap()
    }

    #[test]
    fn design_dimensions() {
        let s = build_design(&panel(147, 23), "y", &["d"], 4).unwrap();
        assert_eq!(s.n_periods(), 19);
        assert_eq!(s.n(), 2793);
        assert_eq!(s.param_count(), 170);
        let s = build_design(&panel(2, 3), "y", &["d"], 1).unwrap();
        assert_eq!(s.n_periods(), 2);
        assert_eq!(s.n(), 4);
        assert_eq!(
            build_design(&panel(2, 3), "y", &["d"], 3).unwrap_err().name(),
            "TooFewPeriods"
        );
        assert_eq!(
            build_design(&panel(2, 3), "q", &["d"], 1).unwrap_err().name(),
            "UnknownVariable"
        );
    }

    #[test]
    fn lag_columns_hold_actual_lagged_values() {
        let p = panel(3, 7);
        let s = build_design(&p, "y", &["d"], 2).unwrap();
        let y = p.series("y").unwrap();
        for (r, (i, t)) in s.rows().into_iter().enumerate() {
            assert_eq!(s.outcome()[r], y[(i, t + 2)]);
            assert_eq!(s.lags()[(r, 0)], y[(i, t + 1)]);
            assert_eq!(s.lags()[(r, 1)], y[(i, t)]);
        }
        assert_eq!(s.periods(), &[1989, 1990, 1991, 1992, 1993]);
        assert_eq!(s.coefficient_names(), vec!["d", "L1.y", "L2.y"]);
    }

    #[test]
    fn time_split_bounds() {
        let s = build_design(&panel(3, 23), "y", &["d"], 4).unwrap();
        let part = time_split(&s, SplitConvention::Paper).unwrap();
        assert_eq!(part.part_a.periods, 0..10);
        assert_eq!(part.part_b.periods, 8..19);
        let s4 = build_design(&panel(3, 5), "y", &["d"], 1).unwrap();
        let part = time_split(&s4, SplitConvention::Paper).unwrap();
        assert_eq!(part.part_a.periods, 0..2);
        assert_eq!(part.part_b.periods, 1..4);
        let part = time_split(&s4, SplitConvention::NonOverlap).unwrap();
        assert_eq!(part.part_b.periods, 2..4);
        let s3 = build_design(&panel(3, 4), "y", &["d"], 1).unwrap();
        assert_eq!(
            time_split(&s3, SplitConvention::Paper).unwrap_err(),
            Error::TooFewPeriodsForSplit(3)
        );
    }

    #[test]
    fn half_panels_reuse_lag_values() {
        let s = build_design(&panel(3, 12), "y", &["d"], 2).unwrap();
        let part = time_split(&s, SplitConvention::Paper).unwrap();
        let b = s.part(&part.part_b);
        assert_eq!(b.n_periods(), part.part_b.periods.len());
        for (k, &r) in part.part_b.rows.iter().enumerate() {
            assert_eq!(b.outcome()[k], s.outcome()[r]);
            assert_eq!(b.lags().row(k), s.lags().row(r));
            assert_eq!(b.treatments().row(k), s.treatments().row(r));
        }
    }

    #[test]
    fn cross_split_bounds() {
        let s = build_design(&panel(147, 6), "y", &["d"], 1).unwrap();
        let id: Vec<usize> = (0..147).collect();
        let part = cross_split(&s, &id, SplitConvention::Paper).unwrap();
        assert_eq!(part.part_a.units, (0..74).collect::<Vec<_>>());
        assert_eq!(part.part_b.units, (72..147).collect::<Vec<_>>());

        let s = build_design(&panel(4, 6), "y", &["d"], 1).unwrap();
        let part = cross_split(&s, &[0, 1, 2, 3], SplitConvention::Paper).unwrap();
        assert_eq!(part.part_a.units, vec![0, 1]);
        assert_eq!(part.part_b.units, vec![1, 2, 3]);
        let rev = cross_split(&s, &[3, 2, 1, 0], SplitConvention::Paper).unwrap();
        assert_eq!(rev.part_a.units.len(), 2);
        assert_eq!(rev.part_b.units.len(), 3);
        assert_eq!(rev.part_a.units, vec![3, 2]);

        assert_eq!(
            cross_split(&s, &[0, 1, 1, 3], SplitConvention::Paper).unwrap_err().name(),
            "InvalidPermutation"
        );
        let s3 = build_design(&panel(3, 6), "y", &["d"], 1).unwrap();
        assert_eq!(
            cross_split(&s3, &[0, 1, 2], SplitConvention::Paper).unwrap_err(),
            Error::TooFewUnits(3)
        );
    }

    proptest::proptest! {
        #[test]
        fn splits_cover_all_rows(n in 4usize..12, t in 6usize..16, conv in 0usize..2, seed in 0u64..1000) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let conv = if conv == 0 { SplitConvention::Paper } else { SplitConvention::NonOverlap };
            let s = build_design(&panel(n, t), "y", &["d"], 1).unwrap();
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            for part in [time_split(&s, conv).unwrap(), cross_split(&s, &perm, conv).unwrap()] {
                let mut rows: Vec<usize> = part.part_a.rows.iter().chain(&part.part_b.rows).copied().collect();
                rows.sort();
                rows.dedup();
                proptest::prop_assert_eq!(rows, (0..s.n()).collect::<Vec<_>>());
                for p in [&part.part_a, &part.part_b] {
                    let sub = s.part(p);
                    proptest::prop_assert_eq!(sub.n(), p.units.len() * p.periods.len());
                    proptest::prop_assert_eq!(sub.n(), p.rows.len());
                }
            }
        }
    }
}
