//! Balanced panel container, CSV ingestion and per-unit lag/difference operators.
//!
//! A [`BalancedPanel`] stores every variable as an `N x T` matrix (units in
//! rows, periods in columns). Units are kept in lexicographic order and periods
//! in increasing order, so the ingestion order of the records never affects
//! anything computed downstream.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One long-format observation: a unit, a period and its variable values.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub unit: String,
    pub period: i64,
    pub values: Vec<(String, f64)>,
}

impl Record {
    pub fn new(unit: impl Into<String>, period: i64, values: &[(&str, f64)]) -> Self {
        Record {
            unit: unit.into(),
            period,
            values: values.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalancedPanel {
    units: Vec<String>,
    periods: Vec<i64>,
    series: BTreeMap<String, DMatrix<f64>>,
}

/// Mean, standard deviation (n - 1 denominator) and count of one variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSummary {
    pub variable: String,
    pub mean: f64,
    pub sd: f64,
    pub count: usize,
}

/// Build a balanced panel from long-format records.
pub fn load_panel(records: &[Record]) -> Result<BalancedPanel> {
    if records.is_empty() {
        return Err(Error::EmptyPanel);
    }
    let units: BTreeSet<&str> = records.iter().map(|r| r.unit.as_str()).collect();
    let periods: BTreeSet<i64> = records.iter().map(|r| r.period).collect();
    let variables: BTreeSet<&str> = records
        .iter()
        .flat_map(|r| r.values.iter().map(|(k, _)| k.as_str()))
        .collect();

    let units: Vec<String> = units.into_iter().map(str::to_string).collect();
    let periods: Vec<i64> = periods.into_iter().collect();
    let unit_pos: BTreeMap<&str, usize> = units
        .iter()
        .enumerate()
        .map(|(i, u)| (u.as_str(), i))
        .collect();
    let period_pos: BTreeMap<i64, usize> =
        periods.iter().enumerate().map(|(t, &p)| (p, t)).collect();

    let (n, t) = (units.len(), periods.len());
    let mut filled: BTreeMap<&str, DMatrix<bool>> = BTreeMap::new();
    let mut series: BTreeMap<String, DMatrix<f64>> = BTreeMap::new();
    for v in &variables {
        filled.insert(v, DMatrix::from_element(n, t, false));
        series.insert(v.to_string(), DMatrix::zeros(n, t));
    }

    for rec in records {
        let i = unit_pos[rec.unit.as_str()];
        let j = period_pos[&rec.period];
        for (name, value) in &rec.values {
            if !value.is_finite() {
                return Err(Error::NonNumericValue {
                    value: value.to_string(),
                    context: format!("unit `{}`, period {}, `{}`", rec.unit, rec.period, name),
                });
            }
            let seen = filled.get_mut(name.as_str()).expect("registered variable");
            if seen[(i, j)] {
                return Err(Error::DuplicateCell {
                    unit: rec.unit.clone(),
                    period: rec.period,
                    variable: name.clone(),
                });
            }
            seen[(i, j)] = true;
            series.get_mut(name.as_str()).expect("registered variable")[(i, j)] = *value;
        }
    }

    for seen in filled.values() {
        for i in 0..n {
            for j in 0..t {
                if !seen[(i, j)] {
                    return Err(Error::UnbalancedPanel {
                        unit: units[i].clone(),
                        period: periods[j],
                    });
                }
            }
        }
    }

    Ok(BalancedPanel {
        units,
        periods,
        series,
    })
}

/// Read a long-format CSV (`unit,period,<var1>,...`) into records.
pub fn read_csv_records<R: Read>(reader: R) -> Result<Vec<Record>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Io(e.to_string()))?.clone();
    if headers.len() < 3
        || !headers[0].eq_ignore_ascii_case("unit")
        || !headers[1].eq_ignore_ascii_case("period")
    {
        return Err(Error::Io(
            "CSV header must be `unit,period,<var1>,...`".to_string(),
        ));
    }
    let names: Vec<String> = headers.iter().skip(2).map(str::to_string).collect();

    let mut records = Vec::new();
    for (line, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| Error::Io(e.to_string()))?;
        let line = line + 2;
        let period = row[1].parse::<i64>().map_err(|_| Error::NonNumericValue {
            value: row[1].to_string(),
            context: format!("line {line}, column `period`"),
        })?;
        let mut values = Vec::with_capacity(names.len());
        for (k, name) in names.iter().enumerate() {
            let raw = &row[k + 2];
            let v = raw.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                Error::NonNumericValue {
                    value: raw.to_string(),
                    context: format!("line {line}, column `{name}`"),
                }
            })?;
            values.push((name.clone(), v));
        }
        records.push(Record {
            unit: row[0].to_string(),
            period,
            values,
        });
    }
    Ok(records)
}

pub fn read_csv_panel(path: &Path) -> Result<BalancedPanel> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    load_panel(&read_csv_records(file)?)
}

impl BalancedPanel {
    /// Assemble a panel directly from `N x T` matrices.
    pub fn from_series(
        units: Vec<String>,
        periods: Vec<i64>,
        series: BTreeMap<String, DMatrix<f64>>,
    ) -> Result<Self> {
        if units.is_empty() || periods.is_empty() {
            return Err(Error::EmptyPanel);
        }
        if units.iter().collect::<BTreeSet<_>>().len() != units.len() {
            return Err(Error::InvalidConfig {
                field: "units".into(),
                reason: "unit identifiers must be unique".into(),
            });
        }
        if periods.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig {
                field: "periods".into(),
                reason: "periods must be strictly increasing".into(),
            });
        }
        for (name, m) in &series {
            if m.nrows() != units.len() || m.ncols() != periods.len() {
                return Err(Error::InvalidConfig {
                    field: name.clone(),
                    reason: format!(
                        "expected {}x{} values, got {}x{}",
                        units.len(),
                        periods.len(),
                        m.nrows(),
                        m.ncols()
                    ),
                });
            }
            if let Some(v) = m.iter().find(|v| !v.is_finite()) {
                return Err(Error::NonNumericValue {
                    value: v.to_string(),
                    context: format!("variable `{name}`"),
                });
            }
        }
        Ok(BalancedPanel {
            units,
            periods,
            series,
        })
    }

    pub fn units(&self) -> &[String] {
        &self.units
    }

    pub fn periods(&self) -> &[i64] {
        &self.periods
    }

    pub fn n_units(&self) -> usize {
        self.units.len()
    }

    pub fn n_periods(&self) -> usize {
        self.periods.len()
    }

    /// Number of unit-period cells.
    pub fn n_cells(&self) -> usize {
        self.units.len() * self.periods.len()
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.series.keys().map(String::as_str)
    }

    /// The `N x T` matrix of a variable.
    pub fn series(&self, variable: &str) -> Result<&DMatrix<f64>> {
        self.series
            .get(variable)
            .ok_or_else(|| Error::UnknownVariable(variable.to_string()))
    }

    pub fn summary(&self, variable: &str) -> Result<VariableSummary> {
        let m = self.series(variable)?;
        let count = m.len();
        let mean = m.iter().sum::<f64>() / count as f64;
        let sd = if count > 1 {
            (m.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
        } else {
            0.0
        };
        Ok(VariableSummary {
            variable: variable.to_string(),
            mean,
            sd,
            count,
        })
    }

    pub fn summaries(&self) -> Vec<VariableSummary> {
        self.series
            .keys()
            .map(|v| self.summary(v).expect("known variable"))
            .collect()
    }

    /// `k`-th lag of a variable, per unit. Entries for the first `k` periods are `None`.
    pub fn lag(&self, variable: &str, k: usize) -> Result<Vec<Vec<Option<f64>>>> {
        let m = self.series(variable)?;
        let t = self.n_periods();
        if k >= t {
            return Err(Error::LagTooLarge { lag: k, periods: t });
        }
        Ok((0..self.n_units())
            .map(|i| {
                (0..t)
                    .map(|j| if j >= k { Some(m[(i, j - k)]) } else { None })
                    .collect()
            })
            .collect())
    }

    /// First difference `V_t - V_{t-1}` per unit, undefined at the first period.
    pub fn difference(&self, variable: &str) -> Result<Vec<Vec<Option<f64>>>> {
        let m = self.series(variable)?;
        let t = self.n_periods();
        if t < 2 {
            return Err(Error::SingletonTimeSeries);
        }
        Ok((0..self.n_units())
            .map(|i| {
                (0..t)
                    .map(|j| if j >= 1 { Some(m[(i, j)] - m[(i, j - 1)]) } else { None })
                    .collect()
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_var_panel(name: &str, rows: &[&[f64]]) -> BalancedPanel {
        let mut recs = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            for (t, v) in row.iter().enumerate() {
                recs.push(Record::new(format!("u{i}"), t as i64 + 1, &[(name, *v)]));
            }
        }
        load_panel(&recs).unwrap()
    }

    #[test]
    fn load_single_unit_mean() {
        let p = single_var_panel("x", &[&[1.0, 4.0]]);
        assert_eq!(p.n_cells(), 2);
        let s = p.summary("x").unwrap();
        assert_eq!(s.mean, 2.5);
        assert_eq!(s.count, 2);
    }

    #[test]
    fn load_rejects_missing_period() {
        let recs = vec![
            Record::new("A", 1, &[("x", 1.0)]),
            Record::new("A", 2, &[("x", 1.0)]),
            Record::new("A", 3, &[("x", 1.0)]),
            Record::new("B", 1, &[("x", 1.0)]),
            Record::new("B", 2, &[("x", 1.0)]),
        ];
        let err = load_panel(&recs).unwrap_err();
        assert_eq!(
            err,
            Error::UnbalancedPanel {
                unit: "B".into(),
                period: 3
            }
        );
    }

    #[test]
    fn load_rejects_missing_variable_cell() {
        let recs = vec![
            Record::new("A", 1, &[("x", 1.0), ("y", 2.0)]),
            Record::new("A", 2, &[("x", 1.0)]),
        ];
        assert_eq!(load_panel(&recs).unwrap_err().name(), "UnbalancedPanel");
    }

    #[test]
    fn load_rejects_duplicates_and_nan() {
        let recs = vec![
            Record::new("A", 1, &[("x", 1.0)]),
            Record::new("A", 1, &[("x", 2.0)]),
        ];
        assert_eq!(load_panel(&recs).unwrap_err().name(), "DuplicateCell");
        let recs = vec![Record::new("A", 1, &[("x", f64::NAN)])];
        assert_eq!(load_panel(&recs).unwrap_err().name(), "NonNumericValue");
        assert_eq!(load_panel(&[]).unwrap_err(), Error::EmptyPanel);
    }

    #[test]
    fn ingestion_order_is_irrelevant() {
        let mut recs = vec![
            Record::new("b", 2001, &[("x", 3.0)]),
            Record::new("a", 2000, &[("x", 1.0)]),
            Record::new("b", 2000, &[("x", 4.0)]),
            Record::new("a", 2001, &[("x", 2.0)]),
        ];
        let p1 = load_panel(&recs).unwrap();
        recs.reverse();
        let p2 = load_panel(&recs).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(p1.units(), &["a".to_string(), "b".to_string()]);
        assert_eq!(p1.periods(), &[2000, 2001]);
    }

    #[test]
    fn csv_parsing() {
        let text = "unit,period,dem,lgdp\nA,1990,1,7.5\nA,1991,0,7.6\nB,1990,1,8\nB,1991,1,8.1\n";
        let p = load_panel(&read_csv_records(text.as_bytes()).unwrap()).unwrap();
        assert_eq!(p.n_units(), 2);
        assert_eq!(p.series("lgdp").unwrap()[(1, 1)], 8.1);
        let bad = "unit,period,x\nA,1990,abc\n";
        let err = read_csv_records(bad.as_bytes()).unwrap_err();
        assert_eq!(err.name(), "NonNumericValue");
        let bad = "unit,period,x\nA,19.5,1\n";
        assert_eq!(read_csv_records(bad.as_bytes()).unwrap_err().name(), "NonNumericValue");
    }

    #[test]
    fn lag_examples() {
        let p = single_var_panel("v", &[&[1.0, 2.0, 3.0, 4.0]]);
        assert_eq!(
            p.lag("v", 1).unwrap()[0],
            vec![None, Some(1.0), Some(2.0), Some(3.0)]
        );
        let p = single_var_panel("v", &[&[5.0, 5.0, 5.0]]);
        assert_eq!(p.lag("v", 2).unwrap()[0], vec![None, None, Some(5.0)]);
        let p = single_var_panel("v", &[&[1.0, 2.0, 3.0], &[9.0, 8.0, 7.0]]);
        let l = p.lag("v", 1).unwrap();
        assert_eq!(l[0], vec![None, Some(1.0), Some(2.0)]);
        assert_eq!(l[1], vec![None, Some(9.0), Some(8.0)]);
        assert_eq!(p.lag("v", 3).unwrap_err().name(), "LagTooLarge");
        assert_eq!(p.lag("w", 1).unwrap_err().name(), "UnknownVariable");
    }

    #[test]
    fn difference_examples() {
        let p = single_var_panel("v", &[&[1.0, 3.0, 6.0], &[2.0, 2.0, 2.0]]);
        let d = p.difference("v").unwrap();
        assert_eq!(d[0], vec![None, Some(2.0), Some(3.0)]);
        assert_eq!(d[1], vec![None, Some(0.0), Some(0.0)]);
        let p = single_var_panel("v", &[&[1.0]]);
        assert_eq!(p.difference("v").unwrap_err(), Error::SingletonTimeSeries);
    }

    proptest::proptest! {
        #[test]
        fn difference_equals_level_minus_lag(
            vals in proptest::collection::vec(-1e3f64..1e3, 6),
            c in -50.0f64..50.0,
        ) {
            let p = single_var_panel("v", &[&vals[..3], &vals[3..]]);
            let d = p.difference("v").unwrap();
            let l = p.lag("v", 1).unwrap();
            let m = p.series("v").unwrap();
            for i in 0..2 {
                for t in 1..3 {
                    proptest::prop_assert_eq!(d[i][t].unwrap(), m[(i, t)] - l[i][t].unwrap());
                }
            }
            let q = single_var_panel("v", &[&[vals[0], vals[0] + c]]);
            proptest::prop_assert_eq!(q.difference("v").unwrap()[0][1], Some((vals[0] + c) - vals[0]));
        }
    }
}
