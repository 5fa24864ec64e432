//! Seeded data generator for dynamic panels and a Monte Carlo study runner.
//!
//! The generator draws
//!
//! ```text
//! Y_it = a_i + b_t + alpha D_it + rho_1 Y_i,t-1 + ... + rho_L Y_i,t-L + e_it
//! ```
//!
//! with `D_it` a two-state Markov chain whose switching probability is
//! logistic in `loading * a_i + feedback * e_i,t-1`. The error is independent
//! of current and past regressors, so `D` and the lags are predetermined.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ab::InstrumentWindow;
use crate::error::{Error, Result};
use crate::panel::BalancedPanel;
use crate::pipeline::{estimate_all, Estimator, PipelineConfig};
use crate::sample::{build_design, SplitConvention};
use crate::seeds::{derive_seed, stream};

pub const OUTCOME: &str = "y";
pub const TREATMENT: &str = "d";
/// Two-sided 95% normal critical value.
pub const Z_95: f64 = 1.959963984540054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Noise {
    Gaussian,
    /// Student t with `df > 2` degrees of freedom, rescaled to unit variance.
    StudentT { df: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpConfig {
    pub n_units: usize,
    /// Periods in the generated panel, initial conditions included.
    pub n_periods: usize,
    /// Treatment effect; `None` generates a pure autoregression without `d`.
    pub alpha: Option<f64>,
    pub rho: Vec<f64>,
    pub sigma_a: f64,
    pub sigma_b: f64,
    pub sigma_eps: f64,
    /// Probability that the treatment keeps last period's state.
    pub stay_prob: f64,
    /// Loading of the unit effect in the treatment probability.
    pub loading: f64,
    /// Loading of last period's shock in the treatment probability.
    pub feedback: f64,
    pub burn_in: usize,
    pub noise: Noise,
}

impl Default for DgpConfig {
    fn default() -> Self {
        DgpConfig {
            n_units: 100,
            n_periods: 10,
            alpha: Some(1.0),
            rho: vec![0.5],
            sigma_a: 1.0,
            sigma_b: 0.5,
            sigma_eps: 1.0,
            stay_prob: 0.8,
            loading: 1.0,
            feedback: 0.0,
            burn_in: 100,
            noise: Noise::Gaussian,
        }
    }
}

fn invalid(field: &str, reason: impl Into<String>) -> Error {
    Error::InvalidConfig { field: field.into(), reason: reason.into() }
}

impl DgpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_units == 0 {
            return Err(invalid("n_units", "must be positive"));
        }
        if self.n_periods <= self.rho.len() {
            return Err(invalid("n_periods", format!("must exceed the number of lags ({})", self.rho.len())));
        }
        if self.alpha.is_none() && self.rho.is_empty() {
            return Err(invalid("alpha", "a model without treatment needs at least one lag"));
        }
        let persistence: f64 = self.rho.iter().sum();
        if !(persistence.abs() < 1.0) || self.rho.iter().any(|r| !r.is_finite()) {
            return Err(invalid("rho", format!("sum of lag coefficients {persistence} is outside (-1, 1)")));
        }
        if let Some(a) = self.alpha {
            if !a.is_finite() {
                return Err(invalid("alpha", "must be finite"));
            }
        }
        for (field, v) in [("sigma_a", self.sigma_a), ("sigma_b", self.sigma_b), ("sigma_eps", self.sigma_eps)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(field, format!("{v} is not a non-negative scale")));
            }
        }
        if !(0.0..=1.0).contains(&self.stay_prob) {
            return Err(invalid("stay_prob", format!("{} is not a probability in [0, 1]", self.stay_prob)));
        }
        for (field, v) in [("loading", self.loading), ("feedback", self.feedback)] {
            if !v.is_finite() {
                return Err(invalid(field, "must be finite"));
            }
        }
        if let Noise::StudentT { df } = self.noise {
            if !(df > 2.0) {
                return Err(invalid("noise", format!("student-t needs df > 2, got {df}")));
            }
        }
        Ok(())
    }

    /// True `(alpha, rho)` in coefficient order, with the long-run effect.
    pub fn truths(&self) -> (Vec<f64>, Option<f64>) {
        let mut t: Vec<f64> = self.alpha.into_iter().collect();
        t.extend(&self.rho);
        let lr = self.alpha.map(|a| a / (1.0 - self.rho.iter().sum::<f64>()));
        (t, lr)
    }
}

/// A generated panel with the latent draws behind it.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub panel: BalancedPanel,
    pub unit_effects: Vec<f64>,
    pub time_effects: Vec<f64>,
    /// Shocks `e_it`, units by panel periods.
    pub shocks: DMatrix<f64>,
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn draw_noise(noise: Noise, rng: &mut ChaCha8Rng) -> f64 {
    match noise {
        Noise::Gaussian => StandardNormal.sample(rng),
        Noise::StudentT { df } => {
            let t: f64 = StudentT::new(df).expect("validated df").sample(rng);
            t * ((df - 2.0) / df).sqrt()
        }
    }
}

pub fn simulate(config: &DgpConfig, seed: u64) -> Result<Simulation> {
    config.validate()?;
    let mut rng = stream(seed, 0);
    let (n, t, burn) = (config.n_units, config.n_periods, config.burn_in);
    let l = config.rho.len();
    let persistence: f64 = config.rho.iter().sum();

    let unit_effects: Vec<f64> = (0..n)
        .map(|_| config.sigma_a * Distribution::<f64>::sample(&StandardNormal, &mut rng))
        .collect();
    let time_effects: Vec<f64> = (0..t)
        .map(|_| config.sigma_b * Distribution::<f64>::sample(&StandardNormal, &mut rng))
        .collect();

    let mut y = DMatrix::zeros(n, t);
    let mut d = DMatrix::zeros(n, t);
    let mut shocks = DMatrix::zeros(n, t);
    let alpha = config.alpha.unwrap_or(0.0);
    let mut history = vec![0.0; l];
    for i in 0..n {
        let a = unit_effects[i];
        let p0 = logistic(config.loading * a);
        let mut state = (rng.random::<f64>() < p0) as u8 as f64;
        let mean = (a + alpha * p0) / (1.0 - persistence);
        history.iter_mut().for_each(|h| *h = mean);
        let mut last_shock = 0.0;
        for s in 0..burn + t {
            if config.alpha.is_some() && s > 0 {
                let keep = rng.random::<f64>() < config.stay_prob;
                if !keep {
                    let p = logistic(config.loading * a + config.feedback * last_shock);
                    state = (rng.random::<f64>() < p) as u8 as f64;
                }
            }
            let e = config.sigma_eps * draw_noise(config.noise, &mut rng);
            let b = if s >= burn { time_effects[s - burn] } else { 0.0 };
            let mut v = a + b + alpha * state + e;
            for (j, r) in config.rho.iter().enumerate() {
                v += r * history[j];
            }
            if l > 0 {
                history.rotate_right(1);
                history[0] = v;
            }
            if s >= burn {
                y[(i, s - burn)] = v;
                d[(i, s - burn)] = state;
                shocks[(i, s - burn)] = e;
            }
            last_shock = e;
        }
    }

    let mut series = BTreeMap::new();
    series.insert(OUTCOME.to_string(), y);
    if config.alpha.is_some() {
        series.insert(TREATMENT.to_string(), d);
    }
    let units = (0..n).map(|i| format!("u{:05}", i + 1)).collect();
    let periods = (1..=t as i64).collect();
    Ok(Simulation {
        panel: BalancedPanel::from_series(units, periods, series)?,
        unit_effects,
        time_effects,
        shocks,
    })
}

pub fn simulate_dgp(config: &DgpConfig, seed: u64) -> Result<BalancedPanel> {
    Ok(simulate(config, seed)?.panel)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub dgp: DgpConfig,
    pub estimators: Vec<Estimator>,
    pub replications: usize,
    pub seed: u64,
    /// Outcome lags in the estimated model; defaults to the DGP's.
    pub lags: Option<usize>,
    pub pipeline: PipelineConfig,
    pub parallel: bool,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            dgp: DgpConfig::default(),
            estimators: vec![Estimator::Fe],
            replications: 100,
            seed: 0,
            lags: None,
            pipeline: PipelineConfig::default(),
            parallel: true,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        self.dgp.validate()?;
        if self.replications < 2 {
            return Err(invalid("replications", format!("need at least 2, got {}", self.replications)));
        }
        if self.estimators.is_empty() {
            return Err(invalid("estimators", "no estimator requested"));
        }
        Ok(())
    }

    pub fn n_lags(&self) -> usize {
        self.lags.unwrap_or(self.dgp.rho.len())
    }

    /// Parse a flat `key = value` file. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = StudyConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |reason: String| Error::ConfigParse { line: line_no, reason };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let num = |v: &str| v.parse::<f64>().map_err(|_| err(format!("`{key}`: `{v}` is not a number")));
            let int = |v: &str| v.parse::<usize>().map_err(|_| err(format!("`{key}`: `{v}` is not a non-negative integer")));
            let boolean = |v: &str| match v {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                _ => Err(err(format!("`{key}`: `{v}` is not a boolean"))),
            };
            let list = |v: &str| -> Vec<String> {
                v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
            };
            match key {
                "n_units" | "N" => c.dgp.n_units = int(value)?,
                "n_periods" | "T" => c.dgp.n_periods = int(value)?,
                "alpha" => c.dgp.alpha = if value == "none" { None } else { Some(num(value)?) },
                "rho" => c.dgp.rho = list(value).iter().map(|v| num(v)).collect::<Result<_>>()?,
                "sigma_a" => c.dgp.sigma_a = num(value)?,
                "sigma_b" => c.dgp.sigma_b = num(value)?,
                "sigma_eps" => c.dgp.sigma_eps = num(value)?,
                "stay_prob" => c.dgp.stay_prob = num(value)?,
                "loading" => c.dgp.loading = num(value)?,
                "feedback" => c.dgp.feedback = num(value)?,
                "burn_in" => c.dgp.burn_in = int(value)?,
                "noise" => {
                    c.dgp.noise = match value.split_once(':') {
                        None if value == "gaussian" => Noise::Gaussian,
                        Some(("student_t", df)) => Noise::StudentT { df: num(df.trim())? },
                        _ => return Err(err(format!("`noise`: expected `gaussian` or `student_t:DF`, got `{value}`"))),
                    }
                }
                "estimators" => {
                    c.estimators = list(value)
                        .iter()
                        .map(|e| e.parse::<Estimator>().map_err(|x| err(x.to_string())))
                        .collect::<Result<_>>()?
                }
                "replications" | "R" => c.replications = int(value)?,
                "seed" => c.seed = value.parse().map_err(|_| err(format!("`seed`: `{value}` is not an unsigned integer")))?,
                "lags" => c.lags = Some(int(value)?),
                "trim" => c.pipeline.trim = int(value)?,
                "splits" => c.pipeline.splits = int(value)?,
                "split_convention" => {
                    c.pipeline.convention = value.parse::<SplitConvention>().map_err(|x| err(x.to_string()))?
                }
                "instrument_window" => {
                    c.pipeline.ab.window = value.parse::<InstrumentWindow>().map_err(|x| err(x.to_string()))?
                }
                "lag_cap" => c.pipeline.ab.lag_cap = if value == "none" { None } else { Some(int(value)?) },
                "small_sample" => c.pipeline.small_sample = boolean(value)?,
                "parallel" => c.parallel = boolean(value)?,
                other => return Err(err(format!("unknown key `{other}`"))),
            }
        }
        c.validate()?;
        Ok(c)
    }
}

/// Summary of one estimator for one parameter across replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub estimator: String,
    pub parameter: String,
    pub truth: f64,
    pub mean: f64,
    pub bias: f64,
    pub sd: f64,
    pub rmse: f64,
    pub coverage: f64,
    pub failures: usize,
    pub successes: usize,
}

/// Estimates and analytic SEs of one estimator in one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub estimates: Vec<f64>,
    pub std_errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub config: StudyConfig,
    pub rows: Vec<StudyRow>,
    /// Per estimator label, one entry per replication (`None` on failure).
    #[serde(skip)]
    pub draws: BTreeMap<String, Vec<Option<Draw>>>,
}

impl StudyReport {
    pub fn row(&self, estimator: &str, parameter: &str) -> Option<&StudyRow> {
        self.rows.iter().find(|r| r.estimator == estimator && r.parameter == parameter)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::Io(e.to_string()))
    }
}

/// Simulation seed and estimator seed of replication `r`.
pub fn replication_seeds(seed: u64, r: usize) -> (u64, u64) {
    let rs = derive_seed(seed, r as u64);
    (rs, derive_seed(rs, 1))
}

fn replicate(config: &StudyConfig, r: usize) -> Result<Vec<Result<(Vec<f64>, Vec<f64>)>>> {
    let (data_seed, est_seed) = replication_seeds(config.seed, r);
    let panel = simulate_dgp(&config.dgp, data_seed)?;
    let treatments: &[&str] = if config.dgp.alpha.is_some() { &[TREATMENT] } else { &[] };
    let sample = build_design(&panel, OUTCOME, treatments, config.n_lags())?;
    Ok(estimate_all(&sample, &config.estimators, &config.pipeline, est_seed)
        .into_iter()
        .map(|res| {
            res.map(|e| {
                let mut est = e.coefficients.clone();
                let mut se = e.se_analytic.clone();
                est.extend(e.long_run.iter().map(|l| l.value));
                se.extend(e.long_run.iter().map(|l| l.se_analytic.unwrap_or(f64::NAN)));
                (est, se)
            })
        })
        .collect())
}

pub fn mc_study(config: &StudyConfig) -> Result<StudyReport> {
    config.validate()?;
    let n_lags = config.n_lags();
    let (mut truth, lr_truth) = config.dgp.truths();
    // model lags beyond the DGP's have true value zero; fewer lags leave no truth
    truth.resize(config.dgp.alpha.is_some() as usize + n_lags, 0.0);
    let mut names: Vec<String> = config.dgp.alpha.map(|_| TREATMENT.to_string()).into_iter().collect();
    names.extend((1..=n_lags).map(|j| format!("L{j}.{OUTCOME}")));
    if let Some(lr) = lr_truth {
        names.push(format!("LR.{TREATMENT}"));
        truth.push(if n_lags >= config.dgp.rho.len() { lr } else { f64::NAN });
    }

    let run = |r: usize| replicate(config, r);
    let results: Vec<_> = if config.parallel {
        (0..config.replications).into_par_iter().map(run).collect()
    } else {
        (0..config.replications).map(run).collect()
    };
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    let mut draws = BTreeMap::new();
    for (k, est) in config.estimators.iter().enumerate() {
        let label = est.label(&config.pipeline);
        let col: Vec<Option<Draw>> = results
            .iter()
            .map(|rep| {
                rep[k].as_ref().ok().map(|(e, s)| Draw { estimates: e.clone(), std_errors: s.clone() })
            })
            .collect();
        let ok: Vec<&Draw> = col.iter().flatten().collect();
        let failures = col.len() - ok.len();
        for (j, name) in names.iter().enumerate() {
            let vals: Vec<f64> = ok.iter().map(|d| d.estimates[j]).collect();
            let s = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / s;
            let bias = mean - truth[j];
            let sd = crate::inference::sample_sd(vals.iter().copied());
            let rmse = (vals.iter().map(|v| (v - truth[j]).powi(2)).sum::<f64>() / s).sqrt();
            let covered = ok
                .iter()
                .filter(|d| (d.estimates[j] - truth[j]).abs() <= Z_95 * d.std_errors[j])
                .count();
            rows.push(StudyRow {
                estimator: label.clone(),
                parameter: name.clone(),
                truth: truth[j],
                mean,
                bias,
                sd,
                rmse,
                coverage: covered as f64 / s,
                failures,
                successes: ok.len(),
            });
        }
        draws.insert(label, col);
    }
    Ok(StudyReport { config: config.clone(), rows, draws })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fe::fit_fe;

    #[test]
    fn deterministic_panel_per_seed() {
        let c = DgpConfig { n_units: 20, n_periods: 8, ..Default::default() };
        let a = simulate_dgp(&c, 5).unwrap();
        let b = simulate_dgp(&c, 5).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, simulate_dgp(&c, 6).unwrap());
        assert_eq!(a.variables().collect::<Vec<_>>(), vec!["d", "y"]);
    }

    #[test]
    fn noiseless_static_panel_is_exact() {
        let c = DgpConfig {
            n_units: 15,
            n_periods: 6,
            alpha: Some(0.0),
            rho: vec![],
            sigma_eps: 0.0,
            ..Default::default()
        };
        let sim = simulate(&c, 1).unwrap();
        let y = sim.panel.series("y").unwrap();
        for i in 0..15 {
            for t in 0..6 {
                assert_eq!(y[(i, t)], sim.unit_effects[i] + sim.time_effects[t]);
            }
        }
        let s = build_design(&sim.panel, "y", &["d"], 0).unwrap();
        assert!(fit_fe(&s).unwrap().coefficients[0].abs() < 1e-12);
    }

    #[test]
    fn pooled_ols_recovers_alpha_without_effects() {
        let c = DgpConfig {
            n_units: 5000,
            n_periods: 11,
            alpha: Some(0.7),
            rho: vec![0.0],
            sigma_a: 0.0,
            sigma_b: 0.0,
            loading: 0.0,
            ..Default::default()
        };
        let p = simulate_dgp(&c, 3).unwrap();
        let s = build_design(&p, "y", &["d"], 1).unwrap();
        // pooled OLS on [1, d, y_{t-1}]
        let n = s.n();
        let x = DMatrix::from_fn(n, 3, |r, j| match j {
            0 => 1.0,
            1 => s.treatments()[(r, 0)],
            _ => s.lags()[(r, 0)],
        });
        let xtx = x.transpose() * &x;
        let inv = xtx.try_inverse().unwrap();
        let b = &inv * x.transpose() * s.outcome();
        let resid = s.outcome() - &x * &b;
        let s2 = resid.norm_squared() / (n - 3) as f64;
        let se = (s2 * inv[(1, 1)]).sqrt();
        assert!((b[1] - 0.7).abs() < 3.0 * se, "{} vs 0.7 (se {se})", b[1]);
    }

    #[test]
    fn shocks_are_uncorrelated_with_predetermined_regressors() {
        let c = DgpConfig { n_units: 5000, n_periods: 10, feedback: 0.5, ..Default::default() };
        let sim = simulate(&c, 8).unwrap();
        let y = sim.panel.series("y").unwrap();
        let d = sim.panel.series("d").unwrap();
        let bound = 3.0 / ((5000 * 9) as f64).sqrt();
        let corr = |a: &[f64], b: &[f64]| {
            let n = a.len() as f64;
            let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
            let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
            let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
            let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
            cov / (va * vb).sqrt()
        };
        let mut e = Vec::new();
        let (mut dd, mut yl) = (Vec::new(), Vec::new());
        for i in 0..5000 {
            for t in 1..10 {
                e.push(sim.shocks[(i, t)]);
                dd.push(d[(i, t)]);
                yl.push(y[(i, t - 1)]);
            }
        }
        assert!(corr(&e, &dd).abs() < bound);
        assert!(corr(&e, &yl).abs() < bound);
    }

    #[test]
    fn validation_names_the_field() {
        let c = DgpConfig { stay_prob: 1.3, ..Default::default() };
        match c.validate().unwrap_err() {
            Error::InvalidConfig { field, .. } => assert_eq!(field, "stay_prob"),
            e => panic!("{e:?}"),
        }
        let c = DgpConfig { rho: vec![0.6, 0.5], ..Default::default() };
        assert_eq!(c.validate().unwrap_err().name(), "InvalidConfig");
        let c = DgpConfig { noise: Noise::StudentT { df: 2.0 }, ..Default::default() };
        assert_eq!(c.validate().unwrap_err().name(), "InvalidConfig");
    }

    #[test]
    fn config_parsing() {
        let text = "# study\nN = 50\nT = 6\nalpha = 0.5\nrho = 0.3\nestimators = fe, dfe-a\nR = 3\nseed = 7\nnoise = student_t:5\n";
        let c = StudyConfig::parse(text).unwrap();
        assert_eq!(c.dgp.n_units, 50);
        assert_eq!(c.estimators, vec![Estimator::Fe, Estimator::DfeA]);
        assert_eq!(c.dgp.noise, Noise::StudentT { df: 5.0 });
        match StudyConfig::parse("N = 5\nfoo = 1\n").unwrap_err() {
            Error::ConfigParse { line, .. } => assert_eq!(line, 2),
            e => panic!("{e:?}"),
        }
        match StudyConfig::parse("N = 5\n\nT = x\n").unwrap_err() {
            Error::ConfigParse { line, .. } => assert_eq!(line, 3),
            e => panic!("{e:?}"),
        }
        match StudyConfig::parse("stay_prob = 1.3\n").unwrap_err() {
            Error::InvalidConfig { field, .. } => assert_eq!(field, "stay_prob"),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn small_study_is_reproducible_and_parallel_safe() {
        let mut c = StudyConfig {
            dgp: DgpConfig { n_units: 30, n_periods: 7, ..Default::default() },
            estimators: vec![Estimator::Fe, Estimator::DfeSs, Estimator::Ab, Estimator::DabSs(Some(2))],
            replications: 2,
            seed: 11,
            ..Default::default()
        };
        let a = mc_study(&c).unwrap();
        c.parallel = false;
        let b = mc_study(&c).unwrap();
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.draws, b.draws);
        assert_eq!(a.rows.len(), 4 * 3);
        let lr = a.row("FE", "LR.d").unwrap();
        assert!((lr.truth - 2.0).abs() < 1e-15);
        let mut csv = Vec::new();
        a.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("estimator,parameter,truth,mean,bias,sd,rmse,coverage,failures,successes"));
    }
}
