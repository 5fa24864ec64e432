//! Fixed-effects and Arellano-Bond estimation of dynamic linear panel models,
//! with analytical and split-sample bias corrections, long-run effects,
//! clustered and bootstrap inference, and a seeded Monte Carlo laboratory.

pub mod ab;
pub mod ab_debias;
pub mod correction;
pub mod cov;
pub mod error;
pub mod fe;
pub mod fe_debias;
pub mod inference;
pub mod linalg;
pub mod panel;
pub mod pipeline;
pub mod sample;
pub mod seeds;
pub mod simlab;

pub use cov::{CovarianceEstimate, CovarianceKind};
pub use error::{Error, Result};
pub use fe::{fe_cluster_cov, fit_fe, FeFit};
pub use panel::{load_panel, read_csv_panel, read_csv_records, BalancedPanel, Record, VariableSummary};
pub use sample::{build_design, cross_split, time_split, Part, RegressionSample, SplitConvention, SplitPartition, SplitScheme};
