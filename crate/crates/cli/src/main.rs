use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dynpanel::ab::{AbSpec, InstrumentWindow};
use dynpanel::pipeline::{bootstrap_estimate, estimate_all, Estimate, Estimator, PipelineConfig};
use dynpanel::sample::SplitConvention;
use dynpanel::simlab::{mc_study, StudyConfig, StudyReport};
use dynpanel::{build_design, read_csv_panel, Error};
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(name = "dynpanel", version, about = "Dynamic panel estimation with bias corrections")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate a dynamic panel model from a long-format CSV.
    Estimate(EstimateArgs),
    /// Run a Monte Carlo study described by a key = value config file.
    Mc(McArgs),
}

#[derive(Args)]
struct EstimateArgs {
    /// CSV with columns unit,period,<variables...>
    #[arg(long)]
    data: PathBuf,
    /// fe, dfe-a, dfe-ss, ab, dab-ss or dab-ssK; repeat or comma-separate for several
    #[arg(long = "estimator", value_delimiter = ',', default_value = "fe")]
    estimators: Vec<Estimator>,
    #[arg(long, default_value_t = 4)]
    lags: usize,
    /// Trimming parameter of the analytical correction
    #[arg(long, default_value_t = 4)]
    trim: usize,
    /// Random cross-section splits for dab-ss
    #[arg(long, default_value_t = 1)]
    splits: usize,
    /// Cluster bootstrap replications (0 disables)
    #[arg(long, default_value_t = 0)]
    boot: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "paper")]
    split_convention: SplitConvention,
    #[arg(long, default_value = "lgdp")]
    outcome: String,
    #[arg(long = "treatment", value_delimiter = ',', default_value = "dem")]
    treatments: Vec<String>,
    /// Multiply treatment and long-run rows by 100 in the table
    #[arg(long)]
    scale100: bool,
    /// Write the full-precision JSON report here
    #[arg(long)]
    json: Option<PathBuf>,
    /// Which level periods instrument each differenced equation (model, effective, all)
    #[arg(long, default_value = "model")]
    instrument_window: InstrumentWindow,
    /// Keep only the most recent K periods of each instrumenting variable
    #[arg(long)]
    lag_cap: Option<usize>,
    /// Apply the G/(G-1)(n-1)/(n-p) factor to clustered covariances
    #[arg(long)]
    small_sample: bool,
}

#[derive(Args)]
struct McArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
    /// Overrides the seed in the config file
    #[arg(long)]
    seed: Option<u64>,
}

/// One displayed table row at full precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TableRow {
    estimator: String,
    row: String,
    value: f64,
    se_analytic: Option<f64>,
    se_bootstrap: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct EstimateReport {
    data: String,
    outcome: String,
    treatments: Vec<String>,
    lags: usize,
    seed: u64,
    boot: usize,
    scale100: bool,
    config: PipelineConfig,
    estimates: Vec<Estimate>,
    table: Vec<TableRow>,
}

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_ESTIMATION: u8 = 4;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidConfig { .. } | Error::ConfigParse { .. } => EXIT_USAGE,
        e if e.is_data_error() => EXIT_DATA,
        _ => EXIT_ESTIMATION,
    }
}

fn table_rows(e: &Estimate, scale100: bool) -> Vec<TableRow> {
    let d_alpha = e.d_alpha;
    let boot = e.se_bootstrap.as_deref();
    let mut rows: Vec<TableRow> = e
        .names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let s = if scale100 && j < d_alpha { 100.0 } else { 1.0 };
            TableRow {
                estimator: e.label.clone(),
                row: name.clone(),
                value: e.coefficients[j] * s,
                se_analytic: Some(e.se_analytic[j] * s),
                se_bootstrap: boot.map(|b| b[j] * s),
            }
        })
        .collect();
    let s = if scale100 { 100.0 } else { 1.0 };
    for (j, lr) in e.long_run.iter().enumerate() {
        rows.push(TableRow {
            estimator: e.label.clone(),
            row: format!("long-run {}", e.names[j]),
            value: lr.value * s,
            se_analytic: lr.se_analytic.map(|v| v * s),
            se_bootstrap: lr.se_bootstrap.map(|v| v * s),
        });
    }
    rows
}

fn format_row(r: &TableRow) -> String {
    let mut line = format!("  {:<18} {:>10.2}", r.row, r.value);
    if let Some(se) = r.se_analytic {
        line.push_str(&format!(" ({se:.2})"));
    }
    if let Some(se) = r.se_bootstrap {
        line.push_str(&format!(" [{se:.2}]"));
    }
    line
}

fn run_estimate(args: EstimateArgs) -> Result<(), Error> {
    let panel = read_csv_panel(&args.data)?;
    let treatments: Vec<&str> = args.treatments.iter().map(String::as_str).collect();
    let sample = build_design(&panel, &args.outcome, &treatments, args.lags)?;
    let config = PipelineConfig {
        trim: args.trim,
        splits: args.splits,
        convention: args.split_convention,
        ab: AbSpec { lag_cap: args.lag_cap, window: args.instrument_window },
        small_sample: args.small_sample,
    };
    if args.boot == 1 {
        return Err(Error::InvalidConfig { field: "boot".into(), reason: "need 0 or at least 2 replications".into() });
    }

    let mut estimates = Vec::new();
    for res in estimate_all(&sample, &args.estimators, &config, args.seed) {
        let mut e = res?;
        if args.boot > 0 {
            bootstrap_estimate(&sample, &mut e, &config, args.boot, args.seed, true)?;
        }
        estimates.push(e);
    }

    let mut table = Vec::new();
    for e in &estimates {
        let rows = table_rows(e, args.scale100);
        println!("{}", e.label);
        for r in &rows {
            println!("{}", format_row(r));
        }
        println!("  n = {}, p = {}, m = {}", e.dims.n, e.dims.p, e.dims.m);
        println!("  {}", e.diagnostic.verdict);
        for w in &e.warnings {
            if *w != e.diagnostic.verdict {
                println!("  warning: {w}");
            }
        }
        println!();
        table.extend(rows);
    }
    if args.scale100 {
        println!("treatment and long-run rows x 100; (analytic clustered SE), [bootstrap SE]");
    } else {
        println!("(analytic clustered SE), [bootstrap SE]");
    }

    if let Some(path) = &args.json {
        let report = EstimateReport {
            data: args.data.display().to_string(),
            outcome: args.outcome.clone(),
            treatments: args.treatments.clone(),
            lags: args.lags,
            seed: args.seed,
            boot: args.boot,
            scale100: args.scale100,
            config,
            estimates,
            table,
        };
        let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Io(e.to_string()))?;
        fs::write(path, text + "\n").map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn print_study(report: &StudyReport) {
    println!(
        "{:<10} {:<10} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>8}",
        "estimator", "parameter", "truth", "mean", "bias", "sd", "rmse", "coverage", "failures"
    );
    for r in &report.rows {
        println!(
            "{:<10} {:<10} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.3} {:>8}",
            r.estimator, r.parameter, r.truth, r.mean, r.bias, r.sd, r.rmse, r.coverage, r.failures
        );
    }
}

fn run_mc(args: McArgs) -> Result<(), Error> {
    let text = fs::read_to_string(&args.config).map_err(|e| Error::Io(format!("{}: {e}", args.config.display())))?;
    let mut config = StudyConfig::parse(&text)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let report = mc_study(&config)?;
    print_study(&report);
    if let Some(path) = &args.csv {
        let f = fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        report.write_csv(f)?;
    }
    if let Some(path) = &args.json {
        fs::write(path, report.to_json() + "\n").map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Estimate(a) => run_estimate(a),
        Command::Mc(a) => run_mc(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.name());
            ExitCode::from(exit_code(&e))
        }
    }
}
