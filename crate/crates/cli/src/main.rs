//! Command-line front end: ingest, growth, fit, balance, synth, pipeline
//! and check subcommands over the analysis library.
//!
//! Exit codes: 0 success, 1 check failure, 2 usage or configuration error,
//! 3 data or i/o error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nongibrat::balance::{estimate_theta_a, gamma_relation, symmetry_statistic, Gamma, RegionKind};
use nongibrat::error::Error;
use nongibrat::fit::{fit_alpha, fit_lognormal_mid, fit_pareto_samples, fit_tent_rmax};
use nongibrat::histogram::{conditional_growth_density, empirical_density, LogBinGrid};
use nongibrat::panel::{load_panel, pair_periods, write_panel, ColumnMap};
use nongibrat::pipeline::{run_check, run_pipeline, run_synth, AnalysisReport, RunConfig};
use nongibrat::synth::{GeneratorSpec, Mode};

#[derive(Parser)]
#[command(name = "nongibrat", version, about = "Growth-rate laws and quasi-balance analysis for two-period panels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ColumnArgs {
    /// Column holding the entity identifier.
    #[arg(long, default_value = "entity")]
    entity_col: String,
    /// Column holding the integer period label.
    #[arg(long, default_value = "period")]
    period_col: String,
    /// Column holding the positive value.
    #[arg(long, default_value = "value")]
    value_col: String,
    /// Field delimiter (single character).
    #[arg(long, default_value = "\t")]
    delimiter: char,
}

impl ColumnArgs {
    fn map(&self) -> ColumnMap {
        ColumnMap {
            entity: self.entity_col.clone(),
            period: self.period_col.clone(),
            value: self.value_col.clone(),
            delimiter: self.delimiter,
        }
    }
}

#[derive(Args, Clone)]
struct GridArgs {
    #[arg(long, default_value_t = 4.0)]
    grid_scale: f64,
    #[arg(long, default_value_t = 1.0)]
    grid_offset: f64,
    #[arg(long, default_value_t = 0.2)]
    grid_width: f64,
    #[arg(long, default_value_t = 20)]
    grid_bins: usize,
}

impl GridArgs {
    fn grid(&self) -> Result<LogBinGrid, Error> {
        LogBinGrid::new(self.grid_scale, self.grid_offset, self.grid_width, self.grid_bins)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Validate and normalize an observation file.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        columns: ColumnArgs,
        /// Optional path for the normalized copy.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Conditional growth-rate densities and per-bin tent fits.
    Growth {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        columns: ColumnArgs,
        #[arg(long)]
        p1: i32,
        #[arg(long)]
        p2: i32,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = -2.0)]
        r_lo: f64,
        #[arg(long, default_value_t = 2.0)]
        r_hi: f64,
        #[arg(long, default_value_t = 0.1)]
        r_width: f64,
        #[arg(long, default_value_t = 1.0)]
        r_max_fit: f64,
        /// Slope-law region (defaults to the grid span below the large
        /// region threshold).
        #[arg(long)]
        region_lo: Option<f64>,
        #[arg(long)]
        region_hi: Option<f64>,
    },
    /// Pareto and log-normal fits for one period.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        columns: ColumnArgs,
        #[arg(long)]
        period: i32,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, num_args = 2, default_values_t = [2e5, 1e7])]
        large_window: Vec<f64>,
        #[arg(long, num_args = 2, default_values_t = [5e3, 3.17e5])]
        middle_window: Vec<f64>,
    },
    /// Symmetry-axis regression, Gamma relation and symmetry test.
    Balance {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        columns: ColumnArgs,
        #[arg(long)]
        p1: i32,
        #[arg(long)]
        p2: i32,
        #[arg(long, num_args = 2, default_values_t = [2e5, 1e7])]
        window: Vec<f64>,
        #[arg(long, default_value_t = 2.0)]
        symmetry_lo: f64,
        #[arg(long, default_value_t = 8.0)]
        symmetry_hi: f64,
        #[arg(long, default_value_t = 12)]
        symmetry_bins: usize,
    },
    /// Generate a synthetic panel with known ground truth.
    Synth {
        #[arg(long, value_parser = parse_mode, default_value = "static")]
        mode: Mode,
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        #[arg(long, default_value_t = 0.9)]
        theta: f64,
        #[arg(long, default_value_t = 0.2)]
        log10_a: f64,
        #[arg(long, default_value_t = 0.14)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        mu1: f64,
        #[arg(long)]
        x0: Option<f64>,
        #[arg(long)]
        x_min: Option<f64>,
        #[arg(long)]
        t_minus_x0: Option<f64>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Disable the probability-1/2 reflection through the symmetry axis.
        #[arg(long)]
        no_reflect: bool,
        /// Force the reflection on.
        #[arg(long)]
        reflect: bool,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run the full analysis pipeline from a JSON config.
    Pipeline {
        /// JSON configuration file; flags below override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        input: Vec<PathBuf>,
        /// Period pair as p1:p2 (repeatable).
        #[arg(long = "pair", value_parser = parse_pair)]
        pairs: Vec<(i32, i32)>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        relation_tol: Option<f64>,
        #[arg(long, num_args = 2)]
        large_window: Option<Vec<f64>>,
        #[arg(long, num_args = 2)]
        middle_window: Option<Vec<f64>>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Validate the relation checks recorded in a report.
    Check {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        tol: Option<f64>,
    },
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    match s {
        "gibrat" => Ok(Mode::Gibrat),
        "static" | "static_nongibrat" => Ok(Mode::StaticNonGibrat),
        "quasistatic" => Ok(Mode::Quasistatic),
        other => Err(format!("unknown mode '{other}' (gibrat | static | quasistatic)")),
    }
}

fn parse_pair(s: &str) -> Result<(i32, i32), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected p1:p2, got '{s}'"))?;
    Ok((
        a.trim().parse().map_err(|e| format!("bad period '{a}': {e}"))?,
        b.trim().parse().map_err(|e| format!("bad period '{b}': {e}"))?,
    ))
}

fn window(v: &[f64]) -> (f64, f64) {
    (v[0], v[1])
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Stage { source, .. } => exit_code_for(source),
        Error::InvalidConfig(_) | Error::InvalidParams(_) | Error::BadPeriodOrder { .. } => 2,
        _ => 3,
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), Error> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Ingest { input, columns, out } => {
            let cols = columns.map();
            let report = load_panel(&input, &cols)?;
            println!(
                "{{\"observations\": {}, \"rejected_nonpositive\": {}, \"rejected_malformed\": {}}}",
                report.observations.len(),
                report.rejected_nonpositive,
                report.rejected_malformed
            );
            if let Some(out) = out {
                write_panel(&out, &report.observations, &cols)?;
                eprintln!("wrote {}", out.display());
            }
            Ok(0)
        }
        Command::Growth {
            input,
            columns,
            p1,
            p2,
            grid,
            r_lo,
            r_hi,
            r_width,
            r_max_fit,
            region_lo,
            region_hi,
        } => {
            let report = load_panel(&input, &columns.map())?;
            let panel = pair_periods(&report.observations, p1, p2)?;
            let grid = grid.grid()?;
            let n = ((r_hi - r_lo) / r_width).round() as usize;
            let r_edges: Vec<f64> = (0..=n).map(|i| r_lo + r_width * i as f64).collect();
            let growth = conditional_growth_density(&panel, &grid, &r_edges)?;
            let tents: Vec<_> = growth
                .bins
                .iter()
                .filter_map(|b| fit_tent_rmax(b, r_max_fit).ok())
                .collect();
            let lo = region_lo.unwrap_or_else(|| grid.lower_edge(1));
            let hi = region_hi.unwrap_or_else(|| grid.upper_edge(grid.n_bins));
            let slope_law = fit_alpha(&tents, hi, (lo, hi)).ok();
            print_json(&serde_json::json!({
                "n_pairs": panel.count(),
                "x1_out_of_range": growth.x1_out_of_range,
                "tents": tents,
                "slope_law": slope_law,
            }))?;
            Ok(0)
        }
        Command::Fit { input, columns, period, grid, large_window, middle_window } => {
            let report = load_panel(&input, &columns.map())?;
            let values: Vec<f64> = report
                .observations
                .iter()
                .filter(|o| o.period == period)
                .map(|o| o.value)
                .collect();
            if values.is_empty() {
                return Err(Error::EmptyInput(format!("no observations in period {period}")));
            }
            let pareto = fit_pareto_samples(&values, window(&large_window))?;
            let density = empirical_density(&values, &grid.grid()?.edges())?;
            let lognormal = fit_lognormal_mid(&density, window(&middle_window))?;
            print_json(&serde_json::json!({
                "period": period,
                "n": values.len(),
                "pareto": pareto,
                "lognormal": lognormal,
            }))?;
            Ok(0)
        }
        Command::Balance {
            input,
            columns,
            p1,
            p2,
            window: w,
            symmetry_lo,
            symmetry_hi,
            symmetry_bins,
        } => {
            let report = load_panel(&input, &columns.map())?;
            let panel = pair_periods(&report.observations, p1, p2)?;
            let fit = estimate_theta_a(&panel, window(&w), RegionKind::Large)?;
            let gamma = if (1.0 - fit.theta).abs() < 1e-12 && fit.log10_a.abs() < 1e-12 {
                Gamma::Indeterminate
            } else if fit.theta == 1.0 {
                Gamma::Indeterminate
            } else {
                gamma_relation(fit.theta, fit.log10_a)?
            };
            let width = (symmetry_hi - symmetry_lo) / symmetry_bins as f64;
            let edges: Vec<f64> =
                (0..=symmetry_bins).map(|i| symmetry_lo + width * i as f64).collect();
            let symmetry = symmetry_statistic(&panel, fit.theta, fit.log10_a, &edges)?;
            let identity = symmetry_statistic(&panel, 1.0, 0.0, &edges)?;
            print_json(&serde_json::json!({
                "theta": fit,
                "gamma": gamma,
                "symmetry_fitted": symmetry,
                "symmetry_identity": identity,
            }))?;
            Ok(0)
        }
        Command::Synth {
            mode,
            n,
            theta,
            log10_a,
            alpha,
            mu1,
            x0,
            x_min,
            t_minus_x0,
            seed,
            no_reflect,
            reflect,
            out_dir,
        } => {
            let mut spec = match mode {
                Mode::Gibrat => GeneratorSpec::gibrat(n, seed),
                Mode::StaticNonGibrat => GeneratorSpec::static_non_gibrat(n, alpha, seed),
                Mode::Quasistatic => GeneratorSpec::quasistatic(n, theta, log10_a, seed),
            };
            if mode == Mode::Quasistatic {
                spec.alpha = alpha;
            }
            spec.mu1 = mu1;
            if let Some(x0) = x0 {
                spec.x0 = x0;
            }
            if let Some(x_min) = x_min {
                spec.x_min = x_min;
            }
            if let Some(t) = t_minus_x0 {
                spec.t_minus_x0 = t;
            }
            if no_reflect {
                spec.reflect = false;
            }
            if reflect {
                spec.reflect = true;
            }
            let (obs, truth) = run_synth(&spec, &out_dir)?;
            println!("wrote {}", obs.display());
            println!("wrote {}", truth.display());
            Ok(0)
        }
        Command::Pipeline {
            config,
            input,
            pairs,
            out_dir,
            relation_tol,
            large_window,
            middle_window,
            seed,
        } => {
            let mut cfg = match config {
                Some(path) => RunConfig::from_json_file(&path)?,
                None => RunConfig::default(),
            };
            if !input.is_empty() {
                cfg.inputs = input;
            }
            if !pairs.is_empty() {
                cfg.period_pairs = pairs;
            }
            if let Some(dir) = out_dir {
                cfg.out_dir = Some(dir);
            }
            if let Some(t) = relation_tol {
                cfg.relation_tol = t;
            }
            if let Some(w) = large_window {
                cfg.large_window = window(&w);
            }
            if let Some(w) = middle_window {
                cfg.middle_window = window(&w);
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let report = run_pipeline(&cfg)?;
            for line in run_check(&report, None).lines {
                println!("{line}");
            }
            if let Some(dir) = &cfg.out_dir {
                eprintln!("report written to {}", dir.join("report.json").display());
            } else {
                print_json(&report)?;
            }
            if report.errors.is_empty() {
                Ok(0)
            } else {
                for e in &report.errors {
                    eprintln!("pair ({}, {}): {}", e.period_1, e.period_2, e.error);
                }
                Ok(3)
            }
        }
        Command::Check { report, tol } => {
            let text = std::fs::read_to_string(&report)?;
            let report: AnalysisReport = serde_json::from_str(&text)?;
            let outcome = run_check(&report, tol);
            for line in &outcome.lines {
                println!("{line}");
            }
            Ok(if outcome.pass { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
