//! Command-line front end. Exit codes: 0 success, 1 usage, 2 data, 3 numeric.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::calibrate::{null_table, write_null_table_csv};
use crate::error::{Error, Result};
use crate::model::{
    Calibration, CenterMode, DiagRecipe, GeneratorSpec, PathMethod, StatKind, TestConfig,
    DEFAULT_ENUMERATION_CAP,
};

use super::{
    config_hash, estimate_power, ingest_csv, oracle_compare, parse_scores, run_test, subsample_power,
    write_oracle_csv, write_power_csv, write_subsample_csv, Execution, ExperimentConfig, NExpr,
    OracleConfig, SubsampleConfig,
};

#[derive(Debug, Parser)]
#[command(name = "sphtest", version, about = "Distribution-free tests of spherical symmetry")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test one data file; prints a JSON report.
    Test(TestArgs),
    /// Monte Carlo power for a simulated example; writes CSV.
    Simulate(SimulateArgs),
    /// Heuristic versus exact path statistics; writes CSV.
    OracleCompare(OracleArgs),
    /// Exact cutoffs and sizes of the sign and runs tests; writes CSV.
    NullTable(NullTableArgs),
    /// Power over random subsamples of a data file; writes CSV.
    Subsample(SubsampleArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CalibrationArg {
    Exact,
    Asymptotic,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PathArg {
    Heuristic,
    Exact,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CenterArg {
    Known,
    Split,
    SpatialMedian,
}

fn parse_stat(s: &str) -> std::result::Result<StatKind, String> {
    StatKind::parse(s).ok_or_else(|| {
        let names: Vec<_> = StatKind::ALL.iter().map(|k| k.name()).collect();
        format!("unknown statistic '{s}' (expected one of {})", names.join(", "))
    })
}

fn parse_nexpr(s: &str) -> std::result::Result<NExpr, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct TestOptions {
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value = "exact")]
    pub calibration: CalibrationArg,
    #[arg(long, value_enum, default_value = "heuristic")]
    pub path: PathArg,
    #[arg(long, value_enum, default_value = "known")]
    pub center: CenterArg,
    /// Largest n solved by exhaustive enumeration.
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
    pub enumeration_cap: usize,
    /// Score file for the linear rank statistic.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    #[arg(long)]
    pub allow_asymmetric: bool,
    /// Grid step for exact calibration of non-integer scores.
    #[arg(long)]
    pub lr_resolution: Option<f64>,
}

impl TestOptions {
    fn config(&self, stats: &[StatKind], seed: u64) -> Result<TestConfig> {
        let scores = match &self.scores {
            Some(p) => Some(parse_scores(&fs::read_to_string(p)?)?),
            None => None,
        };
        Ok(TestConfig {
            alpha: self.alpha,
            statistics: stats.to_vec(),
            calibration: match self.calibration {
                CalibrationArg::Exact => Calibration::Exact,
                CalibrationArg::Asymptotic => Calibration::Asymptotic,
            },
            path_method: match self.path {
                PathArg::Heuristic => PathMethod::Heuristic,
                PathArg::Exact => PathMethod::Exact,
            },
            center_mode: match self.center {
                CenterArg::Known => CenterMode::KnownOrigin,
                CenterArg::Split => CenterMode::SampleSplit,
                CenterArg::SpatialMedian => CenterMode::SpatialMedian,
            },
            seed,
            scores,
            allow_asymmetric: self.allow_asymmetric,
            enumeration_cap: self.enumeration_cap,
            lr_resolution: self.lr_resolution,
        })
    }
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// First CSV line is a header.
    #[arg(long)]
    pub header: bool,
    #[arg(long = "stat", value_delimiter = ',', value_parser = parse_stat, default_value = "sign,runs")]
    pub stats: Vec<StatKind>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub options: TestOptions,
}

#[derive(Debug, Args)]
pub struct RunOptions {
    /// Run replicates on one thread.
    #[arg(long)]
    pub sequential: bool,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunOptions {
    fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// 3.1-3.3, 4.1, 4.2, 5.1-5.6, 6.1, 6.2, null-normal, null-t, angular-2d.
    #[arg(long)]
    pub example: String,
    /// Sample size, fixed or in terms of d (d+20, d^2+20).
    #[arg(long, value_parser = parse_nexpr, default_value = "50")]
    pub n: NExpr,
    #[arg(long, value_delimiter = ',', required = true)]
    pub dims: Vec<usize>,
    #[arg(long, default_value_t = 500)]
    pub reps: usize,
    #[arg(long, value_delimiter = ',', value_parser = parse_stat, default_value = "sign,runs")]
    pub tests: Vec<StatKind>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Degrees of freedom for null-t.
    #[arg(long, default_value_t = 1.0)]
    pub nu: f64,
    #[command(flatten)]
    pub options: TestOptions,
    #[command(flatten)]
    pub run: RunOptions,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, default_value_t = 5)]
    pub n: usize,
    #[arg(long, value_delimiter = ',', required = true)]
    pub dims: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
    pub enumeration_cap: usize,
    #[command(flatten)]
    pub run: RunOptions,
}

#[derive(Debug, Args)]
pub struct NullTableArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SubsampleArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub header: bool,
    #[arg(long, value_delimiter = ',', required = true)]
    pub proportions: Vec<f64>,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    #[arg(long = "stat", value_delimiter = ',', value_parser = parse_stat, default_value = "sign,runs")]
    pub stats: Vec<StatKind>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub options: TestOptions,
    #[command(flatten)]
    pub run: RunOptions,
}

/// Generator for a named simulated example.
pub fn example_spec(name: &str, nu: f64) -> Option<GeneratorSpec> {
    let equicorr = |a, b, location| GeneratorSpec::EquicorrNormal { a, b, location };
    Some(match name {
        "3.1" | "5.1" => equicorr(0.4, 0.6, 0.0),
        "3.2" | "5.4" => GeneratorSpec::DiagNormal {
            recipe: DiagRecipe::HalfHalf { low: 1.0, high: 2.0 },
        },
        "3.3" => GeneratorSpec::DiagNormal {
            recipe: DiagRecipe::Spike { gamma: 1.0 },
        },
        "5.3" => GeneratorSpec::DiagNormal {
            recipe: DiagRecipe::Spike { gamma: 0.3 },
        },
        "4.1" | "5.5" => GeneratorSpec::HypercubeUniform,
        "4.2" | "5.6" => GeneratorSpec::IidLaplace,
        "5.2" => GeneratorSpec::EllipticCauchy { a: 0.4, b: 0.6 },
        "6.1" => equicorr(1.0, 0.0, 1.0),
        "6.2" => equicorr(0.7, 0.3, 1.0),
        "null-normal" => GeneratorSpec::SphericalNormal,
        "null-t" => GeneratorSpec::SphericalT { nu },
        "angular-2d" => GeneratorSpec::Angular2d,
        _ => return None,
    })
}

fn emit(out: &Option<PathBuf>, stdout: &mut dyn Write, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match out {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            f(&mut w)?;
            w.flush()?;
            Ok(())
        }
        None => f(stdout),
    }
}

fn execute(cmd: Command, stdout: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Test(a) => {
            let cfg = a.options.config(&a.stats, a.seed)?;
            cfg.validate()?;
            let data = ingest_csv(&a.input, a.header)?;
            let report = run_test(&data, &cfg)?;
            writeln!(stdout, "{}", report.to_json()?)?;
            let failed = report.statistics.iter().any(|r| r.error.is_some());
            Ok(if failed { 3 } else { 0 })
        }
        Command::Simulate(a) => {
            let generator = example_spec(&a.example, a.nu)
                .ok_or_else(|| Error::InvalidParameter(format!("unknown example '{}'", a.example)))?;
            let cfg = ExperimentConfig {
                label: a.example.clone(),
                generator,
                n: a.n,
                dims: a.dims,
                reps: a.reps,
                tests: a.tests.clone(),
                test: a.options.config(&a.tests, 0)?,
                seed: a.seed,
            };
            let est = estimate_power(&cfg, a.run.execution())?;
            let hash = config_hash(&cfg)?;
            emit(&a.run.out, stdout, |w| write_power_csv(&est, cfg.seed, &hash, w))?;
            Ok(0)
        }
        Command::OracleCompare(a) => {
            let mut cfg = OracleConfig::new(a.n, a.dims, a.reps, a.seed);
            cfg.cap = a.enumeration_cap;
            let recs = oracle_compare(&cfg, a.run.execution())?;
            let hash = config_hash(&cfg)?;
            emit(&a.run.out, stdout, |w| write_oracle_csv(&recs, cfg.n, cfg.seed, &hash, w))?;
            Ok(0)
        }
        Command::NullTable(a) => {
            let table = null_table(a.n, a.alpha)?;
            emit(&a.out, stdout, |w| write_null_table_csv(&table, w))?;
            Ok(0)
        }
        Command::Subsample(a) => {
            let test = a.options.config(&a.stats, a.seed)?;
            let cfg = SubsampleConfig {
                proportions: a.proportions,
                reps: a.reps,
                test,
                seed: a.seed,
            };
            let data = ingest_csv(&a.input, a.header)?;
            let rows = subsample_power(&data, &cfg, a.run.execution())?;
            let hash = config_hash(&cfg)?;
            emit(&a.run.out, stdout, |w| write_subsample_csv(&rows, cfg.seed, &hash, w))?;
            Ok(0)
        }
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli.command, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(args, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors_exit_1() {
        assert_eq!(run_capture(&["sphtest"]).0, 1);
        assert_eq!(run_capture(&["sphtest", "bogus"]).0, 1);
        assert_eq!(run_capture(&["sphtest", "null-table", "--n", "x"]).0, 1);
        assert_eq!(run_capture(&["sphtest", "simulate", "--example", "3.1", "--dims", "2", "--tests", "nope"]).0, 1);
        assert_eq!(run_capture(&["sphtest", "simulate", "--example", "9.9", "--dims", "2"]).0, 1);
        assert_eq!(run_capture(&["sphtest", "null-table", "--n", "50", "--alpha", "2"]).0, 1);
    }

    #[test]
    fn help_exits_0() {
        let (code, _, err) = run_capture(&["sphtest", "--help"]);
        assert_eq!(code, 0);
        assert!(err.contains("null-table"));
    }

    #[test]
    fn null_table_output() {
        let (code, out, _) = run_capture(&["sphtest", "null-table", "--n", "50", "--alpha", "0.05"]);
        assert_eq!(code, 0);
        let lines: Vec<_> = out.lines().collect();
        assert_eq!(lines[0], "statistic,n,alpha,cutoff,exact_size");
        assert!(lines[1].starts_with("sign,50,0.05,32,"));
        assert!(lines[2].starts_with("runs,50,0.05,19,"));
    }

    #[test]
    fn missing_input_is_data_error() {
        let (code, _, err) = run_capture(&["sphtest", "test", "--input", "/nonexistent/x.csv"]);
        assert_eq!(code, 2, "{err}");
    }

    #[test]
    fn every_example_resolves() {
        for e in [
            "3.1", "3.2", "3.3", "4.1", "4.2", "5.1", "5.2", "5.3", "5.4", "5.5", "5.6", "6.1", "6.2", "null-normal",
            "null-t", "angular-2d",
        ] {
            assert!(example_spec(e, 1.0).is_some(), "{e}");
        }
        assert_eq!(example_spec("5.1", 1.0), example_spec("3.1", 1.0));
    }
}
